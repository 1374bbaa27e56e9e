"""Command-line front end.

Settings are resolved as built-in defaults, then a flat JSON ``--config``
file, then explicit flags. The seed falls back to ``CONEWALK_SEED`` when
neither the file nor the flags give one. Exit status: 0 on success or a
passing check, 1 when a check fails, 2 for usage and configuration errors.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import estimators as est
from .cone_geometry import ConePath, ConePoint, CoverPoint, cone_to_cover
from .errors import ConeWalkError
from .geodesics import geodesic_distance, mesh_distance_oracle
from .grid_paths import Path1D, Path2D, TimeGrid
from .io import config_hash, dumps, substantive, write_diffeo, read_path, report_document, write_json, write_path, write_table
from .kernel import KernelQuery, PdeMesh, kernel_mc, kernel_pde_oracle
from .orbit_decomp import decompose_1d, decompose_2d, decompose_cone
from .wiener import WienerParams, free_components

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

DEFAULTS = {"sigma": 1.0, "T": 1.0, "N": 1024, "seed": 0, "stream": 0, "threads": 1}


class UsageError(Exception):
    pass


def _floats(text: str, n: int | None = None) -> list[float]:
    try:
        vals = [float(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"expected {n} comma-separated numbers, got {text!r}")
    return vals


def _ints(text) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    try:
        return [int(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"expected comma-separated integers, got {text!r}") from None


def resolve(args: argparse.Namespace, keys, defaults: dict | None = None) -> dict:
    """Merge defaults, the JSON config file and explicit flags for ``keys``."""
    base = {**DEFAULTS, **(defaults or {})}
    cfg = {k: base[k] for k in keys if base.get(k) is not None}
    if getattr(args, "config", None):
        try:
            loaded = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as e:
            raise UsageError(f"cannot read config {args.config}: {e}") from None
        if not isinstance(loaded, dict) or any(isinstance(v, dict) for v in loaded.values()):
            raise UsageError("config file must be a flat JSON object")
        cfg.update({k: v for k, v in loaded.items() if k in keys})
        seed_in_file = "seed" in loaded
    else:
        seed_in_file = False
    if "seed" in keys and getattr(args, "seed", None) is None and not seed_in_file and "CONEWALK_SEED" in os.environ:
        try:
            cfg["seed"] = int(os.environ["CONEWALK_SEED"])
        except ValueError:
            raise UsageError("CONEWALK_SEED must be an integer") from None
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            cfg[k] = v
    return cfg


def _check(cfg: dict) -> dict:
    for k in ("sigma", "T"):
        if k in cfg and not float(cfg[k]) > 0:
            raise UsageError(f"{k} must be positive")
    for k in ("N", "M"):
        if k in cfg and cfg[k] is not None and not (isinstance(cfg[k], (int, list)) or str(cfg[k]).isdigit()):
            raise UsageError(f"{k} must be an integer")
    if "M" in cfg and cfg["M"] is not None and int(cfg["M"]) < 1:
        raise UsageError("M must be at least 1")
    if "N" in cfg and isinstance(cfg["N"], int) and cfg["N"] < 1:
        raise UsageError("N must be at least 1")
    for k in ("seed", "stream"):
        if k in cfg and not 0 <= int(cfg[k]) < 2**64:
            raise UsageError(f"{k} must be an unsigned 64-bit integer")
    if "threads" in cfg and int(cfg["threads"]) < 1:
        raise UsageError("threads must be at least 1")
    return cfg


def _emit(doc: dict, out: str | None) -> None:
    text = dumps(doc)
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text + "\n", encoding="utf-8")
    print(text)


# ---------------------------------------------------------------- sample


def cmd_sample(args) -> int:
    cfg = _check(resolve(args, ["sigma", "T", "N", "M", "seed", "stream", "geometry", "start", "threads", "out"]))
    cfg.setdefault("M", 1)
    cfg.setdefault("geometry", "r1d")
    cfg.setdefault("out", "samples")
    geometry = cfg["geometry"]
    if geometry not in ("r1d", "r2", "cone"):
        raise UsageError("geometry must be r1d, r2 or cone")
    grid = TimeGrid(0.0, float(cfg["T"]), int(cfg["N"]))
    M = int(cfg["M"])
    need = {"r1d": 1, "r2": 2, "cone": 2}[geometry]
    start = cfg.get("start")
    start = _floats(start, need) if start is not None else {"r1d": [0.0], "r2": [1.0, 0.0], "cone": [2.0, 0.0]}[geometry]
    cfg["start"] = ",".join(repr(v) for v in start)
    chash = config_hash(cfg)
    out = Path(cfg["out"])
    out.mkdir(parents=True, exist_ok=True)
    sigma, seed, stream, threads = float(cfg["sigma"]), int(cfg["seed"]), int(cfg["stream"]), int(cfg["threads"])
    rejected = 0
    if geometry == "cone":
        x, ok = est.cone_components(WienerParams(sigma, seed=seed, stream=stream), grid,
                                    ConePoint.from_polar(start[0], start[1]), M, threads=threads)
        paths = [ConePath(grid, x[i]) for i in np.flatnonzero(ok)]
        rejected = int(M - ok.sum())
    else:
        p = WienerParams(sigma, start[0] if need == 1 else tuple(start), seed, stream)
        C = free_components(p, grid, M, dim=need, threads=threads)
        paths = [Path1D(grid, C[i, 0]) if need == 1 else Path2D(grid, C[i].T) for i in range(M)]
    files = []
    for i, path in enumerate(paths):
        name = f"path_{i:05d}.csv"
        write_path(out / name, path, chash)
        files.append(name)
    manifest = {"sigma": sigma, "T": grid.T, "N": grid.N, "seed": seed, "count": len(paths), "stream": stream,
                "geometry": geometry, "start": start, "requested": M, "rejected": rejected, "files": files,
                "config": substantive(cfg)}
    write_json(out / "manifest.json", manifest, chash)
    print(f"wrote {len(paths)} paths to {out} ({rejected} rejected)")
    return EXIT_OK


# ---------------------------------------------------------------- decompose


def cmd_decompose(args) -> int:
    try:
        path = read_path(args.path)
    except (OSError, ValueError) as e:
        raise UsageError(str(e)) from None
    geometry = args.geometry or ("r1d" if isinstance(path, Path1D) else "r2")
    cfg = {"path": str(args.path), "geometry": geometry}
    chash = config_hash(cfg)
    out = Path(args.out or Path(args.path).with_suffix(""))
    out.mkdir(parents=True, exist_ok=True)
    if geometry == "r1d":
        if not isinstance(path, Path1D):
            raise UsageError("r1d decomposition needs a tau,value file")
        c = decompose_1d(path)
        doc = {"geometry": geometry, "rho": c.rho}
    else:
        if not isinstance(path, Path2D):
            raise UsageError(f"{geometry} decomposition needs a tau,x0,x1 file")
        if geometry == "cone":
            c = decompose_cone(ConePath(path.grid, path.values))
            end = cone_to_cover(ConePoint(*path.values[-1]))
            doc = {"geometry": geometry, "rho": c.rho, "alpha": 0.0, "n": end.sheet,
                   "start_rapidity": float(ConePoint(*path.values[0]).theta)}
        elif geometry == "r2":
            c = decompose_2d(path)
            end_angle = c.alpha + c.psi_knots[-1]
            doc = {"geometry": geometry, "rho": c.rho, "alpha": c.alpha, "n": int(np.floor(end_angle / (2 * np.pi)))}
        else:
            raise UsageError("geometry must be r1d, r2 or cone")
        write_table(out / "psi.csv", ["s", "psi"], [c.phi.inv_values, c.psi_knots], chash)
    write_diffeo(out / "phi.csv", c.phi, chash)
    write_json(out / "decomposition.json", doc, chash)
    print(dumps({**doc, "output": str(out), "config_hash": chash}))
    return EXIT_OK


# ---------------------------------------------------------------- verify


def _suite_lorentz(c):
    return est.check_lorentz_invariance(M=c.get("M", 100), N=c["N"], gamma=c.get("gamma", np.log(2.0)),
                                        sigma=c["sigma"], T=c["T"], seed=c["seed"], stream=c["stream"],
                                        threads=c["threads"])


def _suite_rotation(c):
    return est.check_rotation_invariance(M=c.get("M", 100), N=c["N"], gamma=c.get("gamma", 1.0), sigma=c["sigma"],
                                         T=c["T"], seed=c["seed"], stream=c["stream"], threads=c["threads"])


def _suite_quasi(c):
    return est.check_quasi_invariance(family=c.get("family", "exponential"), M=c.get("M", 100_000), N=c["N"],
                                      sigma=c["sigma"], T=c["T"], seed=c["seed"], stream=c["stream"],
                                      threads=c["threads"], name=c.get("functional", "exp_half_int_sq"))


def _suite_markov(c):
    return est.check_markov_split(name=c.get("functional", "cos_endpoint"), t_star=c.get("t_star", 0.5),
                                  M=c.get("M", 100_000), N=c["N"], sigma=c["sigma"], T=c["T"], seed=c["seed"],
                                  stream=c["stream"], threads=c["threads"])


def _suite_appb(c):
    return est.appendix_b_study(N_list=_ints(c["N"]), n_paths=c.get("M", 20), sigma=c["sigma"], T=c["T"],
                                seed=c["seed"], stream=c["stream"], threads=c["threads"])


def _suite_metric(c):
    return est.check_metric_forms(n=c.get("M", 10_000), seed=c["seed"], stream=c["stream"])


def _suite_geodesics(c):
    return est.check_geodesics(n=c.get("M", 20), seed=c["seed"], stream=c["stream"])


def _suite_split(c):
    return est.check_split_roundtrip(M=c.get("M", 100), N=c["N"], t_star=c.get("t_star", 0.375), sigma=c["sigma"],
                                     T=c["T"], seed=c["seed"], stream=c["stream"], threads=c["threads"])


# suite name -> (runner, default N)
SUITES = {
    "lorentz": (_suite_lorentz, 1024),
    "rotation": (_suite_rotation, 1024),
    "quasi-invariance": (_suite_quasi, 256),
    "markov": (_suite_markov, 64),
    "appendix-b": (_suite_appb, "256,512,1024,2048"),
    "metric-forms": (_suite_metric, None),
    "geodesics": (_suite_geodesics, None),
    "splitting-roundtrip": (_suite_split, 256),
}


def _traces(report, out_dir: Path, chash: str) -> None:
    m = report.metadata
    if report.name == "appendix-b":
        errs = np.array(m["rel_err"])
        cols = [np.repeat(m["N_list"], 1)] + [errs[i] for i in range(len(errs))]
        write_table(out_dir / "appendix_b_refinement.csv", ["N"] + [f"path_{i}" for i in range(len(errs))],
                    cols, chash)
    elif report.name == "quasi-invariance":
        rows = m["rn_convergence"]["rows"]
        write_table(out_dir / "rn_convergence.csv", ["N", "P_discrete", "P", "rel_err"],
                    [[r[k] for r in rows] for k in ("N", "P_discrete", "P", "rel_err")], chash)
    elif report.name == "geodesics":
        rows = m["pairs"]
        keys = ["rA", "thetaA", "rB", "thetaB", "case", "closed_form", "mesh", "abs_err"]
        write_table(out_dir / "geodesic_pairs.csv", keys, [[r[k] for r in rows] for k in keys], chash)


def cmd_verify(args) -> int:
    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; known: {', '.join(SUITES)}")
    runner, n_default = SUITES[args.suite]
    keys = ["sigma", "T", "N", "M", "seed", "stream", "threads", "gamma", "t_star", "family", "functional"]
    if n_default is None:
        keys.remove("N")
    cfg = resolve(args, keys, {"N": n_default})
    if args.suite != "appendix-b" and "N" in cfg:
        cfg["N"] = _ints(cfg["N"])[0]
    elif "N" in cfg:
        cfg["N"] = ",".join(str(n) for n in _ints(cfg["N"]))
    _check({k: v for k, v in cfg.items() if k != "N" or isinstance(v, int)})
    report = runner(cfg)
    doc = report_document(report, cfg)
    _emit(doc, args.out)
    if args.trace_dir:
        Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
        _traces(report, Path(args.trace_dir), doc["config_hash"])
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------- geodesic


def cmd_geodesic(args) -> int:
    try:
        A, B = CoverPoint(args.rA, args.thetaA), CoverPoint(args.rB, args.thetaB)
    except (ValueError, ConeWalkError) as e:
        raise UsageError(str(e)) from None
    g = geodesic_distance(A, B)
    doc = g.to_json()
    if args.oracle:
        doc["mesh_distance"] = mesh_distance_oracle(A, B, args.resolution)
    if args.csv:
        pts = [p for p in doc["polyline"]]
        write_table(args.csv, ["r", "theta", "x", "y"],
                    [[p["r"] for p in pts],
                     [p["theta"] if p["theta"] is not None else float("nan") for p in pts],
                     [p["r"] * np.cos(p["theta"] or 0.0) for p in pts],
                     [p["r"] * np.sin(p["theta"] or 0.0) for p in pts]],
                    config_hash({"A": [A.r, A.theta], "B": [B.r, B.theta]}))
    print(dumps(doc))
    return EXIT_OK


# ---------------------------------------------------------------- kernel


def cmd_kernel(args) -> int:
    cfg = _check(resolve(args, ["sigma", "T", "N", "M", "seed", "stream", "threads"]))
    cfg.setdefault("M", 100_000)
    a, b = _floats(args.A, 2), _floats(args.B, 2)
    try:
        q = KernelQuery(CoverPoint(*a), CoverPoint(*b), float(cfg["sigma"]), float(cfg["T"]), args.k)
    except (ValueError, ConeWalkError) as e:
        raise UsageError(str(e)) from None
    mesh = PdeMesh(dr=args.dd, dtheta=args.dd, eps=args.eps, inner=args.inner)
    cfg.update({"A": a, "B": b, "k": args.k, "method": args.method, "dd": args.dd, "eps": args.eps,
                "inner": args.inner})
    if args.method == "both":
        report = est.check_kernel(q, int(cfg["M"]), int(cfg["N"]), mesh, int(cfg["seed"]), int(cfg["stream"]),
                                  int(cfg["threads"]))
    elif args.method == "mc":
        report = kernel_mc(q, int(cfg["M"]), int(cfg["N"]), int(cfg["seed"]), int(cfg["stream"]), int(cfg["threads"]))
        report.passed = abs(report.metadata["probability_sum"] - 1.0) <= 1e-12
    elif args.method == "pde":
        from .report import McReport

        val = kernel_pde_oracle(q, mesh)
        report = McReport("kernel_pde", val, 0.0, 1, metadata={"query": q.manifest()}, passed=bool(np.isfinite(val)))
    else:
        raise UsageError("method must be mc, pde or both")
    doc = report_document(report, cfg)
    _emit(doc, args.out)
    if args.trace_dir and "class_probabilities" in report.metadata:
        Path(args.trace_dir).mkdir(parents=True, exist_ok=True)
        probs = report.metadata["class_probabilities"]
        ks = sorted(probs, key=int)
        write_table(Path(args.trace_dir) / "winding_histogram.csv", ["k", "probability"],
                    [[int(k) for k in ks], [probs[k] for k in ks]], doc["config_hash"])
    return EXIT_OK if report.passed else EXIT_FAIL


# ---------------------------------------------------------------- parser


def _common(p: argparse.ArgumentParser, n_type=int) -> None:
    p.add_argument("--config", help="flat JSON file of settings; flags override it")
    p.add_argument("--sigma", type=float)
    p.add_argument("--T", type=float, help="duration")
    p.add_argument("--N", type=n_type, help="number of grid cells")
    p.add_argument("--M", type=int, help="number of samples")
    p.add_argument("--seed", type=int, help="defaults to $CONEWALK_SEED, then 0")
    p.add_argument("--stream", type=int)
    p.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="conewalk", description="Wiener measures on the future cone and its covering.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="sample free paths and write them as CSV")
    _common(p)
    p.add_argument("--geometry", choices=["r1d", "r2", "cone"])
    p.add_argument("--start", help="start point: value (r1d), x0,x1 (r2) or r,theta (cone)")
    p.add_argument("--out", help="output directory")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("decompose", help="orbit decomposition of a path CSV")
    p.add_argument("path")
    p.add_argument("--geometry", choices=["r1d", "r2", "cone"])
    p.add_argument("--out", help="output directory (default: next to the input)")
    p.set_defaults(func=cmd_decompose)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", help=", ".join(SUITES))
    _common(p, n_type=str)
    p.add_argument("--gamma", type=float)
    p.add_argument("--t-star", dest="t_star", type=float)
    p.add_argument("--family")
    p.add_argument("--functional", choices=sorted(est.FUNCTIONALS))
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--trace-dir", help="write plot-ready CSV traces here")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("geodesic", help="shortest path between two covering points")
    p.add_argument("rA", type=float)
    p.add_argument("thetaA", type=float)
    p.add_argument("rB", type=float)
    p.add_argument("thetaB", type=float)
    p.add_argument("--oracle", action="store_true", help="also report the mesh shortest-path distance")
    p.add_argument("--resolution", type=int, default=160)
    p.add_argument("--csv", help="write the polyline as CSV")
    p.set_defaults(func=cmd_geodesic)

    p = sub.add_parser("kernel", help="winding-class heat kernel between two covering points")
    _common(p)
    p.add_argument("--A", default="1,0", help="r,theta of the start")
    p.add_argument("--B", default="1,1.5707963267948966", help="r,theta of the end")
    p.add_argument("--k", type=int, default=0, help="winding class")
    p.add_argument("--method", choices=["mc", "pde", "both"], default="both")
    p.add_argument("--dd", type=float, default=0.02, help="PDE mesh spacing in r and theta")
    p.add_argument("--eps", type=float, default=0.005, help="PDE inner radius")
    p.add_argument("--inner", choices=["reflecting", "absorbing"], default="reflecting")
    p.add_argument("--out", help="also write the JSON report here")
    p.add_argument("--trace-dir", help="write the winding histogram CSV here")
    p.set_defaults(func=cmd_kernel)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as e:
        print(f"conewalk: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ConeWalkError, ValueError) as e:
        print(f"conewalk: error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
