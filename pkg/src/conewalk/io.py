"""Plain-text artifacts: path and table CSVs, JSON reports and manifests.

Each file carries the hash of the configuration that produced it: CSVs as a
leading ``# config_hash=...`` comment line, JSON documents as a
``config_hash`` field.
"""
from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .grid_paths import Path1D, Path2D, TimeGrid
from .report import McReport, _plain

HASH_PREFIX = "# config_hash="
# settings that change where or how fast, never what, a command computes
RUNTIME_KEYS = frozenset({"out", "threads", "trace_dir"})


def substantive(config: dict) -> dict:
    return {k: v for k, v in config.items() if k not in RUNTIME_KEYS}


def config_hash(config: dict) -> str:
    blob = json.dumps(_plain(substantive(config)), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def write_table(file, header, columns, chash: str | None = None) -> None:
    """Columns of equal length written with repr-exact float text."""
    rows = zip(*[np.asarray(c).tolist() for c in columns])
    with open(file, "w", newline="", encoding="utf-8") as fh:
        if chash:
            fh.write(f"{HASH_PREFIX}{chash}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def read_table(file) -> tuple[list[str], np.ndarray, str | None]:
    with open(file, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    chash = None
    if lines and lines[0].startswith(HASH_PREFIX):
        chash = lines.pop(0)[len(HASH_PREFIX):]
    rows = list(csv.reader(lines))
    if not rows:
        raise ValueError(f"{file}: empty table")
    data = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=np.float64)
    return rows[0], data.reshape(-1, len(rows[0])), chash


def write_path(file, path, chash: str | None = None) -> None:
    tau = path.grid.nodes
    if isinstance(path, Path2D):
        write_table(file, ["tau", "x0", "x1"], [tau, path.values[:, 0], path.values[:, 1]], chash)
    else:
        write_table(file, ["tau", "value"], [tau, path.values], chash)


def read_path(file):
    """Path1D or Path2D from a path CSV; the nodes must be uniform."""
    header, data, _ = read_table(file)
    if header[0] != "tau" or len(data) < 2:
        raise ValueError(f"{file}: expected a tau column and at least two rows")
    tau = data[:, 0]
    grid = TimeGrid(float(tau[0]), float(tau[-1] - tau[0]), len(tau) - 1)
    if not np.allclose(tau, grid.nodes, rtol=0, atol=1e-9 * max(1.0, grid.T)):
        raise ValueError(f"{file}: node times are not uniform")
    if header[1:] == ["value"]:
        return Path1D(grid, data[:, 1])
    if header[1:] == ["x0", "x1"]:
        return Path2D(grid, data[:, 1:])
    raise ValueError(f"{file}: unrecognized columns {header}")


def write_diffeo(file, phi, chash: str | None = None) -> None:
    """``tau,phi`` table plus a JSON sidecar (same stem) naming the family and mode."""
    file = Path(file)
    write_table(file, ["tau", "phi"], [phi.grid.nodes, phi.values], chash)
    g = phi.grid
    write_json(file.with_suffix(".json"), {**phi.manifest(), "t0": g.t0, "T": g.T, "N": g.N}, chash)


def read_diffeo(file):
    """Tabulated Diffeo from :func:`write_diffeo` output; analytic families are rebuilt when named."""
    from .diffgroup import FAMILIES, Diffeo

    file = Path(file)
    header, data, _ = read_table(file)
    if header != ["tau", "phi"]:
        raise ValueError(f"{file}: expected columns tau,phi")
    side = file.with_suffix(".json")
    meta = json.loads(side.read_text(encoding="utf-8")) if side.exists() else {}
    tau = data[:, 0]
    grid = TimeGrid(float(tau[0]), float(tau[-1] - tau[0]), len(tau) - 1)
    fam = meta.get("family")
    if fam in FAMILIES:
        params = {k: v for k, v in meta.get("params", {}).items() if k not in ("t0", "T")}
        return Diffeo.named(grid, fam, params, mode=meta.get("mode", "analytic"))
    return Diffeo.from_values(grid, data[:, 1])


def write_json(file, doc: dict, chash: str | None = None) -> None:
    doc = _plain(doc)
    if chash:
        doc = {**doc, "config_hash": chash}
    Path(file).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def report_document(report: McReport, config: dict) -> dict:
    """Report layout {name, config, estimate, std_error, pass, details}."""
    details = dict(report.metadata)
    details.update({"n_samples": report.n_samples, "n_rejected": report.n_rejected,
                    "rejection_fraction": report.rejection_fraction, "seed": report.seed})
    return _plain({"name": report.name, "config": substantive(config), "estimate": report.estimate,
                   "std_error": report.std_error, "pass": report.passed, "details": details,
                   "config_hash": config_hash(config)})


def dumps(doc: dict) -> str:
    return json.dumps(_plain(doc), indent=2, sort_keys=True)
