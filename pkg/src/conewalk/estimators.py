"""Monte Carlo estimators and the verification suites built on them.

Every routine returns an :class:`McReport` whose ``passed`` field records the
outcome of its assertions. Path randomness comes from the counter-based
streams of :mod:`conewalk.wiener`; other random choices (test points, random
pairs) use a Philox generator keyed by the same (seed, stream).
"""
from __future__ import annotations

import numpy as np

from .cone_geometry import (METRIC_FORMS, TWO_PI, ConePath, ConePoint, CoverPoint, cone_action_batch,
                            decomposition_action, lorentz)
from .diffgroup import Diffeo, image_knots, log_radon_nikodym, log_rn_discrete
from .errors import ConeWalkError
from .geodesics import geodesic_case, geodesic_distance, mesh_distance_oracle
from .kernel import KernelQuery, PdeMesh, kernel_bessel, kernel_mc, kernel_pde_oracle
from .grid_paths import MAX_TURN, ORIGIN_GUARD, Path1D, Path2D, TimeGrid
from .orbit_decomp import (decompose_1d, decompose_2d, decompose_cone, join_1d, join_2d, join_cone,
                           max_decomp_deviation, split_1d, split_2d, split_cone)
from .report import McReport, RunningMoments
from .wiener import WienerParams, free_components, normals_block

_U64 = 2**64


def suite_rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[seed % _U64, stream % _U64]))


def _substream(stream: int, j: int) -> int:
    return (stream + j) % _U64


# ---------------------------------------------------------------- functionals


def _trap(times, values):
    dt = np.diff(times)
    return np.sum(0.5 * dt * (values[..., 1:] + values[..., :-1]), axis=-1)


FUNCTIONALS = {
    "endpoint": lambda t, x: x[..., -1],
    "cos_endpoint": lambda t, x: np.cos(x[..., -1]),
    "exp_half_int_sq": lambda t, x: np.exp(-0.5 * _trap(t, x * x)),
    "exp_int_sq": lambda t, x: np.exp(-_trap(t, x * x)),
}


def functional(name: str):
    if name not in FUNCTIONALS:
        raise ValueError(f"unknown functional {name!r}; known: {sorted(FUNCTIONALS)}")
    return FUNCTIONALS[name]


def gaussian_oracle(name: str, start: float, sigma: float, T: float) -> float | None:
    """Exact expectation under a free Wiener path from ``start``, where known."""
    if name == "endpoint":
        return float(start)
    if name == "cos_endpoint":
        return float(np.exp(-0.5 * sigma**2 * T) * np.cos(start))
    return None


# ---------------------------------------------------------------- cone sampling


def cone_components(params: WienerParams, grid: TimeGrid, start: ConePoint, m: int, first: int = 0,
                    threads: int = 1):
    """Cone images of planar Wiener paths started at the planar image of ``start``.

    Returns (x, ok): x has shape (m, N+1, 2) and ok flags the paths that pass
    the origin guard and the pi/2 turning bound; rows with ok False hold zeros.
    """
    r0, th0 = start.r, start.theta
    p = WienerParams(params.sigma, (r0 * np.cos(th0), r0 * np.sin(th0)), params.seed, params.stream)
    C = free_components(p, grid, m, first, dim=2, threads=threads)
    x, y = C[:, 0], C[:, 1]
    r = np.hypot(x, y)
    steps = np.arctan2(x[:, :-1] * y[:, 1:] - y[:, :-1] * x[:, 1:], x[:, :-1] * x[:, 1:] + y[:, :-1] * y[:, 1:])
    ok = np.all(r >= ORIGIN_GUARD * r.max(axis=1, keepdims=True), axis=1) & np.all(np.abs(steps) < MAX_TURN, axis=1)
    theta = np.empty_like(r)
    theta[:, 0] = th0
    np.cumsum(steps, axis=1, out=theta[:, 1:])
    theta[:, 1:] += th0
    out = np.zeros((m, grid.N + 1, 2))
    out[ok, :, 0] = r[ok] * np.cosh(theta[ok])
    out[ok, :, 1] = r[ok] * np.sinh(theta[ok])
    return out, ok


def sample_cone_path(params: WienerParams, grid: TimeGrid, start: ConePoint, index: int = 0,
                     max_tries: int = 1000) -> tuple[ConePath, int]:
    """First admissible cone path at path index >= ``index``, and the number of rejected indices."""
    for j in range(max_tries):
        x, ok = cone_components(params, grid, start, 1, first=index + j)
        if ok[0]:
            return ConePath(grid, x[0]), j
    raise ConeWalkError(f"no admissible path in {max_tries} attempts; refine the grid or move the start")


def sample_cone_ensemble(params: WienerParams, grid: TimeGrid, start: ConePoint, M: int, first: int = 0,
                         threads: int = 1) -> tuple[list[ConePath], int]:
    """Paths for indices first..first+M-1; rejected indices are dropped and counted."""
    x, ok = cone_components(params, grid, start, M, first, threads)
    return [ConePath(grid, x[i]) for i in np.flatnonzero(ok)], int(M - ok.sum())


def planar_ensemble(params: WienerParams, grid: TimeGrid, M: int, first: int = 0,
                    threads: int = 1) -> tuple[list[Path2D], int]:
    C = free_components(params, grid, M, first, dim=2, threads=threads)
    paths, rej = [], 0
    for i in range(M):
        xy = C[i].T
        r = np.hypot(xy[:, 0], xy[:, 1])
        a, b = xy[:-1], xy[1:]
        st = np.arctan2(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0], a[:, 0] * b[:, 0] + a[:, 1] * b[:, 1])
        if np.all(r >= ORIGIN_GUARD * r.max()) and np.all(np.abs(st) < MAX_TURN):
            paths.append(Path2D(grid, xy))
        else:
            rej += 1
    return paths, rej


# ---------------------------------------------------------------- invariance suites


def check_lorentz_invariance(M: int = 100, N: int = 1024, gamma: float = np.log(2.0), sigma: float = 1.0,
                             T: float = 1.0, start: ConePoint | None = None, seed: int = 0, stream: int = 0,
                             tol: float = 1e-10, threads: int = 1) -> McReport:
    """Decompose each cone path and its boost: rho and phi must agree and psi must shift by gamma."""
    if M < 1:
        raise ValueError("M must be positive")
    grid = TimeGrid(0.0, T, N)
    start = start or ConePoint.from_polar(2.0, 0.0)
    paths, rej = sample_cone_ensemble(WienerParams(sigma, seed=seed, stream=stream), grid, start, M, threads=threads)
    dev = {"rho": 0.0, "phi": 0.0, "rate": 0.0, "psi": 0.0}
    for p in paths:
        a = decompose_cone(p)
        b = decompose_cone(lorentz(gamma, p))
        dev["rho"] = max(dev["rho"], abs(a.rho - b.rho) / a.rho)
        dev["phi"] = max(dev["phi"], float(np.max(np.abs(a.phi.inv_values - b.phi.inv_values))))
        q = a.phi.inv_rate_nodes()
        dev["rate"] = max(dev["rate"], float(np.max(np.abs(q - b.phi.inv_rate_nodes()) / q)))
        dev["psi"] = max(dev["psi"], float(np.max(np.abs(b.psi_knots - a.psi_knots - gamma))))
    worst = max(dev.values())
    return McReport("lorentz", worst, 0.0, max(len(paths), 1), rej, seed,
                    {"gamma": gamma, "N": N, "M": M, "sigma": sigma, "T": T, "deviations": dev, "tolerance": tol},
                    passed=bool(paths) and worst < tol)


def check_rotation_invariance(M: int = 100, N: int = 1024, gamma: float = 1.0, sigma: float = 1.0, T: float = 1.0,
                              start=(2.0, 0.0), seed: int = 0, stream: int = 0, tol: float = 1e-10,
                              threads: int = 1) -> McReport:
    """Planar analogue: a rotation moves alpha by gamma (mod 2 pi) and leaves rho, psi, phi alone."""
    grid = TimeGrid(0.0, T, N)
    paths, rej = planar_ensemble(WienerParams(sigma, tuple(start), seed=seed, stream=stream), grid, M,
                                 threads=threads)
    dev = {"rho": 0.0, "phi": 0.0, "psi": 0.0, "alpha": 0.0}
    for p in paths:
        a = decompose_2d(p)
        b = decompose_2d(p.rotated(gamma))
        dev["rho"] = max(dev["rho"], abs(a.rho - b.rho) / a.rho)
        dev["phi"] = max(dev["phi"], float(np.max(np.abs(a.phi.inv_values - b.phi.inv_values))))
        dev["psi"] = max(dev["psi"], float(np.max(np.abs(a.psi_knots - b.psi_knots))))
        da = (b.alpha - a.alpha - gamma) % TWO_PI
        dev["alpha"] = max(dev["alpha"], min(da, TWO_PI - da))
    worst = max(dev.values())
    return McReport("rotation", worst, 0.0, max(len(paths), 1), rej, seed,
                    {"gamma": gamma, "N": N, "M": M, "deviations": dev, "tolerance": tol},
                    passed=bool(paths) and worst < tol)


# ---------------------------------------------------------------- splitting


def _positive_paths(params: WienerParams, grid: TimeGrid, M: int, threads: int = 1) -> list[Path1D]:
    C = free_components(params, grid, M, dim=1, threads=threads)
    return [Path1D(grid, np.exp(C[i, 0])) for i in range(M)]


def check_split_roundtrip(M: int = 100, N: int = 256, t_star: float = 0.375, sigma: float = 1.0, T: float = 1.0,
                          seed: int = 0, stream: int = 0, tol: float = 1e-12, threads: int = 1) -> McReport:
    """join(split(c)) == c for random decompositions in all three geometries.

    Also checks the rho consistency relation and that the split pieces equal
    the decompositions of the two sub-paths (up to quadrature rounding).
    """
    grid = TimeGrid(0.0, T, N)
    k = grid.node_index(t_star)
    u = t_star - grid.t0
    params = WienerParams(sigma, seed=seed, stream=stream)
    dev = {"r1d": 0.0, "r2": 0.0, "cone": 0.0, "rho_relation": 0.0, "pieces": 0.0}
    count, rej = 0, 0

    def relation(c, a, b):
        return abs(1 / c.rho**2 - (u / T / a.rho**2 + (T - u) / T / b.rho**2)) * c.rho**2

    for p in _positive_paths(params, grid, M, threads):
        c = decompose_1d(p)
        a, b = split_1d(c, t_star)
        dev["r1d"] = max(dev["r1d"], max_decomp_deviation(c, join_1d(a, b, t_star)))
        dev["rho_relation"] = max(dev["rho_relation"], relation(c, a, b))
        sub = decompose_1d(Path1D(grid.sub(0, k), p.values[: k + 1]))
        dev["pieces"] = max(dev["pieces"], max_decomp_deviation(sub, a) / max(1.0, a.rho))
        count += 1
    planar, r2 = planar_ensemble(WienerParams(sigma, (2.0, 0.0), seed, _substream(stream, 1)), grid, M,
                                 threads=threads)
    rej += r2
    for p in planar:
        c = decompose_2d(p)
        sp = split_2d(c, t_star)
        dev["r2"] = max(dev["r2"], max_decomp_deviation(c, join_2d(sp.first, sp.second, t_star, sp.n)),
                        max_decomp_deviation(c, join_2d(sp.first, sp.second, t_star)))
        dev["rho_relation"] = max(dev["rho_relation"], relation(c, sp.first, sp.second))
        count += 1
    cones, r3 = sample_cone_ensemble(WienerParams(sigma, seed=seed, stream=_substream(stream, 2)), grid,
                                     ConePoint.from_polar(2.0, 0.0), M, threads=threads)
    rej += r3
    for p in cones:
        c = decompose_cone(p)
        a, b = split_cone(c, t_star)
        dev["cone"] = max(dev["cone"], max_decomp_deviation(c, join_cone(a, b, t_star)))
        dev["rho_relation"] = max(dev["rho_relation"], relation(c, a, b))
        sub = decompose_cone(ConePath(grid.sub(k, N), p.values[k:]))
        dev["pieces"] = max(dev["pieces"], max_decomp_deviation(sub, b) / max(1.0, b.rho))
        count += 1
    worst = max(dev["r1d"], dev["r2"], dev["cone"], dev["rho_relation"])
    return McReport("splitting-roundtrip", worst, 0.0, count, rej, seed,
                    {"t_star": t_star, "N": N, "M": M, "deviations": dev, "tolerance": tol},
                    passed=worst < tol and dev["pieces"] < 1e-9)


def check_markov_split(name: str = "cos_endpoint", t_star: float = 0.5, M: int = 100_000, N: int = 64,
                       sigma: float = 1.0, T: float = 1.0, start: float = 0.0, seed: int = 0, stream: int = 0,
                       chunk: int = 4096, threads: int = 1, n_det: int = 10) -> McReport:
    """Direct estimate of E[F] against two-stage sampling through the node t_star.

    The second leg of each split path starts from the end of the first and
    uses an independent stream. The deterministic sub-check runs the
    split/join roundtrip on ``n_det`` decompositions of every geometry.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    F = functional(name)
    grid = TimeGrid(0.0, T, N)
    k = grid.node_index(t_star)
    if not 0 < k < N:
        from .errors import BadSplitPoint
        raise BadSplitPoint("split point must be an interior node")
    times = grid.nodes
    h = np.sqrt(grid.dt) * sigma
    direct, split = RunningMoments(), RunningMoments()
    s1, s2 = _substream(stream, 1), _substream(stream, 2)
    for lo in range(0, M, chunk):
        m = min(chunk, M - lo)
        z = normals_block(seed, stream, lo, m, N, threads=threads)
        x = np.empty((m, N + 1))
        x[:, 0] = start
        np.cumsum(h * z, axis=1, out=x[:, 1:])
        x[:, 1:] += start
        direct.add(F(times, x))
        z1 = normals_block(seed, s1, lo, m, k, threads=threads)
        z2 = normals_block(seed, s2, lo, m, N - k, threads=threads)
        y = np.empty((m, N + 1))
        y[:, 0] = start
        np.cumsum(h * z1, axis=1, out=y[:, 1:k + 1])
        y[:, 1:k + 1] += start
        np.cumsum(h * z2, axis=1, out=y[:, k + 1:])
        y[:, k + 1:] += y[:, k:k + 1]
        split.add(F(times, y))
    comb = float(np.hypot(direct.se, split.se))
    diff = direct.mean - split.mean
    oracle = gaussian_oracle(name, start, sigma, T)
    ok = abs(diff) <= 3 * comb
    meta = {"functional": name, "t_star": t_star, "N": N, "M": M, "sigma": sigma, "T": T, "start": start,
            "direct": direct.mean, "direct_se": direct.se, "split": split.mean, "split_se": split.se,
            "difference": diff, "combined_se": comb}
    if oracle is not None:
        meta["oracle"] = oracle
        meta["direct_z"] = (direct.mean - oracle) / direct.se if direct.se > 0 else 0.0
        meta["split_z"] = (split.mean - oracle) / split.se if split.se > 0 else 0.0
        ok = ok and abs(direct.mean - oracle) <= 3 * direct.se and abs(split.mean - oracle) <= 3 * split.se
    if n_det > 0:
        det = check_split_roundtrip(n_det, max(N, 8), t_star, sigma, T, seed, _substream(stream, 3),
                                    threads=threads)
        meta["join_split_deviation"] = det.estimate
        ok = ok and bool(det.passed)
    return McReport("markov", direct.mean, direct.se, M, 0, seed, meta, passed=bool(ok))


# ---------------------------------------------------------------- quasi-invariance


def _test_path(grid: TimeGrid) -> Path1D:
    t = (grid.nodes - grid.t0) / grid.T
    return Path1D(grid, 1 + 0.5 * np.sin(3 * t) + t * t)


def rn_convergence(family: str = "exponential", params: dict | None = None, sigma: float = 1.0, T: float = 1.0,
                   N_list=(256, 512, 1024, 2048, 4096)) -> dict:
    """Finite-dimensional density ratio against the continuum factor on a fixed smooth path."""
    rows = []
    for N in N_list:
        grid = TimeGrid(0.0, T, N)
        phi = Diffeo.named(grid, family, params or {"a": 1.0})
        xi = _test_path(grid)
        exact = log_radon_nikodym(phi, xi, sigma)
        disc = float(log_rn_discrete(phi, xi.values, sigma))
        rows.append({"N": N, "P_discrete": float(np.exp(disc)), "P": float(np.exp(exact)),
                     "rel_err": float(abs(np.expm1(disc - exact)))})
    errs = np.array([r["rel_err"] for r in rows])
    slope = None
    if len(rows) > 1 and np.all(errs > 0):
        slope = float(-np.polyfit(np.log(N_list), np.log(errs), 1)[0])
    return {"rows": rows, "slope": slope}


def check_quasi_invariance(family: str = "exponential", params: dict | None = None, name: str = "exp_half_int_sq",
                           M: int = 100_000, N: int = 256, sigma: float = 1.0, T: float = 1.0, seed: int = 0,
                           stream: int = 0, chunk: int = 4096, threads: int = 1,
                           N_list=(256, 512, 1024, 2048, 4096), rel_tol: float = 0.02) -> McReport:
    """Change of variables under the action, checked exactly at finite N and in the continuum limit.

    With xi a Wiener path from 0 on the uniform grid and zeta a Wiener path
    from 0 observed at the image knots phi(tau_j):
        E[F(phi xi) * Phat_phi(xi)] = E[F(zeta)],
    where phi xi has value xi_j sqrt(phi'(tau_j)) at phi(tau_j) and Phat_phi
    is the exact finite-dimensional density ratio. Separately Phat_phi is
    compared with the continuum factor P_phi on a fixed smooth path.
    """
    F = functional(name)
    grid = TimeGrid(0.0, T, N)
    phi = Diffeo.named(grid, family, params or {"a": 1.0})
    knots = phi.values
    dk = np.sqrt(np.diff(knots)) * sigma
    h = np.sqrt(grid.dt) * sigma
    lhs, rhs, plain, wstat = RunningMoments(), RunningMoments(), RunningMoments(), RunningMoments()
    s1 = _substream(stream, 1)
    for lo in range(0, M, chunk):
        m = min(chunk, M - lo)
        z = normals_block(seed, stream, lo, m, N, threads=threads)
        xi = np.zeros((m, N + 1))
        np.cumsum(h * z, axis=1, out=xi[:, 1:])
        _, eta = image_knots(phi, xi)
        w = np.exp(log_rn_discrete(phi, xi, sigma, include_start=False))
        f = F(knots, eta)
        lhs.add(f * w)
        plain.add(f)
        wstat.add(w)
        z = normals_block(seed, s1, lo, m, N, threads=threads)
        zeta = np.zeros((m, N + 1))
        np.cumsum(dk * z, axis=1, out=zeta[:, 1:])
        rhs.add(F(knots, zeta))
    comb = float(np.hypot(lhs.se, rhs.se))
    conv = rn_convergence(family, params, sigma, T, N_list)
    final = conv["rows"][-1]["rel_err"]
    mc_ok = abs(lhs.mean - rhs.mean) <= 3 * comb
    meta = {"family": family, "params": params or {"a": 1.0}, "functional": name, "N": N, "M": M, "sigma": sigma,
            "weighted": lhs.mean, "weighted_se": lhs.se, "target": rhs.mean, "target_se": rhs.se,
            "unweighted": plain.mean, "mean_weight": wstat.mean, "difference": lhs.mean - rhs.mean,
            "combined_se": comb, "rn_convergence": conv, "mc_pass": bool(mc_ok), "rn_pass": bool(final < rel_tol)}
    return McReport("quasi-invariance", lhs.mean, lhs.se, M, 0, seed, meta, passed=bool(mc_ok and final < rel_tol))


# ---------------------------------------------------------------- action identity


def appendix_b_study(N_list=(256, 512, 1024, 2048), n_paths: int = 20, sigma: float = 1.0, T: float = 1.0,
                     start: ConePoint | None = None, seed: int = 0, stream: int = 0, slope_min: float = 0.9,
                     final_tol: float = 1e-2, threads: int = 1) -> McReport:
    """Decomposition-coordinate action against the Cartesian cone action under grid refinement.

    Paths are drawn once on the finest grid and subsampled, so every level
    sees the same continuous path. The refinement slope is fitted jointly
    (common slope, one intercept per path), which equals the mean of the
    per-path least-squares slopes.
    """
    N_list = sorted(int(n) for n in N_list)
    Nmax = N_list[-1]
    if any(Nmax % n for n in N_list):
        raise ValueError("grid sizes must divide the finest one")
    start = start or ConePoint.from_polar(2.0, 0.0)
    fine = TimeGrid(0.0, T, Nmax)
    params = WienerParams(sigma, seed=seed, stream=stream)
    paths, index, rejected = [], 0, 0
    while len(paths) < n_paths:
        x, ok = cone_components(params, fine, start, n_paths, first=index, threads=threads)
        paths += [x[i] for i in np.flatnonzero(ok)]
        rejected += int((~ok).sum())
        index += n_paths
    paths = np.array(paths[:n_paths])
    errs = np.empty((n_paths, len(N_list)))
    for j, n in enumerate(N_list):
        sub = paths[:, :: Nmax // n]
        g = TimeGrid(0.0, T, n)
        rhs = cone_action_batch(sub, g.dt)
        for i in range(n_paths):
            lhs = decomposition_action(decompose_cone(ConePath(g, sub[i])))
            errs[i, j] = abs(lhs - rhs[i]) / max(abs(lhs), abs(rhs[i]))
    logN = np.log(N_list)
    with np.errstate(divide="ignore"):
        logE = np.log(errs)
    finite = np.all(np.isfinite(logE), axis=1)
    slopes = np.full(n_paths, np.nan)
    for i in np.flatnonzero(finite):
        slopes[i] = -np.polyfit(logN, logE[i], 1)[0]
    common = float(np.mean(slopes[finite])) if finite.any() else float("nan")
    final = errs[:, -1]
    ok = np.isfinite(common) and common >= slope_min and bool(np.all(final < final_tol))
    return McReport("appendix-b", common, float(np.std(slopes[finite], ddof=1) / np.sqrt(finite.sum()))
                    if finite.sum() > 1 else 0.0, n_paths, rejected, seed,
                    {"N_list": N_list, "sigma": sigma, "T": T, "start": [start.x0, start.x1],
                     "common_slope": common, "per_path_slopes": slopes.tolist(),
                     "min_path_slope": float(np.nanmin(slopes)), "rel_err": errs.tolist(),
                     "max_final_rel_err": float(final.max()), "slope_min": slope_min, "final_tol": final_tol},
                    passed=bool(ok))


# ---------------------------------------------------------------- metric forms and geodesics


def random_cone_points(n: int, seed: int = 0, stream: int = 0, theta_max: float = 2.0):
    rng = suite_rng(seed, stream)
    r = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n))
    th = rng.uniform(-theta_max, theta_max, n)
    v = rng.standard_normal((n, 2))
    return r * np.cosh(th), r * np.sinh(th), v[:, 0], v[:, 1]


def check_metric_forms(n: int = 10_000, seed: int = 0, stream: int = 0, tol: float = 1e-12) -> McReport:
    """All four coordinate forms of the cone metric give the same quadratic form."""
    x0, x1, v0, v1 = random_cone_points(n, seed, stream)
    vals = np.array([f(x0, x1, v0, v1) for f in METRIC_FORMS.values()])
    ref = vals[0]
    rel = np.max(np.abs(vals - ref) / np.abs(ref), axis=0)
    worst = float(rel.max())
    return McReport("metric-forms", worst, 0.0, n, 0, seed,
                    {"forms": list(METRIC_FORMS), "max_rel_diff": worst, "min_value": float(ref.min()),
                     "tolerance": tol}, passed=worst < tol and bool(np.all(ref > 0)))


def geodesic_pairs(n: int = 20, seed: int = 0, stream: int = 0) -> list[tuple[CoverPoint, CoverPoint]]:
    """Fixed pairs covering every case and both case boundaries, topped up with random pairs."""
    pairs = [
        (CoverPoint(1.0, 0.0), CoverPoint(1.0, np.pi / 2)),
        (CoverPoint(1.0, 0.0), CoverPoint(2.0, 3 * np.pi / 2)),
        (CoverPoint(1.0, 0.0), CoverPoint(2.0, 7.0)),
        (CoverPoint(1.0, 0.3), CoverPoint(1.5, 0.3 + np.pi)),
        (CoverPoint(0.8, -1.0), CoverPoint(1.2, -1.0 + 2 * np.pi)),
        (CoverPoint(1.0, 0.0), CoverPoint(3.0, 0.0)),
    ]
    rng = suite_rng(seed, stream)
    while len(pairs) < n:
        r = rng.uniform(0.3, 3.0, 2)
        a = rng.uniform(-np.pi, np.pi)
        pairs.append((CoverPoint(r[0], a), CoverPoint(r[1], a + rng.uniform(-8.0, 8.0))))
    return pairs[:n]


def check_geodesics(n: int = 20, resolution: int = 160, stencil: int = 20, seed: int = 0, stream: int = 0,
                    tol: float = 5e-3) -> McReport:
    rows = []
    for A, B in geodesic_pairs(n, seed, stream):
        g = geodesic_distance(A, B)
        m = mesh_distance_oracle(A, B, resolution, stencil)
        rows.append({"rA": A.r, "thetaA": A.theta, "rB": B.r, "thetaB": B.theta, "case": g.case,
                     "closed_form": g.distance, "mesh": m, "abs_err": abs(m - g.distance)})
    worst = max(r["abs_err"] for r in rows)
    below = min(r["mesh"] - r["closed_form"] for r in rows)
    cases = sorted({r["case"] for r in rows})
    return McReport("geodesics", worst, 0.0, n, 0, seed,
                    {"pairs": rows, "cases": cases, "min_gap": below, "tolerance": tol},
                    passed=worst < tol and below > -1e-9 and cases == [1, 2, 3])


def continuity_at_pi(rA: float = 1.0, rB: float = 2.0, theta: float = 0.0) -> float:
    """Jump of the closed-form distance across |dtheta| = pi."""
    A = CoverPoint(rA, theta)
    at = geodesic_distance(A, CoverPoint(rB, theta + np.pi)).distance
    beyond = geodesic_distance(A, CoverPoint(rB, theta + np.nextafter(np.pi, 4.0))).distance
    return abs(at - beyond)


# ---------------------------------------------------------------- kernel


def check_kernel(query: KernelQuery | None = None, M: int = 1_000_000, N: int = 4096, mesh: PdeMesh | None = None,
                 seed: int = 0, stream: int = 0, threads: int = 1, rel_tol: float = 0.05,
                 bessel: bool = True) -> McReport:
    """Winding-class kernel from bridge sampling against the finite-difference heat solution.

    Passes when the gap is within rel_tol of the PDE value or 3 Monte Carlo
    standard errors, whichever is looser, and the class probabilities form a
    partition of unity. The exact Bessel-series value is reported alongside
    for reference only.
    """
    query = query or KernelQuery(CoverPoint(1.0, 0.0), CoverPoint(1.0, np.pi / 2), 1.0, 1.0)
    mesh = mesh or PdeMesh(dr=0.02, dtheta=0.02)
    mc = kernel_mc(query, M, N, seed, stream, threads)
    pde = kernel_pde_oracle(query, mesh)
    gap = mc.estimate - pde
    allowed = max(rel_tol * abs(pde), 3 * mc.std_error)
    psum = mc.metadata["probability_sum"]
    # the classes partition the sample, so the sum has zero sampling error
    sum_ok = abs(psum - 1.0) <= 1e-12
    meta = dict(mc.metadata)
    meta.update({"mc": mc.estimate, "mc_se": mc.std_error, "pde": pde, "gap": gap, "relative_gap": gap / pde,
                 "allowed": allowed, "mesh": {"dr": mesh.dr, "dtheta": mesh.dtheta, "eps": mesh.eps,
                                               "inner": mesh.inner}, "probability_sum_ok": sum_ok})
    if bessel:
        meta["bessel_reference"] = kernel_bessel(query)
    return McReport("kernel", mc.estimate, mc.std_error, M, 0, seed, meta, passed=bool(abs(gap) <= allowed and sum_ok))


__all__ = [
    "check_kernel",
    "FUNCTIONALS", "functional", "gaussian_oracle", "cone_components", "sample_cone_path", "sample_cone_ensemble",
    "planar_ensemble", "check_lorentz_invariance", "check_rotation_invariance", "check_split_roundtrip",
    "check_markov_split", "rn_convergence", "check_quasi_invariance", "appendix_b_study", "check_metric_forms",
    "geodesic_pairs", "check_geodesics", "continuity_at_pi", "suite_rng", "geodesic_case",
]
