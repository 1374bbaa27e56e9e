"""Orbit-decomposition coordinates of positive, planar and cone paths, and the
maps that split a decomposition at an interior node and join two back.

For a path with squared radius R(tau) (xi^2, |z|^2 or x0^2 - x1^2):

    1/rho^2   = (1/T) int dtau / R
    phi^-1(t) = t0 + rho^2 int_t0^t dtau / R
    xi(tau)   = rho / sqrt((phi^-1)'(tau))

phi^-1 and its derivative are tabulated exactly at the nodes, and phi is
obtained by monotone piecewise-linear inversion. The angular profile psi is a
function of the reparametrized time s = phi^-1(tau); it is stored by its
values at the knots s_i = phi^-1(tau_i), where it equals the lifted angle of
node i (relative to the start in the planar case). Reconstruction therefore
reproduces the node angles exactly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone_geometry import TWO_PI, ConePath, minkowski_r2, rapidity
from .diffgroup import Diffeo, _rescale
from .errors import BadSplitPoint, InvalidPath, NonPositivePath
from .grid_paths import (Path1D, Path2D, PositivePath, TimeGrid, check_origin, cumulative_trapezoid,
                         principal_angle, unwind_angle)


def _knots(x, n: int) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    if x.shape != (n,) or not np.all(np.isfinite(x)):
        raise InvalidPath(f"angular profile needs {n} finite knot values")
    x.flags.writeable = False
    return x


@dataclass(frozen=True, eq=False)
class DecompR:
    rho: float
    phi: Diffeo

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")

    @property
    def grid(self) -> TimeGrid:
        return self.phi.grid


@dataclass(frozen=True, eq=False)
class DecompR2:
    """(rho, psi, phi, alpha) of a planar path; psi is given by its knot values."""

    rho: float
    psi_knots: np.ndarray
    phi: Diffeo
    alpha: float

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "psi_knots", _knots(self.psi_knots, self.phi.grid.N + 1))
        if self.psi_knots[0] != 0.0:
            raise InvalidPath("planar angular profile must start at 0")
        if not 0.0 <= self.alpha < TWO_PI:
            raise ValueError(f"alpha must lie in [0, 2pi), got {self.alpha}")

    @property
    def grid(self) -> TimeGrid:
        return self.phi.grid

    @property
    def psi(self) -> Path1D:
        """psi on the uniform grid (piecewise-linear through the knots)."""
        return Path1D(self.grid, np.interp(self.grid.nodes, self.phi.inv_values, self.psi_knots))


@dataclass(frozen=True, eq=False)
class DecompCone:
    rho: float
    psi_knots: np.ndarray
    phi: Diffeo

    def __post_init__(self):
        if not (np.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be positive, got {self.rho}")
        object.__setattr__(self, "psi_knots", _knots(self.psi_knots, self.phi.grid.N + 1))

    @property
    def grid(self) -> TimeGrid:
        return self.phi.grid

    @property
    def psi(self) -> Path1D:
        return Path1D(self.grid, np.interp(self.grid.nodes, self.phi.inv_values, self.psi_knots))


def psi_from_grid(phi: Diffeo, psi: Path1D) -> np.ndarray:
    """Knot values of a profile given on the uniform grid."""
    return psi(phi.inv_values)


# ---------------------------------------------------------------- radial part


def _radial(R: np.ndarray, grid: TimeGrid):
    g = 1.0 / R
    cum = cumulative_trapezoid(g, grid)
    inv_rho2 = cum[-1] / grid.T
    inv = grid.t0 + cum / inv_rho2
    inv[-1] = grid.t1
    phi = Diffeo.from_inverse(grid, inv, inv_rate=g / inv_rho2)
    return float(1.0 / np.sqrt(inv_rho2)), phi


def _radius(coords, guard_endpoints: bool) -> np.ndarray:
    return coords.rho * _rescale(coords.phi, guard_endpoints)


def decompose_1d(path: Path1D) -> DecompR:
    v = path.values
    if not np.all(v > 0):
        raise NonPositivePath("decomposition needs a strictly positive path")
    rho, phi = _radial(v * v, path.grid)
    return DecompR(rho, phi)


def reconstruct_1d(coords: DecompR, guard_endpoints: bool = False) -> PositivePath:
    return PositivePath(coords.grid, _radius(coords, guard_endpoints))


def decompose_2d(path: Path2D) -> DecompR2:
    r = check_origin(path.values)
    theta = unwind_angle(path).values
    rho, phi = _radial(r * r, path.grid)
    return DecompR2(rho, theta - theta[0], phi, theta[0])


def reconstruct_2d(coords: DecompR2, guard_endpoints: bool = False) -> Path2D:
    r = _radius(coords, guard_endpoints)
    th = coords.alpha + coords.psi_knots
    return Path2D(coords.grid, np.column_stack([r * np.cos(th), r * np.sin(th)]))


def decompose_cone(path: ConePath) -> DecompCone:
    x0, x1 = path.values[:, 0], path.values[:, 1]
    rho, phi = _radial(minkowski_r2(x0, x1), path.grid)
    return DecompCone(rho, rapidity(x0, x1), phi)


def reconstruct_cone(coords: DecompCone, guard_endpoints: bool = False) -> ConePath:
    return ConePath.from_polar(coords.grid, _radius(coords, guard_endpoints), coords.psi_knots)


# ---------------------------------------------------------------- splitting


def _split_index(grid: TimeGrid, t_star: float) -> int:
    k = grid.node_index(t_star)
    if not 0 < k < grid.N:
        raise BadSplitPoint(f"split point {t_star} must be an interior node")
    if k < 2 or grid.N - k < 2:
        raise BadSplitPoint("each piece needs at least two cells")
    return k


def _split_radial(rho: float, phi: Diffeo, k: int):
    g = phi.grid
    s = phi.inv_values
    q = phi.inv_rate_nodes()
    u, su = k * g.dt, s[k] - g.t0
    c1, c2 = u / su, (g.T - u) / (g.T - su)
    g1, g2 = g.sub(0, k), g.sub(k, g.N)
    inv1 = g.t0 + c1 * (s[: k + 1] - g.t0)
    inv2 = g1.t1 + c2 * (s[k:] - s[k])
    phi1 = Diffeo.from_inverse(g1, inv1, inv_rate=c1 * q[: k + 1])
    phi2 = Diffeo.from_inverse(g2, inv2, inv_rate=c2 * q[k:])
    return (rho * np.sqrt(c1), phi1), (rho * np.sqrt(c2), phi2)


def joined_rho(rho1: float, rho2: float, t_star: float, t0: float, T: float) -> float:
    """1/rho^2 = (u/T)/rho1^2 + ((T-u)/T)/rho2^2 with u = t_star - t0."""
    u = t_star - t0
    return float(1.0 / np.sqrt(u / T / rho1**2 + (T - u) / T / rho2**2))


def _join_radial(rho1, phi1: Diffeo, rho2, phi2: Diffeo):
    g1, g2 = phi1.grid, phi2.grid
    if abs(g1.t1 - g2.t0) > 1e-12 * max(1.0, abs(g1.t1)) or abs(g1.dt - g2.dt) > 1e-12 * g1.dt:
        raise BadSplitPoint("pieces do not share a grid node at the split point")
    g = TimeGrid(g1.t0, g1.T + g2.T, g1.N + g2.N)
    rho = joined_rho(rho1, rho2, g1.t1, g.t0, g.T)
    c1, c2 = (rho1 / rho) ** 2, (rho2 / rho) ** 2
    s_star = g.t0 + (g1.t1 - g.t0) / c1
    inv = np.concatenate([g.t0 + (phi1.inv_values - g.t0) / c1, s_star + (phi2.inv_values[1:] - g1.t1) / c2])
    rate = np.concatenate([phi1.inv_rate_nodes() / c1, phi2.inv_rate_nodes()[1:] / c2])
    inv[-1] = g.t1
    return rho, Diffeo.from_inverse(g, inv, inv_rate=rate), g


def split_1d(coords: DecompR, t_star: float) -> tuple[DecompR, DecompR]:
    k = _split_index(coords.grid, t_star)
    (r1, p1), (r2, p2) = _split_radial(coords.rho, coords.phi, k)
    return DecompR(r1, p1), DecompR(r2, p2)


def join_1d(c1: DecompR, c2: DecompR, t_star: float | None = None) -> DecompR:
    _check_tstar(c1, t_star)
    rho, phi, _ = _join_radial(c1.rho, c1.phi, c2.rho, c2.phi)
    return DecompR(rho, phi)


def _check_tstar(c1, t_star):
    if t_star is not None and abs(c1.grid.t1 - t_star) > 1e-9 * max(1.0, abs(t_star)):
        raise BadSplitPoint(f"first piece ends at {c1.grid.t1}, not at {t_star}")


@dataclass(frozen=True, eq=False)
class SplitR2:
    first: DecompR2
    second: DecompR2
    n: int


def split_2d(coords: DecompR2, t_star: float) -> SplitR2:
    """Pieces plus the winding integer n with alpha + psi(t*) = alpha2 + 2 pi n."""
    k = _split_index(coords.grid, t_star)
    (r1, p1), (r2, p2) = _split_radial(coords.rho, coords.phi, k)
    psi = coords.psi_knots
    total = coords.alpha + psi[k]
    alpha2 = principal_angle(np.sin(total), np.cos(total))
    n = int(np.round((total - alpha2) / TWO_PI))
    first = DecompR2(r1, psi[: k + 1], p1, coords.alpha)
    second = DecompR2(r2, psi[k:] - psi[k], p2, alpha2)
    return SplitR2(first, second, n)


def join_2d(c1: DecompR2, c2: DecompR2, t_star: float | None = None, n: int | None = None) -> DecompR2:
    """Second leg angle: psi = psi2 + alpha2 - alpha1 + 2 pi n. Without ``n`` it is inferred from psi1."""
    _check_tstar(c1, t_star)
    rho, phi, _ = _join_radial(c1.rho, c1.phi, c2.rho, c2.phi)
    if n is None:
        n = int(np.round((c1.alpha + c1.psi_knots[-1] - c2.alpha) / TWO_PI))
    shift = c2.alpha - c1.alpha + TWO_PI * n
    psi = np.concatenate([c1.psi_knots, c2.psi_knots[1:] + shift])
    return DecompR2(rho, psi, phi, c1.alpha)


def split_cone(coords: DecompCone, t_star: float) -> tuple[DecompCone, DecompCone]:
    k = _split_index(coords.grid, t_star)
    (r1, p1), (r2, p2) = _split_radial(coords.rho, coords.phi, k)
    psi = coords.psi_knots
    return DecompCone(r1, psi[: k + 1], p1), DecompCone(r2, psi[k:], p2)


def join_cone(c1: DecompCone, c2: DecompCone, t_star: float | None = None, tol: float = 1e-12) -> DecompCone:
    _check_tstar(c1, t_star)
    a, b = c1.psi_knots[-1], c2.psi_knots[0]
    if abs(a - b) > tol * max(1.0, abs(a)):
        raise ValueError(f"rapidity jumps at the join: {a} vs {b}")
    rho, phi, _ = _join_radial(c1.rho, c1.phi, c2.rho, c2.phi)
    return DecompCone(rho, np.concatenate([c1.psi_knots, c2.psi_knots[1:]]), phi)


def max_decomp_deviation(a, b) -> float:
    """Largest difference in rho, phi^-1 nodes, rates, psi knots and alpha between two decompositions."""
    d = [abs(a.rho - b.rho), np.max(np.abs(a.phi.inv_values - b.phi.inv_values)),
         np.max(np.abs(a.phi.inv_rate_nodes() - b.phi.inv_rate_nodes()))]
    if hasattr(a, "psi_knots"):
        d.append(np.max(np.abs(a.psi_knots - b.psi_knots)))
    if hasattr(a, "alpha"):
        da = abs(a.alpha - b.alpha)
        d.append(min(da, TWO_PI - da))
    return float(max(d))


__all__ = [
    "DecompR", "DecompR2", "DecompCone", "SplitR2", "decompose_1d", "reconstruct_1d", "decompose_2d",
    "reconstruct_2d", "decompose_cone", "reconstruct_cone", "split_1d", "join_1d", "split_2d", "join_2d",
    "split_cone", "join_cone", "joined_rho", "psi_from_grid", "max_decomp_deviation",
]
