"""The future cone x0 > |x1|, its boost-invariant metric and the isometry onto
the infinite-sheeted covering of the punctured plane.

A cone point with Minkowski radius r = sqrt(x0^2 - x1^2) and rapidity theta
corresponds to the covering point at polar radius r and lifted angle theta.
The metric

    ds^2 = dx0^2 - dx1^2 + 2 (x0 dx1 - x1 dx0)^2 / (x0^2 - x1^2)

becomes dr^2 + r^2 dtheta^2 under that correspondence, so the cone is flat
away from its apex.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidPath, OriginHit, OutsideCone, StepTooCoarse
from .grid_paths import MAX_TURN, ORIGIN_GUARD, Path2D, TimeGrid, _frozen

TWO_PI = 2 * np.pi
SQRT2 = np.sqrt(2.0)


def sheet_of(theta):
    """Sheet index n with 2 pi n <= theta < 2 pi (n + 1)."""
    n = np.floor(np.asarray(theta) / TWO_PI).astype(np.int64)
    return int(n) if np.ndim(n) == 0 else n


def minkowski_r2(x0, x1):
    """x0^2 - x1^2 in the cancellation-free factored form."""
    return (np.asarray(x0) - x1) * (np.asarray(x0) + x1)


def rapidity(x0, x1):
    return 0.5 * np.log((np.asarray(x0) + x1) / (np.asarray(x0) - x1))


# ---------------------------------------------------------------- points


@dataclass(frozen=True)
class ConePoint:
    x0: float
    x1: float

    def __post_init__(self):
        if not (np.isfinite(self.x0) and np.isfinite(self.x1) and self.x0 > abs(self.x1)):
            raise OutsideCone(f"({self.x0}, {self.x1}) is not inside the future cone")

    @classmethod
    def from_polar(cls, r: float, theta: float) -> "ConePoint":
        if not r > 0:
            raise OutsideCone("cone radius must be positive")
        return cls(float(r * np.cosh(theta)), float(r * np.sinh(theta)))

    @property
    def r(self) -> float:
        return float(np.sqrt(minkowski_r2(self.x0, self.x1)))

    @property
    def theta(self) -> float:
        return float(rapidity(self.x0, self.x1))

    @property
    def lightcone(self) -> tuple[float, float]:
        return (self.x0 + self.x1) / SQRT2, (self.x0 - self.x1) / SQRT2


@dataclass(frozen=True)
class CoverPoint:
    """Point of the covering: polar radius, lifted angle, and derived sheet index."""

    r: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise OriginHit(f"covering radius must be positive, got {self.r}")
        if not np.isfinite(self.theta):
            raise ValueError("angle must be finite")

    @property
    def sheet(self) -> int:
        return sheet_of(self.theta)

    @property
    def planar(self) -> np.ndarray:
        return np.array([self.r * np.cos(self.theta), self.r * np.sin(self.theta)])

    def rotated(self, gamma: float) -> "CoverPoint":
        return CoverPoint(self.r, self.theta + gamma)


def cone_to_cover(p: ConePoint) -> CoverPoint:
    return CoverPoint(p.r, p.theta)


def cover_to_cone(q: CoverPoint) -> ConePoint:
    return ConePoint.from_polar(q.r, q.theta)


# ---------------------------------------------------------------- paths


class ConePath(Path2D):
    """Planar path required to stay strictly inside the future cone.

    The margin x0 - |x1| must exceed the origin guard fraction of the largest x0.
    """

    def __post_init__(self):
        super().__post_init__()
        x0, x1 = self.values[:, 0], self.values[:, 1]
        margin = x0 - np.abs(x1)
        scale = np.max(np.abs(x0)) if len(x0) else 0.0
        if not np.all(margin > ORIGIN_GUARD * scale):
            i = int(np.argmin(margin))
            raise OutsideCone(f"node {i} is outside the cone or too close to the light cone")

    @classmethod
    def from_polar(cls, grid: TimeGrid, r, theta) -> "ConePath":
        r = np.asarray(r, dtype=np.float64)
        theta = np.asarray(theta, dtype=np.float64)
        return cls(grid, np.column_stack([r * np.cosh(theta), r * np.sinh(theta)]))

    def minkowski_radius(self) -> np.ndarray:
        return np.sqrt(minkowski_r2(self.values[:, 0], self.values[:, 1]))

    def rapidity(self) -> np.ndarray:
        return rapidity(self.values[:, 0], self.values[:, 1])

    def polar(self):
        return self.minkowski_radius(), self.rapidity()


@dataclass(frozen=True, eq=False)
class CoverPath:
    grid: TimeGrid
    r: np.ndarray
    theta: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.r, dtype=np.float64)
        th = np.asarray(self.theta, dtype=np.float64)
        n = self.grid.N + 1
        if r.shape != (n,) or th.shape != (n,) or not (np.all(np.isfinite(r)) and np.all(np.isfinite(th))):
            raise InvalidPath("covering path needs N+1 finite (r, theta) nodes")
        if np.any(r <= ORIGIN_GUARD * r.max()):
            raise OriginHit("covering path touches the puncture")
        if np.any(np.abs(np.diff(th)) >= MAX_TURN):
            raise StepTooCoarse("lifted angle jumps by pi/2 or more between nodes")
        object.__setattr__(self, "r", _frozen(r))
        object.__setattr__(self, "theta", _frozen(th))

    @property
    def sheets(self) -> np.ndarray:
        return sheet_of(self.theta)

    def planar(self) -> Path2D:
        return Path2D(self.grid, np.column_stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)]))


def cone_path_to_cover(path: ConePath) -> CoverPath:
    r, th = path.polar()
    return CoverPath(path.grid, r, th)


def cover_path_to_cone(path: CoverPath) -> ConePath:
    return ConePath.from_polar(path.grid, path.r, path.theta)


# ---------------------------------------------------------------- Lorentz group


def _boost_xy(gamma: float, xy: np.ndarray) -> np.ndarray:
    # act on light-cone coordinates, which scale by e^{+-gamma}; no cosh/sinh overflow
    xp, xm = xy[..., 0] + xy[..., 1], xy[..., 0] - xy[..., 1]
    xp, xm = xp * np.exp(gamma), xm * np.exp(-gamma)
    return np.stack([0.5 * (xp + xm), 0.5 * (xp - xm)], axis=-1)


def lorentz(gamma: float, p):
    """Boost (x0, x1) -> (x0 cosh g + x1 sinh g, x0 sinh g + x1 cosh g)."""
    if isinstance(p, ConePoint):
        x = _boost_xy(gamma, np.array([p.x0, p.x1]))
        return ConePoint(float(x[0]), float(x[1]))
    if isinstance(p, ConePath):
        return ConePath(p.grid, _boost_xy(gamma, p.values))
    raise TypeError("lorentz acts on ConePoint or ConePath")


# ---------------------------------------------------------------- metric


def _cone_check(x0, x1):
    if not np.all(np.asarray(x0) > np.abs(x1)):
        raise OutsideCone("metric evaluated outside the future cone")


def metric_cartesian(x0, x1, v0, v1):
    _cone_check(x0, x1)
    return v0 * v0 - v1 * v1 + 2 * (x0 * v1 - x1 * v0) ** 2 / minkowski_r2(x0, x1)


def metric_mixed(x0, x1, v0, v1):
    _cone_check(x0, x1)
    d = minkowski_r2(x0, x1)
    return ((x0 * x0 + x1 * x1) * (v0 * v0 + v1 * v1) - 4 * x0 * x1 * v0 * v1) / d


def metric_lightcone(x0, x1, v0, v1):
    """x+ x- ((dx+/x+)^2 + (dx-/x-)^2) with x+- = (x0 +- x1)/sqrt 2."""
    _cone_check(x0, x1)
    xp, xm = (x0 + x1) / SQRT2, (x0 - x1) / SQRT2
    vp, vm = (v0 + v1) / SQRT2, (v0 - v1) / SQRT2
    return xm / xp * vp * vp + xp / xm * vm * vm


def metric_loglight(x0, x1, v0, v1):
    """exp(l+ + l-) (dl+^2 + dl-^2) with l+- = log x+-."""
    _cone_check(x0, x1)
    lp, lm = np.log((x0 + x1) / SQRT2), np.log((x0 - x1) / SQRT2)
    dlp, dlm = (v0 + v1) / (x0 + x1), (v0 - v1) / (x0 - x1)
    return np.exp(lp + lm) * (dlp * dlp + dlm * dlm)


METRIC_FORMS = {
    "cartesian": metric_cartesian,
    "mixed": metric_mixed,
    "lightcone": metric_lightcone,
    "loglight": metric_loglight,
}


def metric_quadratic(p: ConePoint, v, form: str = "cartesian") -> float:
    if form not in METRIC_FORMS:
        raise ValueError(f"unknown metric form {form!r}")
    return float(METRIC_FORMS[form](p.x0, p.x1, float(v[0]), float(v[1])))


# ---------------------------------------------------------------- actions


def cone_action(path: ConePath) -> float:
    """Sum over cells of the metric at the cell midpoint applied to the increment, over dt."""
    x = path.values
    m = 0.5 * (x[1:] + x[:-1])
    d = np.diff(x, axis=0)
    q = metric_cartesian(m[:, 0], m[:, 1], d[:, 0], d[:, 1])
    return float(np.sum(q) / path.grid.dt)


def cone_action_batch(x: np.ndarray, dt: float) -> np.ndarray:
    """:func:`cone_action` for an array of paths of shape (M, N+1, 2)."""
    m = 0.5 * (x[:, 1:] + x[:, :-1])
    d = np.diff(x, axis=1)
    return np.sum(metric_cartesian(m[..., 0], m[..., 1], d[..., 0], d[..., 1]), axis=1) / dt


def polar_action(r, theta, dt: float) -> float:
    """Flat polar action sum (dr^2 + rbar^2 dtheta^2)/dt of a covering path."""
    r, theta = np.asarray(r), np.asarray(theta)
    rm = 0.5 * (r[1:] + r[:-1])
    return float(np.sum(np.diff(r) ** 2 + rm * rm * np.diff(theta) ** 2) / dt)


def decomposition_action(coords) -> float:
    """Action written in decomposition coordinates (rho, psi, phi).

    int [rho^2/4 (q')^2/q^3 + rho^2 q psi'(phi^-1)^2] dtau with q = (phi^-1)'.
    The first term uses centred differences of the tabulated rate q; the
    second is evaluated cell by cell on the knots of psi, where q dtau is the
    increment of phi^-1.
    """
    g = coords.phi.grid
    q = coords.phi.inv_rate_nodes()
    s = coords.phi.inv_values
    rho2 = coords.rho**2
    qm = 0.5 * (q[1:] + q[:-1])
    kinetic = rho2 / 4 * np.sum((np.diff(q) / g.dt) ** 2 / qm**3) * g.dt
    angular = rho2 * np.sum(np.diff(coords.psi_knots) ** 2 / np.diff(s))
    return float(kinetic + angular)


def appendix_b_check(path: ConePath) -> tuple[float, float, float]:
    """(decomposition-coordinate action, Cartesian cone action, relative difference)."""
    from .orbit_decomp import decompose_cone

    rhs = cone_action(path)
    lhs = decomposition_action(decompose_cone(path))
    scale = max(abs(lhs), abs(rhs))
    rel = 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
    return lhs, rhs, rel


from .geodesics import geodesic_distance, mesh_distance_oracle  # noqa: E402  (re-export)
