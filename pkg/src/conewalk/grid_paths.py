"""Uniform time grids, discretized paths and the small numerical kernels
(quadrature, increment action, angle unwinding) everything else builds on.

Paths are node values on a uniform grid, interpreted piecewise-linearly.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BadSplitPoint, InvalidPath, NonPositivePath, OriginHit, StepTooCoarse

# relative origin guard: nodes closer than this fraction of the largest radius are rejected
ORIGIN_GUARD = 1e-8
# largest admissible turning angle between consecutive nodes
MAX_TURN = np.pi / 2


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TimeGrid:
    """Nodes tau_i = t0 + i*T/N for i = 0..N."""

    t0: float
    T: float
    N: int

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise ValueError(f"grid needs N >= 2 cells, got {self.N}")
        if not (np.isfinite(self.T) and self.T > 0):
            raise ValueError(f"grid duration must be positive, got {self.T}")
        if not np.isfinite(self.t0):
            raise ValueError("grid start must be finite")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "t0", float(self.t0))

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def t1(self) -> float:
        return self.t0 + self.T

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.N + 1)

    def node_index(self, t: float) -> int:
        """Index of the node at time ``t``; raises BadSplitPoint when ``t`` is off-grid."""
        x = (t - self.t0) / self.dt
        i = int(round(x))
        if abs(x - i) > 1e-9 or not 0 <= i <= self.N:
            raise BadSplitPoint(f"t={t} is not a node of {self}")
        return i

    def sub(self, i: int, j: int) -> "TimeGrid":
        """Grid spanning nodes i..j of this grid."""
        return TimeGrid(self.t0 + i * self.dt, (j - i) * self.dt, j - i)

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.T, self.N * factor)


@dataclass(frozen=True, eq=False)
class Path1D:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.N + 1,):
            raise InvalidPath(f"expected {self.grid.N + 1} node values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidPath("path contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    def __call__(self, t):
        """Piecewise-linear evaluation at arbitrary times inside the grid."""
        return np.interp(t, self.grid.nodes, self.values)

    def shifted(self, c: float) -> "Path1D":
        return type(self)(self.grid, self.values + c)


class PositivePath(Path1D):
    def __post_init__(self):
        super().__post_init__()
        if not np.all(self.values > 0):
            raise NonPositivePath("path must be strictly positive at every node")


@dataclass(frozen=True, eq=False)
class Path2D:
    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.grid.N + 1, 2):
            raise InvalidPath(f"expected shape {(self.grid.N + 1, 2)}, got {v.shape}")
        if not np.all(np.isfinite(v)):
            raise InvalidPath("path contains non-finite values")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def x0(self) -> np.ndarray:
        return self.values[:, 0]

    @property
    def x1(self) -> np.ndarray:
        return self.values[:, 1]

    def radius(self) -> np.ndarray:
        return np.hypot(self.values[:, 0], self.values[:, 1])

    def rotated(self, gamma: float) -> "Path2D":
        c, s = np.cos(gamma), np.sin(gamma)
        x, y = self.values[:, 0], self.values[:, 1]
        return Path2D(self.grid, np.column_stack([x * c - y * s, x * s + y * c]))


def trapezoid(f_values, grid: TimeGrid) -> float:
    f = np.asarray(f_values, dtype=np.float64)
    if f.shape != (grid.N + 1,) or not np.all(np.isfinite(f)):
        raise InvalidPath("integrand must hold N+1 finite node values")
    return grid.dt * (0.5 * f[0] + f[1:-1].sum() + 0.5 * f[-1])


def cumulative_trapezoid(f_values, grid: TimeGrid) -> np.ndarray:
    """Running trapezoid integral from t0 to every node (first entry 0)."""
    f = np.asarray(f_values, dtype=np.float64)
    out = np.empty_like(f)
    out[0] = 0.0
    np.cumsum(0.5 * grid.dt * (f[1:] + f[:-1]), out=out[1:])
    return out


def discrete_action(path: Path1D) -> float:
    """Sum of squared increments over dt: the exact Gaussian exponent of the grid marginal."""
    return float(np.sum(np.diff(path.values) ** 2) / path.grid.dt)


def angle_steps(xy: np.ndarray) -> np.ndarray:
    """Signed angle swept by each straight segment of a planar polyline.

    Works on arrays of shape (..., n, 2) and returns shape (..., n-1). The value
    is exact for the segment as long as it does not pass through the origin.
    """
    a, b = xy[..., :-1, :], xy[..., 1:, :]
    cross = a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]
    dot = a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1]
    return np.arctan2(cross, dot)


def check_origin(xy: np.ndarray) -> np.ndarray:
    r = np.hypot(xy[..., 0], xy[..., 1])
    rmax = r.max() if r.size else 0.0
    if rmax == 0.0 or np.any(r < ORIGIN_GUARD * rmax):
        raise OriginHit("path passes through the origin guard")
    return r


def principal_angle(y, x) -> float:
    """Polar angle in [0, 2pi)."""
    a = float(np.mod(np.arctan2(y, x), 2 * np.pi))
    return 0.0 if a >= 2 * np.pi else a


def unwind_angle(path: Path2D) -> Path1D:
    """Continuous polar angle of a planar path, starting from the principal angle in [0, 2pi)."""
    xy = path.values
    check_origin(xy)
    steps = angle_steps(xy)
    bad = np.abs(steps) >= MAX_TURN
    if np.any(bad):
        i = int(np.argmax(bad))
        raise StepTooCoarse(f"turn of {steps[i]:.3f} rad between nodes {i} and {i + 1}")
    theta0 = principal_angle(xy[0, 1], xy[0, 0])
    theta = np.empty(len(xy))
    theta[0] = theta0
    theta[1:] = theta0 + np.cumsum(steps)
    return Path1D(path.grid, theta)
