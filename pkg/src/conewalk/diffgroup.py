"""Orientation-preserving diffeomorphisms of [t0, t0+T] that fix both endpoints.

A :class:`Diffeo` carries node tables for phi and its inverse and, when
available, an analytic family supplying phi and its first three derivatives.
Derivatives come from the family in ``"analytic"`` mode and from second-order
finite differences of the node table in ``"fd"`` mode.

The action on paths is (phi xi)(tau) = xi(phi^-1(tau)) / sqrt(d/dtau phi^-1(tau)).
For the finite-dimensional density checks the action is taken as a map on
node values: the value xi_j at tau_j is sent to xi_j * sqrt(phi'(tau_j)) at
the image time phi(tau_j). That map is diagonal, so its Jacobian is explicit.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import DerivativeUnavailable, InvalidPath, NonMonotone
from .grid_paths import MAX_TURN, Path1D, Path2D, TimeGrid, angle_steps, check_origin, principal_angle, trapezoid
from .wiener import log_density_nodes

# smallest admissible derivative of phi (or of phi^-1 when it is used as a divisor)
MIN_RATE = 1e-8
_ENDPOINT_TOL = 1e-12


# ---------------------------------------------------------------- families


@dataclass(frozen=True)
class Family:
    """Closed-form diffeomorphism with derivatives up to third order.

    ``finv`` is optional; without it the inverse is found by Newton's method.
    """

    name: str
    params: dict
    f: Callable
    df: Callable
    d2f: Callable
    d3f: Callable
    finv: Callable | None = None
    inverse_family: Callable | None = field(default=None, repr=False)

    def inv(self, t, t0: float, t1: float, guess=None):
        t = np.asarray(t, dtype=np.float64)
        if self.finv is not None:
            return self.finv(t)
        x = np.array(t if guess is None else guess, dtype=np.float64)
        for _ in range(60):
            d = self.df(x)
            step = np.where(d > 0, (self.f(x) - t) / np.where(d > 0, d, 1.0), 0.0)
            x = np.clip(x - step, t0, t1)
            if np.max(np.abs(step), initial=0.0) < 1e-15 * max(1.0, abs(t1)):
                break
        return x

    def inverted(self) -> "Family | None":
        return self.inverse_family() if self.inverse_family is not None else None


def exponential_family(a: float, t0: float = 0.0, T: float = 1.0) -> Family:
    """phi(tau) = t0 + T (e^{a u} - 1)/(e^a - 1) with u = (tau - t0)/T; Schwarzian -a^2/(2 T^2)."""
    a = float(a)
    if a == 0.0:
        return affine_identity(t0, T)
    em1 = np.expm1(a)
    k = a / T

    def f(t):
        return t0 + T * np.expm1(a * (np.asarray(t) - t0) / T) / em1

    def df(t):
        return a * np.exp(a * (np.asarray(t) - t0) / T) / em1

    def finv(s):
        return t0 + T * np.log1p((np.asarray(s) - t0) / T * em1) / a

    return Family(
        "exponential", {"a": a, "t0": t0, "T": T}, f, df,
        lambda t: k * df(t), lambda t: k * k * df(t), finv,
        inverse_family=lambda: log_family(a, t0, T),
    )


def log_family(a: float, t0: float = 0.0, T: float = 1.0) -> Family:
    """Inverse of :func:`exponential_family`."""
    em1 = np.expm1(a)

    def w(t):
        return 1.0 + (np.asarray(t) - t0) / T * em1

    def f(t):
        return t0 + T * np.log(w(t)) / a

    def df(t):
        return em1 / (a * w(t))

    def d2f(t):
        return -(em1**2) / (a * T * w(t) ** 2)

    def d3f(t):
        return 2 * em1**3 / (a * T**2 * w(t) ** 3)

    def finv(s):
        return t0 + T * np.expm1(a * (np.asarray(s) - t0) / T) / em1

    return Family("log", {"a": a, "t0": t0, "T": T}, f, df, d2f, d3f, finv,
                  inverse_family=lambda: exponential_family(a, t0, T))


def power_family(p: float, t0: float = 0.0, T: float = 1.0) -> Family:
    """phi(tau) = t0 + T u^p. Degenerate at t0 unless p == 1."""
    p = float(p)
    if p <= 0:
        raise ValueError("power must be positive")

    def u(t):
        return (np.asarray(t, dtype=np.float64) - t0) / T

    def upow(t, q):
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.power(u(t), q)

    return Family(
        "power", {"p": p, "t0": t0, "T": T},
        lambda t: t0 + T * upow(t, p),
        lambda t: p * upow(t, p - 1),
        lambda t: p * (p - 1) * upow(t, p - 2) / T,
        lambda t: p * (p - 1) * (p - 2) * upow(t, p - 3) / T**2,
        lambda s: t0 + T * np.power((np.asarray(s) - t0) / T, 1.0 / p),
        inverse_family=lambda: power_family(1.0 / p, t0, T),
    )


def sine_family(eps: float, k: int = 1, t0: float = 0.0, T: float = 1.0) -> Family:
    """phi(tau) = tau + eps T sin(k pi u)/(k pi); phi'' vanishes at both endpoints."""
    if not abs(eps) < 1:
        raise ValueError("|eps| must be below 1 for monotonicity")
    w = k * np.pi / T

    def ph(t):
        return w * (np.asarray(t) - t0)

    return Family(
        "sine", {"eps": eps, "k": k, "t0": t0, "T": T},
        lambda t: np.asarray(t) + eps * np.sin(ph(t)) / w,
        lambda t: 1.0 + eps * np.cos(ph(t)),
        lambda t: -eps * w * np.sin(ph(t)),
        lambda t: -eps * w * w * np.cos(ph(t)),
    )


def affine_identity(t0: float = 0.0, T: float = 1.0) -> Family:
    def one(t):
        return np.ones_like(np.asarray(t, dtype=np.float64))

    def zero(t):
        return np.zeros_like(np.asarray(t, dtype=np.float64))

    return Family("identity", {"t0": t0, "T": T}, lambda t: np.asarray(t, dtype=np.float64), one, zero, zero,
                  lambda s: np.asarray(s, dtype=np.float64), inverse_family=lambda: affine_identity(t0, T))


def composed_family(outer: Family, inner: Family, t0: float, T: float) -> Family:
    """Chain-rule derivatives of outer(inner(tau))."""

    def f(t):
        return outer.f(inner.f(t))

    def df(t):
        return outer.df(inner.f(t)) * inner.df(t)

    def d2f(t):
        x, g1 = inner.f(t), inner.df(t)
        return outer.d2f(x) * g1**2 + outer.df(x) * inner.d2f(t)

    def d3f(t):
        x, g1, g2 = inner.f(t), inner.df(t), inner.d2f(t)
        return outer.d3f(x) * g1**3 + 3 * outer.d2f(x) * g1 * g2 + outer.df(x) * inner.d3f(t)

    finv = None
    if outer.finv is not None and inner.finv is not None:
        def finv(s):
            return inner.finv(outer.finv(s))

    return Family("composed", {"outer": outer.name, "inner": inner.name, **{
        f"outer.{k}": v for k, v in outer.params.items()}, **{f"inner.{k}": v for k, v in inner.params.items()}},
        f, df, d2f, d3f, finv)


FAMILIES = {
    "exponential": lambda p, g: exponential_family(p.get("a", 1.0), g.t0, g.T),
    "power": lambda p, g: power_family(p.get("p", 2.0), g.t0, g.T),
    "sine": lambda p, g: sine_family(p.get("eps", 0.3), int(p.get("k", 1)), g.t0, g.T),
    "identity": lambda p, g: affine_identity(g.t0, g.T),
}


# ---------------------------------------------------------------- Diffeo


def _fd_derivatives(v: np.ndarray, h: float):
    d1 = np.gradient(v, h, edge_order=2)
    d2 = np.gradient(d1, h, edge_order=2)
    d3 = np.gradient(d2, h, edge_order=2)
    return d1, d2, d3


def _check_table(grid: TimeGrid, v: np.ndarray, what: str) -> np.ndarray:
    v = np.array(v, dtype=np.float64)
    if v.shape != (grid.N + 1,) or not np.all(np.isfinite(v)):
        raise InvalidPath(f"{what} must hold N+1 finite node values")
    tol = _ENDPOINT_TOL * max(1.0, abs(grid.t0), abs(grid.t1))
    if abs(v[0] - grid.t0) > tol or abs(v[-1] - grid.t1) > tol:
        raise NonMonotone(f"{what} must fix both endpoints")
    v[0], v[-1] = grid.t0, grid.t1
    if not np.all(np.diff(v) > 0):
        i = int(np.argmin(np.diff(v)))
        raise NonMonotone(f"{what} is not strictly increasing near node {i}")
    v.flags.writeable = False
    return v


@dataclass(frozen=True, eq=False)
class Diffeo:
    """Node tables of phi and phi^-1 on a common grid, plus optional derivative data.

    ``rate`` and ``inv_rate`` are optional tables of phi' and (phi^-1)' at the
    nodes; when present they take precedence over finite differences.
    """

    grid: TimeGrid
    values: np.ndarray
    inv_values: np.ndarray
    family: Family | None = None
    mode: str = "analytic"
    rate: np.ndarray | None = None
    inv_rate: np.ndarray | None = None

    def __post_init__(self):
        if self.mode not in ("analytic", "fd"):
            raise ValueError("mode must be 'analytic' or 'fd'")
        object.__setattr__(self, "values", _check_table(self.grid, self.values, "phi"))
        object.__setattr__(self, "inv_values", _check_table(self.grid, self.inv_values, "phi^-1"))
        for name in ("rate", "inv_rate"):
            r = getattr(self, name)
            if r is not None:
                r = np.array(r, dtype=np.float64)
                if r.shape != (self.grid.N + 1,):
                    raise InvalidPath(f"{name} must hold N+1 values")
                r.flags.writeable = False
                object.__setattr__(self, name, r)

    # constructors
    @classmethod
    def from_values(cls, grid: TimeGrid, values, rate=None) -> "Diffeo":
        """Tabulated phi; the inverse is obtained by piecewise-linear inversion."""
        v = _check_table(grid, values, "phi")
        nodes = grid.nodes
        inv = np.interp(nodes, v, nodes)
        inv_rate = None
        if rate is not None:
            inv_rate = 1.0 / np.interp(inv, nodes, np.asarray(rate, dtype=np.float64))
        return cls(grid, v, inv, rate=rate, inv_rate=inv_rate)

    @classmethod
    def from_inverse(cls, grid: TimeGrid, inv_values, inv_rate=None) -> "Diffeo":
        """Tabulated phi^-1 (the form produced by orbit decomposition)."""
        return cls.from_values(grid, inv_values, rate=inv_rate).inverse()

    @classmethod
    def from_family(cls, grid: TimeGrid, family: Family, mode: str = "analytic") -> "Diffeo":
        nodes = grid.nodes
        values = family.f(nodes)
        guess = np.interp(nodes, values, nodes)
        inv = family.inv(nodes, grid.t0, grid.t1, guess=guess)
        return cls(grid, values, inv, family=family, mode=mode)

    @classmethod
    def identity(cls, grid: TimeGrid) -> "Diffeo":
        return cls.from_family(grid, affine_identity(grid.t0, grid.T))

    @classmethod
    def named(cls, grid: TimeGrid, name: str, params: dict | None = None, mode: str = "analytic") -> "Diffeo":
        if name not in FAMILIES:
            raise ValueError(f"unknown diffeomorphism family {name!r}; known: {sorted(FAMILIES)}")
        return cls.from_family(grid, FAMILIES[name](params or {}, grid), mode=mode)

    # evaluation
    @property
    def analytic(self) -> bool:
        return self.family is not None and self.mode == "analytic"

    def __call__(self, t):
        if self.analytic:
            return self.family.f(t)
        return np.interp(t, self.grid.nodes, self.values)

    def inv(self, t):
        if self.analytic:
            t = np.asarray(t, dtype=np.float64)
            return self.family.inv(t, self.grid.t0, self.grid.t1, guess=np.interp(t, self.grid.nodes, self.inv_values))
        return np.interp(t, self.grid.nodes, self.inv_values)

    def derivatives(self, check: bool = True):
        """phi', phi'', phi''' at the nodes."""
        if self.analytic:
            x = self.grid.nodes
            with np.errstate(divide="ignore", invalid="ignore"):
                d = self.family.df(x), self.family.d2f(x), self.family.d3f(x)
        else:
            d = _fd_derivatives(self.values, self.grid.dt)
            if self.rate is not None:
                d1 = self.rate
                d2 = np.gradient(d1, self.grid.dt, edge_order=2)
                d = (d1, d2, np.gradient(d2, self.grid.dt, edge_order=2))
        if check:
            bad = ~(d[0] >= MIN_RATE)
            if np.any(bad):
                i = int(np.argmax(bad))
                raise NonMonotone(f"phi' = {d[0][i]:.3g} below {MIN_RATE} at node {i}")
            if not all(np.all(np.isfinite(x)) for x in d):
                raise DerivativeUnavailable("derivative table is not finite")
        return d

    def inv_rate_nodes(self) -> np.ndarray:
        """(phi^-1)' at the nodes; may contain 0 or inf where phi is degenerate."""
        if self.inv_rate is not None:
            return self.inv_rate
        if self.analytic:
            with np.errstate(divide="ignore"):
                return 1.0 / self.family.df(self.inv_values)
        return np.gradient(self.inv_values, self.grid.dt, edge_order=2)

    def rate_nodes(self) -> np.ndarray:
        return self.derivatives(check=False)[0]

    # group operations
    def inverse(self) -> "Diffeo":
        fam = self.family.inverted() if self.family is not None else None
        return Diffeo(self.grid, self.inv_values, self.values, family=fam,
                      mode=self.mode if fam is not None else "analytic",
                      rate=self.inv_rate, inv_rate=self.rate)

    def compose(self, inner: "Diffeo") -> "Diffeo":
        """self o inner."""
        if inner.grid != self.grid:
            raise ValueError("diffeomorphisms live on different grids")
        if self.family is not None and inner.family is not None:
            fam = composed_family(self.family, inner.family, self.grid.t0, self.grid.T)
            return Diffeo.from_family(self.grid, fam, mode=self.mode)
        return Diffeo(self.grid, self(inner.values), inner.inv(self.inv_values))

    def schwarzian_nodes(self) -> np.ndarray:
        """phi'''/phi' - 1.5 (phi''/phi')^2 at every node (one-sided stencils at the ends in fd mode)."""
        d1, d2, d3 = self.derivatives()
        return d3 / d1 - 1.5 * (d2 / d1) ** 2

    def schwarzian(self, t: float) -> float:
        i = self.grid.node_index(t)
        if not self.analytic and i in (0, self.grid.N):
            raise DerivativeUnavailable("finite-difference Schwarzian is lower order at boundary nodes; "
                                        "use schwarzian_nodes() to accept it")
        return float(self.schwarzian_nodes()[i])

    def manifest(self) -> dict:
        return {
            "family": self.family.name if self.family is not None else None,
            "params": dict(self.family.params) if self.family is not None else {},
            "mode": self.mode,
        }


# ---------------------------------------------------------------- action


def _rescale(phi: Diffeo, guard_endpoints: bool) -> np.ndarray:
    """1/sqrt((phi^-1)') at nodes, with optional copy-from-neighbour at degenerate endpoints."""
    q = np.asarray(phi.inv_rate_nodes(), dtype=np.float64)
    ok = np.isfinite(q) & (q >= MIN_RATE)
    if not np.all(ok):
        bad = np.flatnonzero(~ok)
        if guard_endpoints and set(bad.tolist()) <= {0, phi.grid.N} and phi.grid.N >= 2:
            q = q.copy()
            for i in bad:
                q[i] = q[1] if i == 0 else q[-2]
        else:
            raise NonMonotone(f"(phi^-1)' degenerate at nodes {bad[:5].tolist()}")
    return 1.0 / np.sqrt(q)


def act_1d(phi: Diffeo, path: Path1D, guard_endpoints: bool = False) -> Path1D:
    """Node values of (phi xi)(tau) = xi(phi^-1(tau)) / sqrt((phi^-1)'(tau))."""
    if path.grid != phi.grid:
        raise ValueError("path and diffeomorphism live on different grids")
    return type(path)(path.grid, path(phi.inv_values) * _rescale(phi, guard_endpoints))


def _polar(xy: np.ndarray):
    r = check_origin(xy)
    steps = angle_steps(xy)
    if np.any(np.abs(steps) >= MAX_TURN):
        from .errors import StepTooCoarse
        raise StepTooCoarse("angle step of pi/2 or more; refine the grid")
    theta = principal_angle(xy[0, 1], xy[0, 0]) + np.concatenate([[0.0], np.cumsum(steps)])
    return r, theta


def act_2d(phi: Diffeo, path: Path2D, guard_endpoints: bool = False) -> Path2D:
    """Radius rescaled and reparametrized, lifted angle reparametrized."""
    if path.grid != phi.grid:
        raise ValueError("path and diffeomorphism live on different grids")
    r, theta = _polar(path.values)
    nodes = path.grid.nodes
    r2 = np.interp(phi.inv_values, nodes, r) * _rescale(phi, guard_endpoints)
    th2 = np.interp(phi.inv_values, nodes, theta)
    return Path2D(path.grid, np.column_stack([r2 * np.cos(th2), r2 * np.sin(th2)]))


def act_cone(phi: Diffeo, path, guard_endpoints: bool = False):
    """Same as :func:`act_2d` with the rapidity in place of the polar angle."""
    from .cone_geometry import ConePath

    if path.grid != phi.grid:
        raise ValueError("path and diffeomorphism live on different grids")
    r, theta = path.polar()
    nodes = path.grid.nodes
    r2 = np.interp(phi.inv_values, nodes, r) * _rescale(phi, guard_endpoints)
    th2 = np.interp(phi.inv_values, nodes, theta)
    return ConePath.from_polar(path.grid, r2, th2)


# ---------------------------------------------------------------- densities


def log_radon_nikodym(phi: Diffeo, path: Path1D, sigma: float = 1.0) -> float:
    """Log of the continuum density factor P_phi(xi).

    log P = 1/4 log(phi'(t0) phi'(t1))
            - 1/(4 sigma^2) [xi(t1)^2 phi''/phi'(t1) - xi(t0)^2 phi''/phi'(t0)]
            + 1/(4 sigma^2) int xi^2 Sch{phi} dtau
    It is the N -> infinity limit of :func:`log_rn_discrete`.
    """
    if path.grid != phi.grid:
        raise ValueError("path and diffeomorphism live on different grids")
    d1, d2, d3 = phi.derivatives()
    sch = d3 / d1 - 1.5 * (d2 / d1) ** 2
    x = path.values
    s2 = float(sigma) ** 2
    bnd = x[-1] ** 2 * d2[-1] / d1[-1] - x[0] ** 2 * d2[0] / d1[0]
    return float(0.25 * np.log(d1[0] * d1[-1]) - 0.25 / s2 * bnd + 0.25 / s2 * trapezoid(x * x * sch, path.grid))


def radon_nikodym(phi: Diffeo, path: Path1D, sigma: float = 1.0) -> float:
    return float(np.exp(log_radon_nikodym(phi, path, sigma)))


def image_knots(phi: Diffeo, values) -> tuple[np.ndarray, np.ndarray]:
    """Discrete action on node values: (phi(tau_j), xi_j sqrt(phi'(tau_j))), batched over leading axes."""
    d1 = phi.derivatives()[0]
    return phi.values, np.asarray(values, dtype=np.float64) * np.sqrt(d1)


def log_rn_discrete(phi: Diffeo, values, sigma: float = 1.0, include_start: bool = True):
    """Finite-dimensional log density ratio of the node map of :func:`image_knots`.

    log p(image) + log|Jacobian| - log p(values), with p the Gaussian increment
    density on the respective node times. With ``include_start`` the left
    endpoint is a free coordinate under flat volume; otherwise it is held
    fixed and its Jacobian factor is dropped. Works on arrays of shape (..., N+1).
    """
    x = np.asarray(values, dtype=np.float64)
    d1 = phi.derivatives()[0]
    tk, y = phi.values, x * np.sqrt(d1)
    s2 = float(sigma) ** 2
    dt, dk = phi.grid.dt, np.diff(tk)
    lp_img = -0.5 / s2 * np.sum(np.diff(y, axis=-1) ** 2 / dk, axis=-1) - 0.5 * np.sum(np.log(2 * np.pi * s2 * dk))
    lp_src = -0.5 / s2 * np.sum(np.diff(x, axis=-1) ** 2, axis=-1) / dt - 0.5 * phi.grid.N * np.log(2 * np.pi * s2 * dt)
    ljac = 0.5 * np.sum(np.log(d1 if include_start else d1[1:]))
    return lp_img + ljac - lp_src


def log_mu_density(phi: Diffeo, sigma: float) -> float:
    """Explicit factors of the quasi-invariant measure density (the Haar factor is excluded)."""
    d1, d2, d3 = phi.derivatives()
    sch = d3 / d1 - 1.5 * (d2 / d1) ** 2
    s2 = float(sigma) ** 2
    return float(-0.5 * np.log(d1[0] * d1[-1]) + (d2[0] / d1[0] - d2[-1] / d1[-1]) / s2 + trapezoid(sch, phi.grid) / s2)


def mu_log_density_ratio(phi_a: Diffeo, phi_b: Diffeo, sigma: float) -> float:
    if phi_a.grid != phi_b.grid:
        raise ValueError("diffeomorphisms live on different grids")
    return log_mu_density(phi_a, sigma) - log_mu_density(phi_b, sigma)


__all__ = [
    "Diffeo", "Family", "exponential_family", "log_family", "power_family", "sine_family", "affine_identity",
    "composed_family", "act_1d", "act_2d", "act_cone", "radon_nikodym", "log_radon_nikodym", "log_rn_discrete",
    "image_knots", "log_mu_density", "mu_log_density_ratio", "log_density_nodes", "MIN_RATE",
]
