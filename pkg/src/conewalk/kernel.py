"""Transition kernel between two points of the covering, restricted to a winding class.

Three independent evaluations are provided:

* :func:`kernel_mc`: planar Gaussian bridge density times the Monte Carlo
  probability that a bridge from A to B lands in the requested winding class;
* :func:`kernel_pde_oracle`: finite differences for the heat equation
  dK/dt = (sigma^2/2) (K_rr + K_r/r + K_thth/r^2) on a truncated strip of the
  covering, started from a discrete unit mass at A;
* :func:`kernel_bessel`: the closed-form kernel of the covering written as an
  integral of modified Bessel functions over a continuous order.

All three use diffusivity sigma^2/2 and unit initial mass.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import CubicSpline
from scipy.linalg import eigh_tridiagonal
from scipy.special import ive

from .errors import StepTooCoarse, UnstableStep
from .grid_paths import MAX_TURN, TimeGrid, angle_steps
from .report import McReport
from .wiener import TAG_REFINE, WienerParams, bridge_components, normals

TWO_PI = 2 * np.pi
# class label of bridges whose winding cannot be resolved (they pass through the puncture to rounding)
UNRESOLVED = np.iinfo(np.int64).min
# largest tolerated fraction of unresolved bridges
MAX_UNRESOLVED = 0.01


@dataclass(frozen=True)
class KernelQuery:
    """Endpoints on the covering, noise scale, duration and winding class k.

    A path from A belongs to class k when its lifted end angle is
    theta_B + 2 pi k, i.e. it ends at the covering point (r_B, theta_B + 2 pi k).
    """

    A: object
    B: object
    sigma: float
    T: float
    sheet_delta: int = 0

    def __post_init__(self):
        if not (self.A.r > 0 and self.B.r > 0):
            raise ValueError("kernel endpoints need positive radius")
        if not (self.sigma > 0 and self.T > 0):
            raise ValueError("sigma and T must be positive")

    def manifest(self) -> dict:
        return {"rA": self.A.r, "thetaA": self.A.theta, "rB": self.B.r, "thetaB": self.B.theta,
                "sigma": self.sigma, "T": self.T, "k": self.sheet_delta}


def planar_density(query: KernelQuery) -> float:
    a, b = query.A.planar, query.B.planar
    v = query.sigma**2 * query.T
    return float(np.exp(-np.sum((a - b) ** 2) / (2 * v)) / (2 * np.pi * v))


# ---------------------------------------------------------------- Monte Carlo


def _refined_turn(a, b, h, sigma, z, depth=0):
    """Angle swept by a bridge segment, subdividing at Gaussian midpoints until each piece turns < pi/2."""
    turn = float(angle_steps(np.array([a, b]))[0])
    if abs(turn) < MAX_TURN:
        return turn
    if depth > 40:
        raise StepTooCoarse("bridge refinement did not resolve a step near the origin")
    mid = 0.5 * (a + b) + sigma * np.sqrt(h / 4) * next(z)
    return _refined_turn(a, mid, h / 2, sigma, z, depth + 1) + _refined_turn(mid, b, h / 2, sigma, z, depth + 1)


def _normal_stream(seed, stream, index):
    block = 0
    while True:
        zs = normals(seed, stream, index, 64, tag=TAG_REFINE + 16 * block)
        for i in range(0, 64, 2):
            yield zs[i:i + 2]
        block += 1


def winding_classes(query: KernelQuery, M: int, N: int, seed: int, stream: int = 0, threads: int = 1,
                    chunk: int = 64, first: int = 0):
    """Winding class of each of M bridges, plus the number of refined steps.

    Bridges whose steps stay unresolved after refinement are labelled UNRESOLVED.
    """
    grid = TimeGrid(0.0, query.T, N)
    a, b = query.A.planar, query.B.planar
    params = WienerParams(query.sigma, tuple(a), seed=seed, stream=stream)
    out = np.empty(M, dtype=np.int64)
    refined = 0
    for lo in range(0, M, chunk):
        m = min(chunk, M - lo)
        C = bridge_components(params, grid, b, m, first=first + lo, dim=2, threads=threads)
        x, y = C[:, 0], C[:, 1]
        steps = np.arctan2(x[:, :-1] * y[:, 1:] - y[:, :-1] * x[:, 1:], x[:, :-1] * x[:, 1:] + y[:, :-1] * y[:, 1:])
        bad = np.abs(steps) >= MAX_TURN
        lost = np.zeros(m, dtype=bool)
        for p in np.flatnonzero(bad.any(axis=1)):
            z = _normal_stream(seed, stream, first + lo + int(p))
            try:
                for i in np.flatnonzero(bad[p]):
                    steps[p, i] = _refined_turn(C[p, :, i], C[p, :, i + 1], grid.dt, query.sigma, z)
                    refined += 1
            except StepTooCoarse:
                lost[p] = True
        total = query.A.theta + steps.sum(axis=1) - query.B.theta
        out[lo:lo + m] = np.where(lost, UNRESOLVED, np.round(total / TWO_PI).astype(np.int64))
    return out, refined


def kernel_mc(query: KernelQuery, M: int, N: int = 1024, seed: int = 0, stream: int = 0, threads: int = 1,
              chunk: int = 64) -> McReport:
    """Class-k kernel: planar bridge density times the class frequency among resolved bridges."""
    if M < 1:
        raise ValueError("M must be positive")
    k, refined = winding_classes(query, M, N, seed, stream, threads, chunk)
    lost = int(np.count_nonzero(k == UNRESOLVED))
    if lost > MAX_UNRESOLVED * M:
        raise StepTooCoarse(f"{lost} of {M} bridges pass through the puncture unresolved; refine the grid")
    k = k[k != UNRESOLVED]
    n = len(k)
    counts = {int(c): int(c_n) for c, c_n in zip(*np.unique(k, return_counts=True))}
    p = counts.get(query.sheet_delta, 0) / n
    dens = planar_density(query)
    probs = {c: c_n / n for c, c_n in counts.items()}
    return McReport(
        name="kernel_mc",
        estimate=dens * p,
        std_error=dens * np.sqrt(p * (1 - p) / n),
        n_samples=n,
        n_rejected=lost,
        seed=seed,
        metadata={
            "query": query.manifest(),
            "N": N,
            "planar_density": dens,
            "class_probability": p,
            "class_probabilities": probs,
            "probability_sum": sum(probs.values()),
            "refined_steps": refined,
        },
    )


# ---------------------------------------------------------------- PDE oracle


@dataclass(frozen=True)
class PdeMesh:
    """Strip r in [eps, R], theta in [min - pad, max + pad] with spacings dr, dtheta.

    ``R`` and ``pad`` default to max(r_A, r_B) + 6 sigma sqrt(T) and 3 pi.
    ``inner`` is "reflecting" (zero flux at r = eps) or "absorbing".
    """

    dr: float = 0.01
    dtheta: float = 0.01
    eps: float = 0.005
    R: float | None = None
    pad: float | None = None
    inner: str = "reflecting"


def _strip(query: KernelQuery, mesh: PdeMesh):
    s = query.sigma * np.sqrt(query.T)
    rA, rB = query.A.r, query.B.r
    R = mesh.R if mesh.R is not None else max(rA, rB) + 6 * s
    if R < max(rA, rB) + 3 * s:
        raise ValueError("outer radius must exceed both radii by 3 sigma sqrt(T)")
    # radial nodes aligned with r_A; eps moves up by less than dr
    iA = int(np.floor((rA - mesh.eps) / mesh.dr + 1e-9))
    r0 = rA - iA * mesh.dr
    nr = int(np.ceil((R - r0) / mesh.dr)) + 1
    r = r0 + mesh.dr * np.arange(nr)
    thA = query.A.theta
    thB = query.B.theta + TWO_PI * query.sheet_delta
    pad = mesh.pad if mesh.pad is not None else 3 * np.pi
    lo, hi = min(thA, thB) - pad, max(thA, thB) + pad
    J = int(np.ceil((hi - lo) / mesh.dtheta))
    dth = (hi - lo) / J
    return r, iA, lo, J, dth, thA, thB


def _radial_operator(r, dr, inner):
    """Tridiagonal coefficients (lower, diag, upper) of u_rr + u_r/r on the radial nodes.

    The last node is absorbing (removed). At the first node either the node is
    absorbing too, or a ghost value u_{-1} = u_1 imposes zero flux.
    """
    if inner == "absorbing":
        rr = r[1:-1]
    elif inner == "reflecting":
        rr = r[:-1]
    else:
        raise ValueError("inner boundary must be 'reflecting' or 'absorbing'")
    up = (1 + dr / (2 * rr)) / dr**2
    lo = (1 - dr / (2 * rr)) / dr**2
    if inner == "reflecting":
        up = up.copy()
        up[0] = 2 / dr**2
    return rr, lo, up


def kernel_pde_oracle(query: KernelQuery, mesh: PdeMesh | None = None, method: str = "spectral",
                      dt: float | None = None, max_halvings: int = 20) -> float:
    """K at (r_B, theta_B + 2 pi k) after time T, from unit mass at A.

    ``spectral``: a sine transform in theta diagonalizes the angular
    differences exactly (absorbing angular ends); for every angular mode the
    radial tridiagonal operator is symmetrized and exponentiated through its
    eigen-decomposition, so there is no time-stepping error.
    ``explicit``: forward Euler in time on the same five-point operator.
    """
    mesh = mesh or PdeMesh()
    if method not in ("spectral", "explicit"):
        raise ValueError("method must be 'spectral' or 'explicit'")
    r, iA, lo, J, dth, thA, thB = _strip(query, mesh)
    dr = mesh.dr
    rr, lower, upper = _radial_operator(r, dr, mesh.inner)
    first = 0 if mesh.inner == "reflecting" else 1
    pa = iA - first
    if pa < 0:
        raise ValueError("A lies on the absorbing inner boundary")
    D = 0.5 * query.sigma**2
    jA = (thA - lo) / dth
    if method == "explicit":
        col = _explicit(rr, dr, lower, upper, dth, J, jA, pa, D, query.T, dt, max_halvings, thB, lo)
    else:
        col = _spectral(rr, dr, lower, upper, dth, J, jA, pa, D, query.T, thB, lo)
    # unit mass: node value of the discrete delta is 1 / (r_A dr dtheta)
    col = col / (query.A.r * dr * dth)
    return float(CubicSpline(rr, col)(query.B.r))


def _spectral(rr, dr, lower, upper, dth, J, jA, pa, D, T, thB, lo):
    n = len(rr)
    m = np.arange(1, J)
    lam = (2 - 2 * np.cos(m * np.pi / J)) / dth**2
    sA = np.sqrt(2 / J) * np.sin(m * np.pi * jA / J)
    sB = np.sqrt(2 / J) * np.sin(m * np.pi * (thB - lo) / dth / J)
    a, b = upper[:-1], lower[1:]
    off = np.sqrt(a * b)
    # similarity transform S = diag(d) L diag(d)^-1 is symmetric
    d = np.ones(n)
    d[1:] = np.cumprod(np.sqrt(a / b))
    out = np.zeros(n)
    for k in range(len(m)):
        diag = -2 / dr**2 - lam[k] / rr**2
        w, V = eigh_tridiagonal(diag, off)
        out += sA[k] * sB[k] * (V @ (np.exp(D * T * w) * V[pa, :]))
    return out * d[pa] / d


def _explicit(rr, dr, lower, upper, dth, J, jA, pa, D, T, dt, max_halvings, thB, lo):
    n = len(rr)
    inv_r2 = 1.0 / rr**2
    bound = 1.0 / (D * np.max(2 / dr**2 + 2 * inv_r2 / dth**2))
    dt = bound * 0.9 if dt is None else float(dt)
    halvings = 0
    while dt > bound:
        if halvings >= max_halvings:
            raise UnstableStep(f"time step {dt:.3g} exceeds the stability bound {bound:.3g}")
        dt /= 2
        halvings += 1
    steps = int(np.ceil(T / dt))
    dt = T / steps
    if dt > bound:
        raise UnstableStep("time step rounding broke the stability bound")
    j = int(round(jA))
    u = np.zeros((n, J + 1))
    u[pa, j] = 1.0
    for _ in range(steps):
        lap = np.zeros_like(u)
        lap[:, 1:-1] = (u[:, 2:] - 2 * u[:, 1:-1] + u[:, :-2]) / dth**2 * inv_r2[:, None]
        lap -= 2 / dr**2 * u
        lap[:-1] += upper[:-1, None] * u[1:]
        lap[1:] += lower[1:, None] * u[:-1]
        u = u + dt * D * lap
        u[:, 0] = u[:, -1] = 0.0
    x = (thB - lo) / dth
    j0 = min(int(np.floor(x)), J - 1)
    f = x - j0
    return (1 - f) * u[:, j0] + f * u[:, j0 + 1]


# ---------------------------------------------------------------- closed form


def kernel_bessel(query: KernelQuery) -> float:
    """Heat kernel of the covering: (1/(2 pi v)) e^{-(rA^2+rB^2)/(2v)} * 2 int_0^inf I_nu(rA rB / v) cos(nu dtheta) dnu.

    Here v = sigma^2 T and dtheta = theta_B + 2 pi k - theta_A. Summing over k recovers
    the planar Gaussian, whose angular Fourier series has the same integrand at integer order.
    """
    v = query.sigma**2 * query.T
    rA, rB = query.A.r, query.B.r
    x = rA * rB / v
    dth = query.B.theta + TWO_PI * query.sheet_delta - query.A.theta
    top = 20.0 + 4.0 * x
    val, _ = quad(lambda nu: ive(nu, x) * np.cos(nu * dth), 0.0, top, limit=1000)
    return float(np.exp(-((rA - rB) ** 2) / (2 * v)) / (2 * np.pi * v) * 2 * val)
