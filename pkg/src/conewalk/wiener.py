"""Discretized Wiener paths (free and pinned, 1D and 2D) and their exact
finite-dimensional Gaussian densities.

Random numbers come from a counter-based generator: Philox keyed by
(seed, stream), with the per-path index and a purpose tag written into the
counter words. Any path of any ensemble can therefore be regenerated on its
own, and ensembles split across workers give bitwise identical results.
Uniforms are mapped to Gaussians by the inverse normal CDF.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .grid_paths import Path1D, Path2D, TimeGrid

# counter tags, one per independent use of a path's stream
TAG_INCREMENTS = 0
TAG_START = 1
TAG_REFINE = 2
TAG_SPLIT = 3

_U64 = 2**64
_CHUNK = 512


def _check_u64(name: str, v: int) -> int:
    v = int(v)
    if not 0 <= v < _U64:
        raise ValueError(f"{name} must be a 64-bit unsigned integer, got {v}")
    return v


def normals(seed: int, stream: int, index: int, count: int, tag: int = TAG_INCREMENTS) -> np.ndarray:
    """``count`` standard normals for path ``index`` of stream (seed, stream)."""
    bg = np.random.Philox(
        key=[_check_u64("seed", seed), _check_u64("stream", stream)],
        counter=[0, _check_u64("index", index), int(tag), 0],
    )
    raw = bg.random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u)


def _to_normal(raw: np.ndarray) -> np.ndarray:
    """Top 53 bits of each word -> open-interval uniform -> inverse normal CDF."""
    np.right_shift(raw, np.uint64(11), out=raw)
    u = raw.astype(np.float64)
    u += 0.5
    u *= 2.0**-53
    return ndtri(u, out=u)


def normals_block(seed, stream, first, m, count, tag=TAG_INCREMENTS, threads=1) -> np.ndarray:
    """Rows of :func:`normals` for path indices first..first+m-1 (identical for any thread count)."""
    key = [_check_u64("seed", seed), _check_u64("stream", stream)]
    raw = np.empty((m, count), dtype=np.uint64)
    out = np.empty((m, count))

    def fill(lo, hi):
        for i in range(lo, hi):
            raw[i] = np.random.Philox(key=key, counter=[0, _check_u64("index", first + i), int(tag), 0]).random_raw(count)
        out[lo:hi] = _to_normal(raw[lo:hi])

    step = max(1, min(_CHUNK, -(-m // max(threads, 1))))
    chunks = [(lo, min(lo + step, m)) for lo in range(0, m, step)]
    if threads <= 1 or len(chunks) == 1:
        for lo, hi in chunks:
            fill(lo, hi)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(lambda c: fill(*c), chunks))
    return out


@dataclass(frozen=True)
class WienerParams:
    """Diffusion scale and stream identity of a Wiener sampler.

    ``start_value`` is the left endpoint (scalar, or pair in 2D). When
    ``start_sd`` is positive the left endpoint is instead drawn as
    ``start_value + start_sd * Z`` from the path's own stream.
    """

    sigma: float
    start_value: float | tuple = 0.0
    seed: int = 0
    stream: int = 0
    start_sd: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.start_sd < 0:
            raise ValueError("start_sd must be non-negative")
        _check_u64("seed", self.seed)
        _check_u64("stream", self.stream)

    def manifest(self) -> dict:
        sv = self.start_value
        return {
            "sigma": self.sigma,
            "start_value": list(sv) if isinstance(sv, (tuple, list, np.ndarray)) else sv,
            "start_sd": self.start_sd,
            "seed": self.seed,
            "stream": self.stream,
        }


def _starts(params: WienerParams, first: int, m: int, dim: int) -> np.ndarray:
    x0 = np.broadcast_to(np.asarray(params.start_value, dtype=np.float64), (dim,)).copy()
    out = np.tile(x0, (m, 1))
    if params.start_sd > 0:
        z = normals_block(params.seed, params.stream, first, m, dim, tag=TAG_START)
        out += params.start_sd * z
    return out


def free_components(params: WienerParams, grid: TimeGrid, m: int, first: int = 0, dim: int = 1, threads: int = 1):
    """Free paths in component-major layout, shape (m, dim, N+1)."""
    N = grid.N
    z = normals_block(params.seed, params.stream, first, m, dim * N, threads=threads).reshape(m, dim, N)
    out = np.empty((m, dim, N + 1))
    out[:, :, 0] = _starts(params, first, m, dim)
    z *= params.sigma * np.sqrt(grid.dt)
    np.cumsum(z, axis=2, out=out[:, :, 1:])
    out[:, :, 1:] += out[:, :, :1]
    return out


def free_ensemble(params: WienerParams, grid: TimeGrid, m: int, first: int = 0, dim: int = 1, threads: int = 1):
    """Array of ``m`` free paths, shape (m, N+1) for dim=1 or (m, N+1, 2) for dim=2."""
    out = free_components(params, grid, m, first, dim, threads)
    return out[:, 0, :] if dim == 1 else np.ascontiguousarray(out.transpose(0, 2, 1))


def bridge_components(params: WienerParams, grid: TimeGrid, end, m: int, first: int = 0, dim: int = 1,
                      threads: int = 1):
    """Pinned paths sampled node by node from the exact conditional Gaussians, shape (m, dim, N+1).

    Given the current node, the next one is Gaussian with mean moving toward
    ``end`` by dt/remaining and variance sigma^2 dt (remaining - dt)/remaining.
    Dividing the offset from ``end`` by the remaining time turns that
    recursion into a cumulative sum, which is what is evaluated here.
    """
    N, h = grid.N, grid.dt
    b = np.broadcast_to(np.asarray(end, dtype=np.float64), (dim,))
    rem = grid.T - h * np.arange(N + 1)
    rem[-1] = 0.0
    # standard deviation of step i (node i -> i+1), scaled by 1/rem[i+1]
    c = params.sigma * np.sqrt(h * rem[1:N] / rem[: N - 1]) / rem[1:N]
    z = normals_block(params.seed, params.stream, first, m, dim * (N - 1), threads=threads).reshape(m, dim, N - 1)
    x0 = _starts(params, first, m, dim)
    out = np.empty((m, dim, N + 1))
    z *= c
    np.cumsum(z, axis=2, out=out[:, :, 1:N])
    out[:, :, 0] = (x0 - b) / rem[0]
    out[:, :, 1:N] += out[:, :, :1]
    out[:, :, :N] *= rem[:N]
    out[:, :, :N] += b[None, :, None]
    out[:, :, 0] = x0
    out[:, :, N] = b
    return out


def bridge_ensemble(params: WienerParams, grid: TimeGrid, end, m: int, first: int = 0, dim: int = 1, threads: int = 1):
    """Pinned paths, shape (m, N+1) for dim=1 or (m, N+1, 2) for dim=2; see :func:`bridge_components`."""
    out = bridge_components(params, grid, end, m, first, dim, threads)
    return out[:, 0, :] if dim == 1 else np.ascontiguousarray(out.transpose(0, 2, 1))


def sample_free(params: WienerParams, grid: TimeGrid, index: int = 0) -> Path1D:
    return Path1D(grid, free_ensemble(params, grid, 1, first=index)[0])


def sample_bridge(params: WienerParams, grid: TimeGrid, end_value: float, index: int = 0) -> Path1D:
    return Path1D(grid, bridge_ensemble(params, grid, end_value, 1, first=index)[0])


def sample_free_2d(params: WienerParams, grid: TimeGrid, index: int = 0) -> Path2D:
    return Path2D(grid, free_ensemble(params, grid, 1, first=index, dim=2)[0])


def sample_bridge_2d(params: WienerParams, grid: TimeGrid, end, index: int = 0) -> Path2D:
    return Path2D(grid, bridge_ensemble(params, grid, end, 1, first=index, dim=2)[0])


def log_density_nodes(times, values, sigma: float) -> float:
    """Log density of the increments of a Wiener path observed at arbitrary increasing times."""
    dt = np.diff(np.asarray(times, dtype=np.float64))
    dx = np.diff(np.asarray(values, dtype=np.float64))
    return float(-0.5 / sigma**2 * np.sum(dx * dx / dt) - 0.5 * np.sum(np.log(2 * np.pi * sigma**2 * dt)))


def log_density(path: Path1D, params: WienerParams | float) -> float:
    """Density of the N increments with respect to flat volume; the left endpoint is not included."""
    sigma = params.sigma if isinstance(params, WienerParams) else float(params)
    g = path.grid
    dx = np.diff(path.values)
    return float(-0.5 / sigma**2 * np.sum(dx * dx) / g.dt - 0.5 * g.N * np.log(2 * np.pi * sigma**2 * g.dt))
