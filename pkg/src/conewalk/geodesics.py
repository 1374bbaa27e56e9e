"""Shortest paths on the infinite-sheeted covering of the punctured plane.

Two points whose lifted angles differ by at most pi see each other along a
straight chord on one sheet. Otherwise every connecting curve must wind
around the puncture, and the infimum of lengths, r_A + r_B, is approached by
the broken line through the origin (which is not itself a point of the
covering).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gcd

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from .errors import MeshTooCoarse

ORIGIN = "O"


@dataclass(frozen=True)
class Geodesic:
    distance: float
    case: int
    polyline: tuple  # CoverPoint entries, with ORIGIN marking passage through the puncture

    def to_json(self) -> dict:
        pts = []
        for p in self.polyline:
            if p is ORIGIN:
                pts.append({"origin": True, "r": 0.0, "theta": None, "sheet": None})
            else:
                pts.append({"r": p.r, "theta": p.theta, "sheet": p.sheet})
        return {"distance": self.distance, "case": self.case, "polyline": pts}


def geodesic_case(dtheta: float) -> int:
    a = abs(dtheta)
    if a <= np.pi:
        return 1
    return 2 if a < 2 * np.pi else 3


def geodesic_distance(A, B) -> Geodesic:
    dth = B.theta - A.theta
    case = geodesic_case(dth)
    if case == 1:
        d2 = A.r**2 + B.r**2 - 2 * A.r * B.r * np.cos(dth)
        return Geodesic(float(np.sqrt(max(d2, 0.0))), 1, (A, B))
    return Geodesic(float(A.r + B.r), case, (A, ORIGIN, B))


def chord_points(A, B, n: int = 50) -> list[tuple[float, float]]:
    """(r, theta) samples along a case-1 chord, with theta lifted continuously from A."""
    dth = B.theta - A.theta
    t = np.linspace(0.0, 1.0, n)
    x = (1 - t) * A.r + t * B.r * np.cos(dth)
    y = t * B.r * np.sin(dth)
    return list(zip(np.hypot(x, y), A.theta + np.arctan2(y, x)))


def _stencil(K: int):
    out = []
    for di in range(0, K + 1):
        for dj in range(-K, K + 1):
            if (di, dj) == (0, 0) or gcd(di, abs(dj)) != 1:
                continue
            if di == 0 and dj < 0:
                continue
            out.append((di, dj))
    return out


def mesh_distance_oracle(A, B, resolution: int = 160, stencil: int = 20,
                         r_max: float | None = None, theta_range: tuple | None = None) -> float:
    """Graph shortest-path distance over a log-polar mesh of the covering.

    Nodes sit at (r_i, theta_j) with log-spaced radii and square cells in
    (log r, theta), about ``resolution**2`` of them; A and B are mesh nodes.
    Edges join nodes whose index offsets are coprime and at most ``stencil``
    apart and are weighted by the true straight-segment length, so every
    graph path is a real curve and the result bounds the geodesic distance
    from above. An extra node stands for the puncture and is joined to the
    innermost ring by edges of length r_min.
    """
    if resolution < 3:
        raise MeshTooCoarse("mesh needs at least 3 nodes per direction")
    R = max(A.r, B.r)
    rs = min(A.r, B.r)
    if r_max is not None and R > r_max:
        raise MeshTooCoarse(f"point radius {R} exceeds mesh radius {r_max}")
    lo, hi = sorted((A.theta, B.theta))
    if theta_range is not None and (lo < theta_range[0] or hi > theta_range[1]):
        raise MeshTooCoarse("point angle outside the mesh angular range")
    if A.r == B.r and A.theta == B.theta:
        return 0.0

    # innermost ring: well inside the closest approach of a chord, never below 1e-3 R
    span_t = hi - lo
    if span_t < np.pi:
        d = np.sqrt(max(A.r**2 + B.r**2 - 2 * A.r * B.r * np.cos(span_t), 0.0))
        reach = rs if span_t < 0.5 * np.pi else A.r * B.r * np.sin(span_t) / d
        r_min = max(1e-3 * R, 0.5 * min(reach, rs))
    else:
        r_min = 0.5 * rs
    width = span_t if span_t > 0 else 0.2
    h = np.sqrt(np.log(R / r_min) * width) / resolution
    nt = max(3, int(round(width / h)) + 1)
    if span_t > 0:
        th = np.linspace(lo, hi, nt)
    else:
        nt += (nt + 1) % 2
        th = np.linspace(lo - 0.1, lo + 0.1, nt)
    h = th[1] - th[0]
    span_r = np.log(R / rs)
    du = span_r / max(1, int(round(span_r / h))) if span_r > 0 else h
    n_below = int(np.ceil(np.log(R / r_min) / du))
    r = np.exp(np.log(R) - du * np.arange(n_below, -1, -1))
    nr = len(r)

    rows, cols, w = [], [], []
    idx = np.arange(nr * nt).reshape(nr, nt)
    for di, dj in _stencil(stencil):
        i0, i1 = max(0, -di), nr - max(0, di)
        j0, j1 = max(0, -dj), nt - max(0, dj)
        if i1 <= i0 or j1 <= j0:
            continue
        a = idx[i0:i1, j0:j1]
        b = idx[i0 + di:i1 + di, j0 + dj:j1 + dj]
        ra = r[i0:i1, None]
        rb = r[i0 + di:i1 + di, None]
        dth = th[j0 + dj:j1 + dj] - th[j0:j1]
        d = np.sqrt(np.maximum(ra * ra + rb * rb - 2 * ra * rb * np.cos(dth)[None, :], 0.0))
        rows.append(a.ravel())
        cols.append(b.ravel())
        w.append(np.broadcast_to(d, a.shape).ravel())
    origin = nr * nt
    rows.append(np.full(nt, origin))
    cols.append(idx[0])
    w.append(np.full(nt, r[0]))
    graph = coo_matrix((np.concatenate(w), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(origin + 1, origin + 1)).tocsr()

    def node(p):
        i = int(np.argmin(np.abs(r - p.r)))
        j = int(np.argmin(np.abs(th - p.theta)))
        if abs(r[i] - p.r) > 1e-9 * p.r or abs(th[j] - p.theta) > 1e-9 * max(1.0, abs(p.theta)):
            raise MeshTooCoarse("point does not fall on a mesh node")
        return idx[i, j]

    a, b = node(A), node(B)
    dist = dijkstra(graph, directed=False, indices=a, min_only=True)
    return float(dist[b])
