"""Incremental 3D convex hull with tolerance-based visibility.

Points are inserted in input order, so the output is deterministic.  A
point within ``eps`` of the current hull counts as inside; this makes
nearly-flat vertices non-extreme, which is what the weak convexity test
needs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class Hull:
    points: np.ndarray
    facets: tuple  # outward-oriented index triples
    normals: np.ndarray  # unit outward normals, one per facet
    offsets: np.ndarray  # normals[k] @ x <= offsets[k] inside
    eps: float

    @property
    def extreme(self) -> tuple:
        return tuple(sorted({i for f in self.facets for i in f}))

    def signed_distance(self, x) -> float:
        """Largest facet-plane excess of ``x``; positive means outside."""
        return float(np.max(self.normals @ np.asarray(x, dtype=float) - self.offsets))


def bbox_diagonal(points) -> float:
    P = np.asarray(points, dtype=float)
    return float(np.linalg.norm(P.max(axis=0) - P.min(axis=0)))


def _plane(P, f):
    a, b, c = P[f[0]], P[f[1]], P[f[2]]
    n = np.cross(b - a, c - a)
    norm = np.linalg.norm(n)
    n = n / norm
    return n, float(n @ a)


def _initial_simplex(P, eps):
    n = len(P)
    i0 = 0
    i1 = next((i for i in range(1, n) if np.linalg.norm(P[i] - P[i0]) > eps), None)
    if i1 is None:
        raise GeometryError("degenerate input: all points coincide")
    d = (P[i1] - P[i0]) / np.linalg.norm(P[i1] - P[i0])
    i2 = None
    for i in range(n):
        v = P[i] - P[i0]
        if np.linalg.norm(v - (v @ d) * d) > eps:
            i2 = i
            break
    if i2 is None:
        raise GeometryError("degenerate input: points are collinear")
    nrm = np.cross(P[i1] - P[i0], P[i2] - P[i0])
    nrm /= np.linalg.norm(nrm)
    i3 = next((i for i in range(n) if abs((P[i] - P[i0]) @ nrm) > eps), None)
    if i3 is None:
        raise GeometryError("degenerate input: points are coplanar")
    return i0, i1, i2, i3


def convex_hull_3d(points, tol: Tolerances = DEFAULT, eps: float | None = None) -> Hull:
    """Convex hull of at least four affinely independent points.

    ``eps`` defaults to ``tol.hull`` times the bounding-box diagonal.
    """
    P = np.asarray(points, dtype=float)
    if P.ndim != 2 or P.shape[1] != 3 or len(P) < 4:
        raise GeometryError("need at least 4 points in 3D")
    if eps is None:
        eps = tol.hull * max(bbox_diagonal(P), 1e-300)
    i0, i1, i2, i3 = _initial_simplex(P, eps)
    facets = [(i0, i1, i2), (i0, i2, i3), (i0, i3, i1), (i1, i3, i2)]
    inner = P[[i0, i1, i2, i3]].mean(axis=0)
    planes = {}
    for k, f in enumerate(facets):
        n, off = _plane(P, f)
        if n @ inner - off > 0:
            f = (f[0], f[2], f[1])
            facets[k] = f
            n, off = -n, -off
        planes[f] = (n, off)
    alive = set(facets)
    seeded = {i0, i1, i2, i3}
    for p in range(len(P)):
        if p in seeded:
            continue
        x = P[p]
        visible = [f for f in alive if planes[f][0] @ x - planes[f][1] > eps]
        if not visible:
            continue
        vis = set(visible)
        edges = {}
        for f in alive:
            for e in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                edges[e] = f
        horizon = []
        for f in visible:
            for a, b in ((f[0], f[1]), (f[1], f[2]), (f[2], f[0])):
                if edges[(b, a)] not in vis:
                    horizon.append((a, b))
        for f in visible:
            alive.discard(f)
            del planes[f]
        for a, b in horizon:
            f = (a, b, p)
            planes[f] = _plane(P, f)
            alive.add(f)
    # canonical order: rotate each facet to start at its smallest index
    out = []
    for f in alive:
        k = f.index(min(f))
        out.append(f[k:] + f[:k])
    out.sort()
    normals = np.array([_plane(P, f)[0] for f in out])
    offsets = np.array([_plane(P, f)[1] for f in out])
    return Hull(P, tuple(out), normals, offsets, eps)


def _hull_2d(Q):
    """Andrew's monotone chain; returns counter-clockwise vertex indices."""
    order = sorted(range(len(Q)), key=lambda i: (Q[i][0], Q[i][1]))

    def cross(o, a, b):
        return (Q[a][0] - Q[o][0]) * (Q[b][1] - Q[o][1]) - (Q[a][1] - Q[o][1]) * (Q[b][0] - Q[o][0])

    lower, upper = [], []
    for i in order:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], i) <= 0:
            lower.pop()
        lower.append(i)
    for i in reversed(order):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], i) <= 0:
            upper.pop()
        upper.append(i)
    return lower[:-1] + upper[:-1]


def outside_margin(x, others, eps: float) -> float:
    """How far ``x`` lies outside the convex hull of ``others``.

    Returns the largest supporting-plane excess (a lower bound on the true
    distance that is positive exactly when ``x`` is outside).  Degenerate
    (coplanar) point sets are handled in their plane.
    """
    x = np.asarray(x, dtype=float)
    Q = np.asarray(others, dtype=float)
    try:
        return convex_hull_3d(Q, eps=eps).signed_distance(x)
    except GeometryError:
        pass
    c = Q.mean(axis=0)
    _, s, vt = np.linalg.svd(Q - c)
    rank = int(np.sum(s > eps))
    if rank == 0:
        return float(np.linalg.norm(x - c))
    if rank == 1:
        d = vt[0]
        v = x - c
        off_line = float(np.linalg.norm(v - (v @ d) * d))
        t = (Q - c) @ d
        along = max(v @ d - t.max(), t.min() - v @ d)
        return max(off_line, along)
    normal = vt[2]
    off_plane = abs(float((x - c) @ normal))
    if off_plane > eps:
        return off_plane
    Q2 = (Q - c) @ vt[:2].T
    y = (x - c) @ vt[:2].T
    ring = _hull_2d(Q2)
    best = -np.inf
    for k in range(len(ring)):
        a, b = Q2[ring[k]], Q2[ring[(k + 1) % len(ring)]]
        e = b - a
        out = np.array([e[1], -e[0]]) / np.linalg.norm(e)
        best = max(best, float(out @ (y - a)))
    return best
