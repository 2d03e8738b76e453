"""Metric kernel: tetrahedra from edge lengths, dihedral angles, projected
triangle angles and quadrilateral projections.

Tetrahedron edge lengths are stored in the fixed pair order
``(0,1), (0,2), (0,3), (1,2), (1,3), (2,3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .tolerances import DEFAULT, Tolerances

PAIRS = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
_PAIR_INDEX = {p: k for k, p in enumerate(PAIRS)}
_PAIR_INDEX.update({(b, a): k for (a, b), k in list(_PAIR_INDEX.items())})


class GeometryError(ValueError):
    """Raised when a geometric construction has no (non-degenerate) solution."""


def pair_index(a: int, b: int) -> int:
    return _PAIR_INDEX[(a, b)]


def permute_lengths(lengths, perm: Sequence[int]) -> np.ndarray:
    """Edge lengths of the tetrahedron relabelled so that new vertex k is old ``perm[k]``.

    Works on a single 6-vector or a batch of shape ``(n, 6)``.
    """
    lengths = np.asarray(lengths, dtype=float)
    idx = [_PAIR_INDEX[(perm[a], perm[b])] for a, b in PAIRS]
    return lengths[..., idx]


def cayley_menger_volume_sq(lengths) -> float:
    """Squared volume of the tetrahedron with the given six edge lengths."""
    d = np.asarray(lengths, dtype=float) ** 2
    cm = np.ones((5, 5))
    cm[0, 0] = 0.0
    for k, (a, b) in enumerate(PAIRS):
        cm[a + 1, b + 1] = cm[b + 1, a + 1] = d[k]
    for a in range(4):
        cm[a + 1, a + 1] = 0.0
    return float(np.linalg.det(cm) / 288.0)


@dataclass(frozen=True)
class SimplexLengths:
    """Six edge lengths of a tetrahedron, validated on construction."""

    lengths: tuple

    def __init__(self, lengths, tol: Tolerances = DEFAULT):
        vals = tuple(float(x) for x in lengths)
        if len(vals) != 6:
            raise GeometryError("a tetrahedron has 6 edge lengths")
        object.__setattr__(self, "lengths", vals)
        for face in ((0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)):
            a, b, c = (vals[pair_index(i, j)] for i, j in
                       ((face[0], face[1]), (face[0], face[2]), (face[1], face[2])))
            if not (a + b > c and a + c > b and b + c > a):
                raise GeometryError(f"triangle inequality fails on face {face}")
        if cayley_menger_volume_sq(vals) <= tol.vol:
            raise GeometryError("Cayley-Menger volume is not positive")

    def length(self, a: int, b: int) -> float:
        return self.lengths[pair_index(a, b)]

    def volume(self) -> float:
        return math.sqrt(max(cayley_menger_volume_sq(self.lengths), 0.0))


def realize(lengths) -> np.ndarray:
    """Coordinates of a tetrahedron with the given edge lengths.

    Vertex 0 at the origin, vertex 1 on the positive x-axis, vertex 2 in the
    upper xy half-plane and vertex 3 above the xy-plane.  Accepts a batch of
    shape ``(n, 6)`` and returns ``(n, 4, 3)``.
    """
    L = np.asarray(lengths, dtype=float)
    single = L.ndim == 1
    L = np.atleast_2d(L)
    d01, d02, d03, d12, d13, d23 = L.T
    x2 = (d01**2 + d02**2 - d12**2) / (2 * d01)
    y2sq = d02**2 - x2**2
    x3 = (d01**2 + d03**2 - d13**2) / (2 * d01)
    with np.errstate(invalid="ignore", divide="ignore"):
        y2 = np.sqrt(y2sq)
        y3 = (d02**2 + d03**2 - d23**2 - 2 * x2 * x3) / (2 * y2)
        z3sq = d03**2 - x3**2 - y3**2
    bad = ~(y2sq > 0) | ~(z3sq > 0)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise GeometryError(f"edge lengths of simplex {k} admit no non-degenerate realization")
    pts = np.zeros((L.shape[0], 4, 3))
    pts[:, 1, 0] = d01
    pts[:, 2, 0] = x2
    pts[:, 2, 1] = y2
    pts[:, 3, 0] = x3
    pts[:, 3, 1] = y3
    pts[:, 3, 2] = np.sqrt(z3sq)
    return pts[0] if single else pts


def dihedral_01(lengths) -> np.ndarray:
    """Dihedral angle along edge (0, 1) for a batch of length 6-vectors."""
    pts = realize(np.atleast_2d(lengths))
    return np.arctan2(pts[:, 3, 2], pts[:, 3, 1])


def dihedral_angle(s: SimplexLengths, edge: tuple[int, int]) -> float:
    """Interior dihedral angle of the tetrahedron along ``edge``."""
    a, b = edge
    if a == b or not {a, b} <= {0, 1, 2, 3}:
        raise GeometryError(f"bad edge {edge}")
    c, d = sorted({0, 1, 2, 3} - {a, b})
    moved = permute_lengths(s.lengths, (a, b, c, d))
    return float(dihedral_01(moved)[0])


def all_dihedrals(lengths) -> np.ndarray:
    """All six dihedral angles, in ``PAIRS`` order, for a batch ``(n, 6)``."""
    L = np.atleast_2d(np.asarray(lengths, dtype=float))
    out = np.empty_like(L)
    for k, (a, b) in enumerate(PAIRS):
        c, d = sorted({0, 1, 2, 3} - {a, b})
        out[:, k] = dihedral_01(permute_lengths(L, (a, b, c, d)))
    return out


def dihedral_from_points(p) -> float:
    """Dihedral angle along edge p[0]p[1] of the embedded tetrahedron ``p``."""
    p = np.asarray(p, dtype=float)
    e = p[1] - p[0]
    e = e / np.linalg.norm(e)
    u = p[2] - p[0]
    v = p[3] - p[0]
    u = u - (u @ e) * e
    v = v - (v @ e) * e
    return float(math.atan2(np.linalg.norm(np.cross(u, v)), u @ v))


def triangle_angle(a: float, b: float, c: float) -> float:
    """Angle opposite side ``a`` in a triangle with sides a, b, c.

    Uses Kahan's cancellation-free half-angle form, accurate for needle-like
    triangles where the law of cosines loses digits.
    """
    p, q = max(b, c), min(b, c)
    if a >= q:
        mu = q - (p - a)
    else:
        mu = a - (p - q)
    num = ((p - q) + a) * mu
    den = (p + (q + a)) * ((p - a) + q)
    if not (num > 0 and den > 0):
        raise GeometryError("triangle inequality violated")
    return 2.0 * math.atan(math.sqrt(num / den))


@dataclass(frozen=True)
class ProjectedTriangle:
    """A triangle with frozen 3D side lengths and variable vertex heights.

    ``sides[k]`` is the length of the side opposite corner ``k``.
    """

    sides: tuple
    heights: tuple

    def projected_sides(self, tol: Tolerances = DEFAULT) -> tuple:
        h = self.heights
        out = []
        for k in range(3):
            i, j = (k + 1) % 3, (k + 2) % 3
            sq = self.sides[k] ** 2 - (h[i] - h[j]) ** 2
            if sq <= tol.length**2:
                raise GeometryError(f"projection of side {k} collapses (near-vertical edge)")
            out.append(math.sqrt(sq))
        return tuple(out)


def projected_angle(t: ProjectedTriangle, corner: int, tol: Tolerances = DEFAULT) -> float:
    """Angle at ``corner`` of the horizontal projection of ``t``."""
    p = t.projected_sides(tol)
    return triangle_angle(p[corner], p[(corner + 1) % 3], p[(corner + 2) % 3])


def _orient2d(a, b, c) -> float:
    return float((b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0]))


@dataclass(frozen=True)
class QuadCheck:
    ok: bool
    crossing: tuple | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.ok


def quad_projection_check(points, upper: tuple[int, int], lower: tuple[int, int],
                          eps: float = 1e-12) -> QuadCheck:
    """Check that four points project to a convex quadrilateral whose
    diagonals are ``upper`` and ``lower`` (pairs of indices into ``points``).

    The diagonals must cross strictly inside; the crossing point is returned.
    """
    P = np.asarray(points, dtype=float)[:, :2]
    a, b = upper
    c, d = lower
    if len({a, b, c, d}) != 4:
        return QuadCheck(False, reason="diagonals must use four distinct vertices")
    scale = max(float(np.ptp(P, axis=0).max()), 1.0) ** 2
    # c and d on opposite sides of ab, a and b on opposite sides of cd
    o1 = _orient2d(P[a], P[b], P[c])
    o2 = _orient2d(P[a], P[b], P[d])
    o3 = _orient2d(P[c], P[d], P[a])
    o4 = _orient2d(P[c], P[d], P[b])
    if min(abs(o1), abs(o2), abs(o3), abs(o4)) <= eps * scale:
        return QuadCheck(False, reason="degenerate: three projected vertices collinear")
    if o1 * o2 > 0:
        return QuadCheck(False, reason="lower diagonal does not cross the upper diagonal line")
    if o3 * o4 > 0:
        return QuadCheck(False, reason="upper diagonal does not cross the lower diagonal line")
    s = o3 / (o3 - o4)
    x = P[a] + s * (P[b] - P[a])
    return QuadCheck(True, crossing=(float(x[0]), float(x[1])))


def triangle_angles(a, b, c) -> np.ndarray:
    """Vectorized :func:`triangle_angle`: angle opposite ``a`` elementwise."""
    a = np.asarray(a, dtype=float)
    p = np.maximum(b, c)
    q = np.minimum(b, c)
    mu = np.where(a >= q, q - (p - a), a - (p - q))
    num = ((p - q) + a) * mu
    den = (p + (q + a)) * ((p - a) + q)
    if np.any(~(num > 0)) or np.any(~(den > 0)):
        raise GeometryError("triangle inequality violated")
    return 2.0 * np.arctan(np.sqrt(num / den))
