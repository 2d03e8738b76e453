"""Hats: disk surfaces over the plane z = 0 seen through their heights.

A hat's upper faces keep their 3D side lengths while the vertex heights
vary; the horizontal projections of the faces then change shape, and the
angle sums of the projected faces around an interior vertex give the cone
angle at that vertex.  :func:`lambda_G_fd` differentiates those cone
angles with respect to the interior heights.

Excavating a hat flips a convex edge to the lower diagonal of its quad,
removing a tetrahedron from the shadow; :func:`complete` runs this in
reverse until the hat is convex.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry
from .geometry import GeometryError, quad_projection_check
from .hull import bbox_diagonal, convex_hull_3d, outside_margin
from .mesh import MeshError, TriMesh, _edge
from .spectral import CurvatureMatrix, richardson_jacobian
from .tolerances import DEFAULT, Tolerances

logger = logging.getLogger(__name__)

TWO_PI = 2.0 * math.pi


class HatError(MeshError):
    """A hat invariant fails; ``invariant`` names which one."""

    kind = "hat"

    def __init__(self, message: str, invariant: str, index: int | None = None):
        super().__init__(message, index)
        self.invariant = invariant


class FlipError(HatError):
    pass


class StalledCompletion(HatError):
    pass


@dataclass(frozen=True, eq=False)
class Hat:
    """Upper surface of a (weakly) convex hat.

    ``lengths`` maps each undirected edge to its frozen 3D length.
    """

    mesh: TriMesh
    lengths: dict
    boundary: tuple = field(init=False)
    interior: tuple = field(init=False)

    def __post_init__(self):
        if self.mesh.closed:
            raise HatError("a hat is a disk, not a closed surface", "disk")
        object.__setattr__(self, "boundary", self.mesh.boundary_loop)
        bset = set(self.boundary)
        object.__setattr__(self, "interior", tuple(v for v in range(self.mesh.n_vertices) if v not in bset))

    @classmethod
    def from_mesh(cls, mesh: TriMesh, lengths: dict | None = None, check: str = "weak") -> "Hat":
        """Build and validate a hat, orienting faces upward.

        ``check`` is ``"weak"``, ``"convex"`` or ``"none"``.
        """
        V = mesh.vertices
        T = np.array(mesh.triangles)
        nz = np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])[:, 2]
        if np.sum(nz) < 0:
            mesh = mesh.reversed()
        if lengths is None:
            lengths = {e: float(np.linalg.norm(V[e[0]] - V[e[1]])) for e in mesh.edges()}
        hat = cls(mesh, dict(lengths))
        if check != "none":
            hat.validate(convex=(check == "convex"))
        return hat

    # -- geometry -------------------------------------------------------
    @property
    def vertices(self) -> np.ndarray:
        return self.mesh.vertices

    @property
    def heights(self) -> np.ndarray:
        return self.mesh.vertices[:, 2].copy()

    @property
    def tol(self) -> Tolerances:
        return self.mesh.tol

    @property
    def faces(self) -> tuple:
        return self.mesh.triangles

    def side_lengths(self) -> np.ndarray:
        """Frozen length of the side opposite each corner, shape (faces, 3)."""
        return np.array([[self.lengths[_edge(t[(k + 1) % 3], t[(k + 2) % 3])] for k in range(3)]
                         for t in self.faces])

    def interior_edges(self) -> list:
        """Edges shared by two upper faces, with their two faces."""
        return [(e, fs) for e, fs in sorted(self.mesh.edge_faces().items()) if len(fs) == 2]

    def shadow_points(self) -> np.ndarray:
        V = self.vertices
        P = V.copy()
        P[:, 2] = 0.0
        return np.vstack([V, P])

    def prism_angle(self, face: int, edge: tuple) -> float:
        """Interior angle of the prism under ``face`` along its upper edge ``edge``."""
        V = self.vertices
        i, j = edge
        k = next(w for w in self.faces[face] if w not in edge)
        e = V[j] - V[i]
        e = e / np.linalg.norm(e)
        u = V[k] - V[i]
        u = u - (u @ e) * e
        d = np.array([0.0, 0.0, -1.0])
        d = d - (d @ e) * e
        return math.atan2(np.linalg.norm(np.cross(u, d)), u @ d)

    def concavity(self) -> dict:
        """Sum of the two prism angles minus pi, per interior edge."""
        return {e: self.prism_angle(fs[0], e) + self.prism_angle(fs[1], e) - math.pi
                for e, fs in self.interior_edges()}

    # -- invariants -----------------------------------------------------
    def validate(self, convex: bool = False) -> None:
        tol = self.tol
        V = self.vertices
        if np.any(V[:, 2] <= 0):
            v = int(np.argmin(V[:, 2]))
            raise HatError(f"vertex {v} is not above the plane z = 0", "heights", v)
        T = np.array(self.faces)
        n = np.cross(V[T[:, 1]] - V[T[:, 0]], V[T[:, 2]] - V[T[:, 0]])
        nz = n[:, 2] / np.linalg.norm(n, axis=1)
        if np.any(nz <= tol.normal):
            f = int(np.argmin(nz))
            raise HatError(f"face {f} is not facing upward (normal z {nz[f]:.3g})", "normal", f)
        face_area = 0.5 * n[:, 2]
        loop = V[list(self.boundary), :2]
        poly_area = 0.5 * float(np.sum(loop[:, 0] * np.roll(loop[:, 1], -1) - np.roll(loop[:, 0], -1) * loop[:, 1]))
        if abs(face_area.sum() - poly_area) > tol.rel * max(abs(poly_area), 1e-300) * 10:
            raise HatError("vertical projection is not injective (overlapping shadows)", "injective")
        margins = self.extreme_margins()
        eps = tol.hull * bbox_diagonal(self.shadow_points())
        bad = [v for v, m in enumerate(margins) if m <= eps]
        if bad:
            raise HatError(f"vertex {bad[0]} is not extreme in the hull of the shadow", "weakly_convex", bad[0])
        if convex:
            f = self.nonconvex_face()
            if f is not None:
                raise HatError(f"face {f} does not lie on the hull of the shadow", "convex", f)

    def extreme_margins(self) -> list:
        S = self.shadow_points()
        n = self.mesh.n_vertices
        eps = self.tol.hull * bbox_diagonal(S)
        return [outside_margin(S[v], np.delete(S, v, axis=0), eps) for v in range(n)]

    def nonconvex_face(self) -> int | None:
        """First face whose plane has a shadow point above it, if any."""
        V = self.vertices
        eps = self.tol.hull * bbox_diagonal(self.shadow_points())
        for fi, t in enumerate(self.faces):
            a, b, c = V[list(t)]
            nrm = np.cross(b - a, c - a)
            nrm /= np.linalg.norm(nrm)
            if np.max((V - a) @ nrm) > eps:
                return fi
        return None

    def is_convex(self) -> bool:
        return self.nonconvex_face() is None

    def with_heights(self, h) -> "Hat":
        V = self.vertices.copy()
        V[:, 2] = h
        return Hat(self.mesh.with_vertices(V), self.lengths)

    def opposite(self, edge: tuple) -> tuple:
        """Vertices opposite ``edge`` in its two faces: (left, right) of the
        directed edge as it appears in the first face."""
        fs = self.mesh.edge_faces()[_edge(*edge)]
        if len(fs) != 2:
            raise FlipError(f"edge {edge} is a boundary edge", "flip")
        out = []
        for fi in fs:
            out.append(next(w for w in self.faces[fi] if w not in edge))
        return tuple(out)


# ------------------------------------------------------------ cone angles


def _face_arrays(hat: Hat):
    T = np.array(hat.faces)
    S = hat.side_lengths()
    return T, S


def projected_corner_angles(T, S, h, tol: Tolerances = DEFAULT) -> np.ndarray:
    """Angles of the projected faces at each corner, shape (faces, 3)."""
    H = np.asarray(h, dtype=float)[T]
    dh = np.stack([H[:, 1] - H[:, 2], H[:, 2] - H[:, 0], H[:, 0] - H[:, 1]], axis=1)
    sq = S**2 - dh**2
    if np.any(sq <= tol.length**2):
        f, k = np.argwhere(sq <= tol.length**2)[0]
        raise GeometryError(f"projection of face {int(f)} collapses (near-vertical edge opposite corner {int(k)})")
    P = np.sqrt(sq)
    return np.stack([geometry.triangle_angles(P[:, k], P[:, (k + 1) % 3], P[:, (k + 2) % 3])
                     for k in range(3)], axis=1)


def vertex_angle_sums(T, S, h, n: int, tol: Tolerances = DEFAULT) -> np.ndarray:
    A = projected_corner_angles(T, S, h, tol)
    out = np.zeros(n)
    np.add.at(out, T.ravel(), A.ravel())
    return out


def theta_of_heights(hat: Hat, h=None) -> np.ndarray:
    """Cone angle at each interior vertex, heights ``h`` for all vertices."""
    h = hat.heights if h is None else np.asarray(h, dtype=float)
    T, S = _face_arrays(hat)
    return vertex_angle_sums(T, S, h, hat.mesh.n_vertices, hat.tol)[list(hat.interior)]


def _scale(hat: Hat) -> float:
    return 1.0 / float(np.mean(list(hat.lengths.values())))


def lambda_G_fd(hat: Hat) -> CurvatureMatrix:
    """d(theta_i)/d(h_j) over interior vertices, boundary heights fixed."""
    inner = list(hat.interior)
    if not inner:
        return CurvatureMatrix(np.zeros((0, 0)), (), 0.0, _scale(hat), hat.tol)
    T, S = _face_arrays(hat)
    h0 = hat.heights
    n = hat.mesh.n_vertices

    def f(x):
        h = h0.copy()
        h[inner] = x
        return vertex_angle_sums(T, S, h, n, hat.tol)[inner]

    J = richardson_jacobian(f, h0[inner])
    return CurvatureMatrix.from_raw(J, tuple(inner), scale=_scale(hat), tol=hat.tol)


def lambda_G_analytic(hat: Hat) -> CurvatureMatrix:
    """Cotangent formula for convex hats.

    Off-diagonal ``-(cot a + cot a') / (l sin^2 rho)`` for an edge joining two
    interior vertices, where a, a' are the prism angles along the edge, l its
    length and rho its angle with the vertical; diagonal is minus the sum of
    the same weights over every neighbour, boundary ones included.
    """
    if not hat.is_convex():
        raise HatError("analytic matrix requires a convex hat", "convex")
    inner = list(hat.interior)
    pos = {v: k for k, v in enumerate(inner)}
    A = np.zeros((len(inner), len(inner)))
    V = hat.vertices
    for e, (f1, f2) in hat.interior_edges():
        i, j = e
        if i not in pos and j not in pos:
            continue
        d = V[j] - V[i]
        l = float(np.linalg.norm(d))
        sin2 = 1.0 - (d[2] / l) ** 2
        if sin2 <= hat.tol.length:
            raise HatError(f"edge {e} is vertical", "normal")
        w = -(1.0 / math.tan(hat.prism_angle(f1, e)) + 1.0 / math.tan(hat.prism_angle(f2, e))) / (l * sin2)
        if i in pos and j in pos:
            A[pos[i], pos[j]] = A[pos[j], pos[i]] = w
        for v in (i, j):
            if v in pos:
                A[pos[v], pos[v]] -= w
    return CurvatureMatrix(A, tuple(inner), 0.0, _scale(hat), hat.tol)


def diagonally_dominant(M: CurvatureMatrix, slack: float | None = None) -> bool:
    """|a_ii| >= sum_j |a_ij| per row, up to ``slack`` relative to the row
    (default ``tol.rel``); rows with only interior neighbours are equalities
    that roundoff can tip either way."""
    A = M.matrix
    d = np.abs(np.diag(A))
    off = np.sum(np.abs(A), axis=1) - d
    slack = M.tol.rel if slack is None else slack
    return bool(np.all(d >= off - slack * (d + off)))


# --------------------------------------------------------- excavation


@dataclass(frozen=True, eq=False)
class ExcavationStep:
    """The tetrahedron between the upper diagonal ``upper`` and lower
    diagonal ``lower`` of a quad, with its 4x4 matrix M_S.

    ``vertices`` is ``upper + lower`` and indexes the rows of ``matrix``.
    """

    vertices: tuple
    upper: tuple
    lower: tuple
    matrix: CurvatureMatrix

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.matrix.eigenvalues

    def rank_one(self, tol: Tolerances | None = None) -> bool:
        tol = tol or self.matrix.tol
        ev = self.eigenvalues
        top = ev[-1]
        return bool(top > 0 and np.all(np.abs(ev[:-1]) <= tol.eig * top))

    def scatter(self, index: dict, size: int) -> np.ndarray:
        """M_S placed at ``index[vertex]``; vertices missing from ``index`` drop out."""
        out = np.zeros((size, size))
        M = self.matrix.matrix
        for a, va in enumerate(self.vertices):
            for b, vb in enumerate(self.vertices):
                if va in index and vb in index:
                    out[index[va], index[vb]] += M[a, b]
        return out

    def summary(self) -> dict:
        return {"vertices": list(self.vertices), "upper": list(self.upper), "lower": list(self.lower),
                "matrix": self.matrix.matrix.tolist(), "eigenvalues": self.eigenvalues.tolist(),
                "rank_one": self.rank_one()}


# S_+ = (u0, u1, l0) + (u0, u1, l1); S_- = (l0, l1, u0) + (l0, l1, u1), local indices
_UPPER_FACES = np.array([[0, 1, 2], [0, 1, 3]])
_LOWER_FACES = np.array([[2, 3, 0], [2, 3, 1]])


def _simplex_theta_difference(points):
    P = np.asarray(points, dtype=float)

    def sides(F):
        return np.array([[np.linalg.norm(P[f[(k + 1) % 3]] - P[f[(k + 2) % 3]]) for k in range(3)] for f in F])

    Su, Sl = sides(_UPPER_FACES), sides(_LOWER_FACES)

    def f(h):
        return vertex_angle_sums(_LOWER_FACES, Sl, h, 4) - vertex_angle_sums(_UPPER_FACES, Su, h, 4)

    return f


def compute_M_S(points, upper=(0, 1), lower=(2, 3), labels=None, tol: Tolerances = DEFAULT) -> ExcavationStep:
    """M_S = d(theta^- - theta^+)/dh for the simplex on ``points`` (4x3).

    ``upper``/``lower`` index into ``points``; ``labels`` (default: the
    local indices) name the vertices in the returned step.
    """
    P = np.asarray(points, dtype=float)
    q = quad_projection_check(P, upper, lower)
    if not q:
        raise FlipError(f"simplex does not project to a quadrilateral: {q.reason}", "quad")
    order = list(upper) + list(lower)
    Q = P[order]
    f = _simplex_theta_difference(Q)
    J = richardson_jacobian(f, Q[:, 2])
    labels = tuple(range(4)) if labels is None else tuple(labels)
    names = tuple(labels[i] for i in order)
    scale = 1.0 / float(np.mean([np.linalg.norm(Q[a] - Q[b]) for a, b in itertools.combinations(range(4), 2)]))
    M = CurvatureMatrix.from_raw(J, names, scale=scale, tol=tol)
    return ExcavationStep(names, names[:2], names[2:], M)


def _lower_below_upper(V, upper, lower, crossing) -> float:
    """Height of the upper diagonal minus the lower one above ``crossing``."""

    def height_at(a, b):
        pa, pb = V[a], V[b]
        d = pb[:2] - pa[:2]
        s = float((np.asarray(crossing) - pa[:2]) @ d / (d @ d))
        return pa[2] + s * (pb[2] - pa[2])

    return height_at(*upper) - height_at(*lower)


def flip(hat: Hat, edge: tuple, check: str = "weak") -> Hat:
    """Replace ``edge`` by the other diagonal of its quad (no sign checks)."""
    i, j = edge
    fs = hat.mesh.edge_faces()[_edge(i, j)]
    if len(fs) != 2:
        raise FlipError(f"edge {edge} is not shared by two faces", "flip")
    f1, f2 = (hat.faces[k] for k in fs)
    # orient so that f1 contains the directed edge (a, b)
    k = f1.index(i)
    if f1[(k + 1) % 3] == j:
        a, b = i, j
    else:
        a, b = j, i
    c = next(w for w in f1 if w not in (a, b))
    d = next(w for w in f2 if w not in (a, b))
    tris = [t for n, t in enumerate(hat.faces) if n not in fs] + [(c, a, d), (d, b, c)]
    lengths = dict(hat.lengths)
    V = hat.vertices
    lengths.setdefault(_edge(c, d), float(np.linalg.norm(V[c] - V[d])))
    mesh = TriMesh(V, tris, None, hat.tol)
    return Hat.from_mesh(mesh, lengths, check=check)


def _step_for(hat: Hat, upper: tuple, lower: tuple) -> ExcavationStep:
    ids = list(upper) + list(lower)
    return compute_M_S(hat.vertices[ids], (0, 1), (2, 3), labels=ids, tol=hat.tol)


def excavate(hat: Hat, edge: tuple) -> tuple[Hat, ExcavationStep]:
    """Remove the tetrahedron under the convex edge ``edge``.

    The edge becomes the upper diagonal of the removed simplex and the
    segment joining its two opposite vertices the new (lower) surface edge.
    """
    upper = tuple(edge)
    lower = hat.opposite(upper)
    V = hat.vertices
    ids = list(upper) + list(lower)
    q = quad_projection_check(V[ids], (0, 1), (2, 3))
    if not q:
        raise FlipError(f"quad around {upper} is not convex: {q.reason}", "quad")
    gap = _lower_below_upper(V, upper, lower, q.crossing)
    if gap <= hat.tol.hull * bbox_diagonal(V):
        raise FlipError(f"edge {upper} is not convex: nothing to excavate", "convex_edge")
    try:
        new = flip(hat, upper)
    except HatError as exc:
        raise FlipError(f"excavating {upper} breaks the hat: {exc}", exc.invariant) from exc
    return new, _step_for(hat, upper, lower)


def completion_bound(hat: Hat) -> int:
    return math.comb(hat.mesh.n_vertices, 4)


def complete(hat: Hat) -> tuple[Hat, list]:
    """Glue simplices over concave edges until the hat is convex.

    Picks the most concave flippable edge each round (ties: smallest vertex
    pair).  Returns the convex hat and the glued steps in order.
    """
    steps: list = []
    bound = completion_bound(hat)
    tol = hat.tol
    while True:
        conc = hat.concavity()
        candidates = sorted(((-x, e) for e, x in conc.items() if x > tol.angle))
        if not candidates:
            break
        if len(steps) >= bound:
            raise StalledCompletion(f"completion exceeded the bound of {bound} steps", "bound")
        for _, e in candidates:
            opp = hat.opposite(e)
            V = hat.vertices
            ids = list(opp) + list(e)
            q = quad_projection_check(V[ids], (0, 1), (2, 3))
            if not q or _lower_below_upper(V, opp, e, q.crossing) <= 0:
                continue
            try:
                new = flip(hat, e)
            except HatError:
                continue
            steps.append(_step_for(hat, opp, e))
            hat = new
            break
        else:
            raise StalledCompletion(
                f"concave edges {[e for _, e in candidates]} cannot be flipped", "stalled")
    f = hat.nonconvex_face()
    if f is not None:
        raise StalledCompletion(f"no concave edge left but face {f} is below the hull", "stalled", f)
    return hat, steps


def update_residual(lam_before: CurvatureMatrix, lam_after: CurvatureMatrix, step: ExcavationStep) -> float:
    """max |(after - before) - scatter(M_S)| for an excavation before -> after."""
    if lam_before.labels != lam_after.labels:
        raise ValueError("matrices are indexed by different vertices")
    index = {v: k for k, v in enumerate(lam_before.labels)}
    if not index:
        return 0.0
    D = lam_after.matrix - lam_before.matrix - step.scatter(index, len(index))
    return float(np.max(np.abs(D)))


# ------------------------------------------------------ construction


def upper_hull_hat(points, tol: Tolerances = DEFAULT, check: str = "convex") -> Hat:
    """Convex hat formed by the upward faces of the hull of the points' shadow."""
    V = np.asarray(points, dtype=float)
    P = V.copy()
    P[:, 2] = 0.0
    hull = convex_hull_3d(np.vstack([V, P]), tol)
    n = len(V)
    tris = [f for f, nrm in zip(hull.facets, hull.normals) if nrm[2] > tol.normal and max(f) < n]
    used = sorted({i for t in tris for i in t})
    if used != list(range(n)):
        missing = sorted(set(range(n)) - set(used))
        raise HatError(f"points {missing} are not on the upper hull", "weakly_convex", missing[0])
    return Hat.from_mesh(TriMesh(V, tris, None, tol), check=check)


def hull_distance(hat: Hat) -> float:
    """Largest distance of a face vertex below the hull's upper facets (0 if on the hull)."""
    ref = upper_hull_hat(hat.vertices, hat.tol, check="none")
    return max(abs(hat_height_at(ref, hat.vertices[list(t)].mean(axis=0)[:2]) - hat.vertices[list(t)].mean(axis=0)[2])
               for t in hat.faces)


def hat_height_at(hat: Hat, xy) -> float:
    """Height of the hat surface above the horizontal point ``xy``."""
    V = hat.vertices
    x = np.asarray(xy, dtype=float)
    for t in hat.faces:
        a, b, c = V[list(t)]
        M = np.array([b[:2] - a[:2], c[:2] - a[:2]]).T
        s, r = np.linalg.solve(M, x - a[:2])
        if s >= -1e-12 and r >= -1e-12 and s + r <= 1 + 1e-12:
            return float(a[2] + s * (b[2] - a[2]) + r * (c[2] - a[2]))
    raise GeometryError(f"point {tuple(x)} is outside the hat's projection")


def write_hat_off(hat: Hat) -> str:
    from .mesh import write_off

    return write_off(hat.mesh)
