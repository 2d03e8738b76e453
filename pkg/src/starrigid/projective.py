"""Projective maps sending a polyhedron's vertex to vertical infinity.

In a frame where the apex is the origin and a supporting plane at the apex
is ``z = 0`` (the polyhedron above it), the map is

    (x, y, z) -> (x / z, y / z, c - 1 / z)

so segments through the apex become vertical lines and the apex goes off
to ``z = -inf``.  ``c`` puts the lowest image vertex at height 1.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .geometry import GeometryError
from .hats import Hat, lambda_G_fd
from .hull import bbox_diagonal
from .mesh import TriMesh, build_star_complex
from .rigidity import KillingField
from .spectral import CurvatureMatrix
from .star import lambda_P
from .tolerances import DEFAULT, Tolerances

logger = logging.getLogger(__name__)


class ProjectiveError(GeometryError):
    pass


@dataclass(frozen=True, eq=False)
class ProjectiveMap:
    """x -> (A x + b) / (q.x + d), stored as the 4x4 homogeneous matrix."""

    matrix: np.ndarray

    def __post_init__(self):
        H = np.array(self.matrix, dtype=float)
        H = H / np.max(np.abs(H))
        H.setflags(write=False)
        object.__setattr__(self, "matrix", H)

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    @property
    def condition(self) -> float:
        return float(np.linalg.cond(self.matrix))

    @property
    def infinity_plane(self) -> np.ndarray:
        """(q, d): points with q.x + d = 0 are sent to infinity."""
        return self.matrix[3].copy()

    def weights(self, points) -> np.ndarray:
        P = np.atleast_2d(np.asarray(points, dtype=float))
        return P @ self.matrix[3, :3] + self.matrix[3, 3]

    def __call__(self, points) -> np.ndarray:
        P = np.asarray(points, dtype=float)
        single = P.ndim == 1
        P = np.atleast_2d(P)
        Y = P @ self.matrix[:3, :3].T + self.matrix[:3, 3]
        w = self.weights(P)
        if np.any(w == 0):
            raise ProjectiveError("point on the plane sent to infinity")
        out = Y / w[:, None]
        return out[0] if single else out

    def inverse(self, points) -> np.ndarray:
        return ProjectiveMap(self.inverse_matrix)(points)

    def psi(self, x) -> np.ndarray:
        """Linear map carrying velocities at ``x`` to velocities at its image.

        With w = q.x + d and P the image point, w_i w_j (P_i - P_j) equals
        B_i (x_i - x_j) for B_i = w_i (A - P_i q^T); the inverse transpose of
        B_i therefore preserves every pairwise first-order length constraint.
        """
        H = self.matrix
        x = np.asarray(x, dtype=float)
        w = float(H[3, :3] @ x + H[3, 3])
        P = self(x)
        B = w * (H[:3, :3] - np.outer(P, H[3, :3]))
        return np.linalg.inv(B).T


@dataclass(frozen=True, eq=False)
class Frame:
    """Rigid frame with the apex at the origin and the supporting plane z = 0."""

    rotation: np.ndarray
    origin: np.ndarray
    margin: float

    def homogeneous(self) -> np.ndarray:
        F = np.eye(4)
        F[:3, :3] = self.rotation
        F[:3, 3] = -self.rotation @ self.origin
        return F

    def to_frame(self, points) -> np.ndarray:
        return (np.asarray(points, dtype=float) - self.origin) @ self.rotation.T

    def from_frame(self, points) -> np.ndarray:
        return np.asarray(points, dtype=float) @ self.rotation + self.origin


def supporting_frame(points, apex: int, tol: Tolerances = DEFAULT) -> Frame:
    """Frame whose z-axis is the normal of the supporting plane at ``apex``
    that keeps the other points furthest (in angle) above it."""
    V = np.asarray(points, dtype=float)
    a = V[apex]
    U = np.delete(V, apex, axis=0) - a
    U = U / np.linalg.norm(U, axis=1)[:, None]
    # maximize t subject to n.u_j >= t, |n_k| <= 1
    res = linprog(c=[0, 0, 0, -1], A_ub=np.c_[-U, np.ones(len(U))], b_ub=np.zeros(len(U)),
                  bounds=[(-1, 1)] * 3 + [(None, 1)], method="highs")
    if res.status != 0 or res.x[3] <= 0:
        raise ProjectiveError(f"vertex {apex} has no strictly supporting plane (not extreme)")
    n = res.x[:3] / np.linalg.norm(res.x[:3])
    helper = np.eye(3)[int(np.argmin(np.abs(n)))]
    e1 = np.cross(helper, n)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(n, e1)
    R = np.array([e1, e2, n])
    heights = (np.delete(V, apex, axis=0) - a) @ n
    margin = float(heights.min())
    if margin <= tol.hull * bbox_diagonal(V):
        raise ProjectiveError(f"a vertex lies on the supporting plane at {apex}")
    return Frame(R, a.copy(), margin)


def _phi_matrix(c: float) -> np.ndarray:
    # homogeneous (x, y, z, 1) -> (x, y, c z - 1, z)
    return np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0], [0, 0, c, -1.0], [0, 0, 1.0, 0]])


@dataclass(frozen=True, eq=False)
class Bridge:
    """The map from a polyhedron to its hat, with the frame it was built in."""

    mesh: TriMesh
    apex: int
    frame: Frame
    c: float
    phi: ProjectiveMap  # world coordinates -> hat coordinates

    def at(self, t: float) -> ProjectiveMap:
        """Interpolated map: identity at t = 0, the full map (in world
        orientation) at t = 1; for t < 1 the plane sent to infinity is
        z = -(1 - t) / t in the frame, below the polyhedron."""
        if not 0 <= t <= 1:
            raise ValueError("t must lie in [0, 1]")
        F = self.frame.homogeneous()
        Mt = (1 - t) * np.eye(4) + t * _phi_matrix(self.c)
        return ProjectiveMap(np.linalg.inv(F) @ Mt @ F)

    def infinity_margin(self, t: float) -> float:
        """Distance from the polyhedron to the plane sent to infinity by ``at(t)``."""
        if t == 0:
            return float("inf")
        return (1 - t) / t


def build_phi(mesh: TriMesh, apex: int, tol: Tolerances | None = None) -> Bridge:
    tol = tol or mesh.tol
    frame = supporting_frame(mesh.vertices, apex, tol)
    z = frame.to_frame(np.delete(mesh.vertices, apex, axis=0))[:, 2]
    c = 1.0 + 1.0 / float(z.min())
    phi = ProjectiveMap(_phi_matrix(c) @ frame.homogeneous())
    return Bridge(mesh, apex, frame, c, phi)


def polyhedron_to_hat(mesh: TriMesh, apex: int, check: str = "weak") -> tuple[Hat, tuple]:
    """Hat formed by the images of the faces not containing ``apex``.

    Returns the hat and, for each hat vertex, its index in ``mesh``.
    """
    mesh = mesh.refan(apex)
    bridge = build_phi(mesh, apex)
    keep = tuple(v for v in range(mesh.n_vertices) if v != apex)
    new = {v: k for k, v in enumerate(keep)}
    X = bridge.phi(mesh.vertices[list(keep)])
    tris = [tuple(new[v] for v in t) for t in mesh.triangles if apex not in t]
    hat = Hat.from_mesh(TriMesh(X, tris, None, mesh.tol), check=check)
    adjacent = mesh.neighbors(apex)
    if {keep[v] for v in hat.boundary} != adjacent:
        raise ProjectiveError("hat boundary is not the link of the apex")
    return hat, keep


def pullback_polyhedron(hat: Hat, c: float | None = None) -> tuple[TriMesh, int]:
    """Closed polyhedron whose hat from the new apex is ``hat``.

    Inverts the vertical-infinity map (apex at the origin of the frame) and
    closes the surface with a fan from the apex over the hat's boundary.
    Returns the mesh and the apex index (the last vertex).
    """
    X = hat.vertices
    c = float(X[:, 2].max() + 1.0) if c is None else c
    z = 1.0 / (c - X[:, 2])
    P = np.c_[X[:, 0] * z, X[:, 1] * z, z]
    apex = len(P)
    P = np.vstack([P, np.zeros(3)])
    loop = hat.boundary
    tris = list(hat.faces) + [(loop[(k + 1) % len(loop)], loop[k], apex) for k in range(len(loop))]
    mesh = TriMesh(P, tris, None, hat.mesh.tol).oriented_outward()
    return mesh, apex


# ----------------------------------------------------------- transport


@dataclass(frozen=True)
class TransportedField:
    field: KillingField  # affine fit of the image field
    antisymmetry: float  # max |J + J^T| relative to the field's size
    fit_residual: float  # relative misfit of the affine model

    @property
    def is_killing(self) -> bool:
        return self.antisymmetry <= 1e-10 and self.fit_residual <= 1e-10


def transport_killing(pmap: ProjectiveMap, field: KillingField, samples) -> TransportedField:
    """Push ``field`` through ``pmap`` and fit the image by an affine field.

    ``samples`` are source points (away from the plane sent to infinity,
    not all coplanar) at which the image field is evaluated.
    """
    S = np.asarray(samples, dtype=float)
    w = pmap.weights(S)
    span = bbox_diagonal(S)
    if np.any(np.abs(w) <= 1e-9 * max(span, 1.0) * np.linalg.norm(pmap.matrix[3, :3])):
        raise ProjectiveError("sample point too close to the plane sent to infinity")
    X = pmap(S)
    A = np.c_[np.ones(len(X)), X]
    sv = np.linalg.svd(A - np.r_[0.0, X.mean(axis=0)], compute_uv=False)
    if len(sv) < 4 or sv[-1] <= 1e-9 * sv[0]:
        raise ProjectiveError("sample points do not span space; an affine fit is undetermined")
    Vals = np.array([pmap.psi(x) @ field(x) for x in S])
    coef, *_ = np.linalg.lstsq(A, Vals, rcond=None)
    b, J = coef[0], coef[1:].T
    L = max(bbox_diagonal(X), 1e-300)
    size = max(np.max(np.abs(J)), np.max(np.abs(b)) / L, np.max(np.abs(Vals)) / L)
    if size == 0:
        return TransportedField(KillingField.zero(), 0.0, 0.0)
    anti = float(np.max(np.abs(J + J.T))) / size
    fit = float(np.max(np.abs(A @ coef - Vals))) / (size * L)
    W = (J - J.T) / 2
    omega = np.array([W[2, 1], W[0, 2], W[1, 0]])
    return TransportedField(KillingField(b, omega), anti, fit)


def vertical_subspace_residual(field: KillingField, length: float = 1.0) -> float:
    """Relative size of the part of ``field`` outside horizontal translations
    plus rotations about vertical axes."""
    t, w = field.translation, field.rotation
    total = np.linalg.norm(t) + length * np.linalg.norm(w)
    if total == 0:
        return 0.0
    return float(np.hypot(t[2], length * np.hypot(w[0], w[1])) / total)


# ------------------------------------------------------------ homotopy


@dataclass(frozen=True, eq=False)
class HomotopyRow:
    t: float
    matrix: CurvatureMatrix
    margin: float

    def summary(self) -> dict:
        return {"t": self.t, "eigenvalues": self.matrix.eigenvalues.tolist(),
                "signature": list(self.matrix.signature), "infinity_margin": self.margin}


@dataclass(frozen=True, eq=False)
class HomotopyResult:
    rows: tuple
    hat_matrix: CurvatureMatrix | None

    @property
    def signatures(self) -> list:
        return [r.matrix.signature for r in self.rows]

    @property
    def constant(self) -> bool:
        return len(set(self.signatures)) <= 1

    def summary(self) -> dict:
        return {"rows": [r.summary() for r in self.rows], "constant_signature": self.constant,
                "hat_eigenvalues": None if self.hat_matrix is None else self.hat_matrix.eigenvalues.tolist(),
                "hat_signature": None if self.hat_matrix is None else list(self.hat_matrix.signature)}


class HomotopyInconsistency(GeometryError):
    pass


def homotopy_signature(mesh: TriMesh, apex: int, samples=(0.0, 0.25, 0.5, 0.75, 0.9),
                       with_hat: bool = True) -> HomotopyResult:
    """Curvature matrix of the star complex of each interpolated polyhedron."""
    mesh = mesh.refan(apex)
    bridge = build_phi(mesh, apex)
    rows = []
    for t in samples:
        if not 0 <= t < 1:
            raise ValueError(f"homotopy samples must lie in [0, 1), got {t}")
        pm = bridge.at(t)
        if t == 0:
            mt = mesh
        else:
            mt = mesh.with_vertices(pm(mesh.vertices))
        try:
            sc = build_star_complex(mt, apex)
        except Exception as exc:
            raise HomotopyInconsistency(f"star complex fails at t = {t}: {exc}") from exc
        rows.append(HomotopyRow(float(t), lambda_P(sc), bridge.infinity_margin(t)))
    hat_matrix = lambda_G_fd(polyhedron_to_hat(mesh, apex)[0]) if with_hat else None
    return HomotopyResult(tuple(rows), hat_matrix)


__all__ = [
    "Bridge", "Frame", "HomotopyResult", "ProjectiveError", "ProjectiveMap", "TransportedField",
    "build_phi", "homotopy_signature", "polyhedron_to_hat", "pullback_polyhedron",
    "supporting_frame", "transport_killing", "vertical_subspace_residual",
]
