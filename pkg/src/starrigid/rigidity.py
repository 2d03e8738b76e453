"""Bar-joint rigidity of triangulated surfaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import GeometryError
from .mesh import TriMesh
from .tolerances import DEFAULT, Tolerances


@dataclass(frozen=True)
class KillingField:
    """Infinitesimal rigid motion ``x -> translation + rotation x x``."""

    translation: np.ndarray
    rotation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "translation", np.asarray(self.translation, dtype=float).reshape(3))
        object.__setattr__(self, "rotation", np.asarray(self.rotation, dtype=float).reshape(3))

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.translation + np.cross(self.rotation, x)

    @property
    def jacobian(self) -> np.ndarray:
        wx, wy, wz = self.rotation
        return np.array([[0.0, -wz, wy], [wz, 0.0, -wx], [-wy, wx, 0.0]])

    @classmethod
    def zero(cls) -> "KillingField":
        return cls(np.zeros(3), np.zeros(3))


def rigidity_matrix(mesh: TriMesh) -> np.ndarray:
    """One row per edge (a, b): p_a - p_b in a's block, p_b - p_a in b's."""
    V = mesh.vertices
    edges = mesh.edges()
    R = np.zeros((len(edges), 3 * len(V)))
    for r, (a, b) in enumerate(edges):
        d = V[a] - V[b]
        R[r, 3 * a:3 * a + 3] = d
        R[r, 3 * b:3 * b + 3] = -d
    return R


def trivial_motion_basis(mesh_or_points) -> np.ndarray:
    """The 3 translations and 3 rotations evaluated at the vertices, shape (6, 3n)."""
    V = getattr(mesh_or_points, "vertices", mesh_or_points)
    V = np.asarray(V, dtype=float)
    c = V - V.mean(axis=0)
    s = np.linalg.svd(c, compute_uv=False)
    if len(V) < 3 or s[1] <= 1e-12 * max(s[0], 1e-300):
        raise GeometryError("vertices are collinear: trivial motions are degenerate")
    rows = []
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        rows.append(KillingField(e, np.zeros(3))(V).ravel())
    for k in range(3):
        e = np.zeros(3)
        e[k] = 1.0
        rows.append(KillingField(np.zeros(3), e)(V).ravel())
    return np.array(rows)


def height_constraints(n: int, fixed) -> np.ndarray:
    C = np.zeros((len(fixed), 3 * n))
    for r, v in enumerate(fixed):
        C[r, 3 * v + 2] = 1.0
    return C


@dataclass(frozen=True, eq=False)
class FlexReport:
    shape: tuple
    rank: int
    kernel: np.ndarray  # (k, n, 3)
    trivial_dimension: int
    singular_values: np.ndarray
    gap: float  # sigma[rank-1] / sigma[rank]; inf when nothing is cut
    trivial_residual: float
    fixed_heights: tuple = ()

    @property
    def kernel_dimension(self) -> int:
        return len(self.kernel)

    @property
    def rigid(self) -> bool:
        return self.kernel_dimension == self.trivial_dimension

    @property
    def verdict(self) -> str:
        return "infinitesimally_rigid" if self.rigid else "flexible"

    def summary(self) -> dict:
        return {
            "matrix_shape": list(self.shape),
            "rank": self.rank,
            "kernel_dimension": self.kernel_dimension,
            "trivial_dimension": self.trivial_dimension,
            "verdict": self.verdict,
            "spectral_gap": self.gap,
            "trivial_residual": self.trivial_residual,
            "fixed_heights": list(self.fixed_heights),
        }


def _rank(M, rel):
    s = np.linalg.svd(M, compute_uv=False)
    if not s.size or s[0] == 0:
        return 0, s
    return int(np.sum(s > rel * s[0])), s


def flex_report(mesh: TriMesh, fixed_heights=None, tol: Tolerances = DEFAULT) -> FlexReport:
    """Kernel of the rigidity matrix, optionally with vertical coordinates of
    ``fixed_heights`` pinned, compared with the matching trivial motions."""
    n = mesh.n_vertices
    R = rigidity_matrix(mesh)
    fixed = tuple(sorted(fixed_heights)) if fixed_heights is not None else ()
    if fixed:
        R = np.vstack([R, height_constraints(n, fixed)])
    _, s, vt = np.linalg.svd(R, full_matrices=True)
    cut = tol.rank * s[0]
    rank = int(np.sum(s > cut))
    kernel = vt[rank:]
    if rank == 0:
        gap = 0.0
    elif rank < len(s):
        gap = float(s[rank - 1] / max(s[rank], 1e-300))
    else:
        gap = float("inf")
    K = trivial_motion_basis(mesh)
    if fixed:
        # Killing fields that keep the pinned heights
        CK = height_constraints(n, fixed) @ K.T
        r, sk = _rank(CK, tol.rank)
        _, _, kvt = np.linalg.svd(CK, full_matrices=True)
        K = kvt[r:] @ K
    trivial_dim = int(np.linalg.matrix_rank(K, tol=tol.rank * np.linalg.norm(K, 2))) if len(K) else 0
    residual = float(np.max(np.abs(R @ K.T))) / s[0] if len(K) else 0.0
    return FlexReport(R.shape, rank, kernel.reshape(-1, n, 3), trivial_dim, s, gap, residual, fixed)
