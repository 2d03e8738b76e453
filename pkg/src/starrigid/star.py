"""Cone angles around the interior edges of a star complex and their
derivative matrix with respect to the interior edge lengths."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import geometry
from .geometry import GeometryError
from .mesh import StarComplex, TriMesh
from .rigidity import flex_report
from .spectral import CurvatureMatrix, richardson_jacobian

TWO_PI = 2.0 * math.pi
# permutation moving vertex j+1 of a cone (apex, a, b, c) to position 1
_APEX_EDGE_PERM = ((0, 1, 2, 3), (0, 2, 1, 3), (0, 3, 1, 2))


class SimplexDegeneration(GeometryError):
    def __init__(self, message, simplex: int | None = None):
        super().__init__(message)
        self.simplex = simplex


def _checked_dihedrals(L):
    try:
        return geometry.dihedral_01(L)
    except GeometryError:
        bad = [k for k in range(len(L)) if not _realizable(L[k])]
        raise SimplexDegeneration(f"simplex {bad[0]} degenerates", bad[0]) from None


def _realizable(lengths) -> bool:
    try:
        geometry.realize(lengths)
    except GeometryError:
        return False
    return True


def cone_angles(sc: StarComplex, lengths) -> np.ndarray:
    """Total dihedral angle around each interior edge at the given interior lengths."""
    theta = np.zeros(sc.m)
    if not sc.m:
        return theta
    L = sc.simplex_lengths(lengths)
    for j, perm in enumerate(_APEX_EDGE_PERM):
        rows = np.flatnonzero(sc.slots[:, j] >= 0)
        if not rows.size:
            continue
        try:
            ang = _checked_dihedrals(geometry.permute_lengths(L[rows], perm))
        except SimplexDegeneration as exc:
            k = int(rows[exc.simplex])
            raise SimplexDegeneration(
                f"simplex {sc.simplices[k]} degenerates at the supplied lengths", k) from None
        np.add.at(theta, sc.slots[rows, j], ang)
    return theta


def lambda_P(sc: StarComplex) -> CurvatureMatrix:
    """d(theta_i)/d(l_j) at the reference lengths."""
    ref = sc.interior_lengths
    J = richardson_jacobian(lambda l: cone_angles(sc, l), ref)
    scale = 1.0 / float(np.mean(ref)) if sc.m else 0.0
    return CurvatureMatrix.from_raw(J, sc.interior_edges, scale=scale, tol=sc.mesh.tol)


def _edge_dihedral_sums(sc: StarComplex, L):
    """Sum of simplex dihedral angles per global edge."""
    D = geometry.all_dihedrals(L)
    out: dict = {}
    for k, simplex in enumerate(sc.simplices):
        for q, (a, b) in enumerate(geometry.PAIRS):
            key = tuple(sorted((simplex[a], simplex[b])))
            out[key] = out.get(key, 0.0) + D[k, q]
    return out


def regge_energy(sc: StarComplex, lengths=None) -> float:
    """sum_interior l (2 pi - theta) + sum_surface l (pi - dihedral)."""
    lengths = sc.interior_lengths if lengths is None else np.asarray(lengths, dtype=float)
    L = sc.simplex_lengths(lengths)
    sums = _edge_dihedral_sums(sc, L)
    V = sc.mesh.vertices
    interior = {tuple(sorted(e)): lengths[k] for k, e in enumerate(sc.interior_edges)}
    F = 0.0
    for e, phi in sums.items():
        if e in interior:
            F += interior[e] * (TWO_PI - phi)
        else:
            F += float(np.linalg.norm(V[e[0]] - V[e[1]])) * (math.pi - phi)
    return F


def regge_hessian(sc: StarComplex, lengths=None, rel_step: float = 2e-4) -> np.ndarray:
    """Second-order central differences of :func:`regge_energy`.

    Double precision puts a floor of roughly ``eps * |F| / step**2`` on the
    error, so the step cannot shrink much below ``2e-4 * l``.  Near-flat
    cones have Taylor radius close to that step, and there the result is
    only a rough check.
    """
    x0 = sc.interior_lengths if lengths is None else np.asarray(lengths, dtype=float)
    m = len(x0)
    h = rel_step * x0
    H = np.zeros((m, m))
    f0 = regge_energy(sc, x0)

    def f(di, dj, i, j):
        x = x0.copy()
        x[i] += di
        x[j] += dj
        return regge_energy(sc, x)

    for i in range(m):
        H[i, i] = (f(h[i], 0, i, i) - 2 * f0 + f(-h[i], 0, i, i)) / h[i] ** 2
        for j in range(i + 1, m):
            H[i, j] = H[j, i] = (f(h[i], h[j], i, j) - f(h[i], -h[j], i, j)
                                 - f(-h[i], h[j], i, j) + f(-h[i], -h[j], i, j)) / (4 * h[i] * h[j])
    return H


@dataclass(frozen=True)
class RemarkCheck:
    """Flex count of the surface against the nullity of its curvature matrix."""

    flex_dimension: int  # dim ker R - trivial dimension
    lambda_kernel: int
    rigidity_gap: float
    min_abs_eigenvalue: float
    borderline: bool

    @property
    def consistent(self) -> bool:
        return self.flex_dimension == self.lambda_kernel


def remark_cross_check(mesh: TriMesh, sc: StarComplex, lam: CurvatureMatrix | None = None) -> RemarkCheck:
    lam = lambda_P(sc) if lam is None else lam
    fr = flex_report(mesh, tol=mesh.tol)
    flex = fr.kernel_dimension - fr.trivial_dimension
    kern = lam.kernel_dimension()
    eig = float(np.min(np.abs(lam.eigenvalues))) if lam.size else float("inf")
    # within a factor 100 of either cut counts as borderline
    borderline = fr.gap < 100 or (lam.size > 0 and
                                  1e-2 < eig / (mesh.tol.rank * max(lam.scale, np.max(np.abs(lam.eigenvalues)))) < 1e2)
    return RemarkCheck(flex, kern, fr.gap, eig, bool(borderline))
