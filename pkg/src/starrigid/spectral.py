"""Finite-difference Jacobians and labelled symmetric matrices."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .geometry import GeometryError
from .tolerances import DEFAULT, Tolerances

REL_STEP = 1e-5
REFINE_RTOL = 1e-9
MAX_REFINE = 4


class StencilError(GeometryError):
    """The finite-difference stencil left the domain of the function."""


def richardson_jacobian(f: Callable[[np.ndarray], np.ndarray], x0, rel_step: float = REL_STEP,
                        rtol: float = REFINE_RTOL, max_refine: int = MAX_REFINE) -> np.ndarray:
    """Jacobian of ``f`` at ``x0``.

    Central differences with step ``rel_step * |x_j|`` combined with the
    half step by one Richardson extrapolation.  If the stencil leaves the
    domain the step is shrunk once by 10x before giving up.

    The extrapolated column is then recomputed at steps divided by 4 while
    successive values differ by more than ``rtol`` (relative to the column)
    and the difference keeps shrinking, for at most ``max_refine`` levels.
    """
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    cols = []
    for j in range(n):
        base = rel_step * max(abs(x0[j]), 1e-3)
        for attempt, step in enumerate((base, base / 10)):
            try:
                d1 = _central(f, x0, j, step)
                d2 = _central(f, x0, j, step / 2)
                break
            except GeometryError as exc:
                if attempt == 1:
                    raise StencilError(f"stencil for coordinate {j} degenerates: {exc}") from exc
        best = (4 * d2 - d1) / 3
        last_change = np.inf
        for _ in range(max_refine):
            step /= 4
            d1 = _central(f, x0, j, step)
            d2 = _central(f, x0, j, step / 2)
            cur = (4 * d2 - d1) / 3
            change = float(np.max(np.abs(cur - best))) if cur.size else 0.0
            # the coarser value is already good to about ``change`` and carries less roundoff
            if change <= rtol * (float(np.max(np.abs(cur))) if cur.size else 0.0) or change >= last_change:
                break
            best, last_change = cur, change
        cols.append(best)
    if not cols:
        return np.zeros((0, 0))
    return np.column_stack(cols)


def _central(f, x0, j, h):
    xp = x0.copy()
    xm = x0.copy()
    xp[j] += h
    xm[j] -= h
    return (np.asarray(f(xp)) - np.asarray(f(xm))) / (2 * h)


def signature(eigenvalues, tol: Tolerances = DEFAULT, scale: float = 0.0) -> tuple[int, int, int]:
    """(n_+, n_0, n_-) with the zero band ``tol.eig * max(max|ev|, scale)``."""
    ev = np.asarray(eigenvalues, dtype=float)
    if ev.size == 0:
        return (0, 0, 0)
    cut = tol.eig * max(float(np.max(np.abs(ev))), scale)
    return (int(np.sum(ev > cut)), int(np.sum(np.abs(ev) <= cut)), int(np.sum(ev < -cut)))


@dataclass(frozen=True, eq=False)
class CurvatureMatrix:
    """A symmetric matrix indexed by edges or vertices, with its spectrum.

    ``scale`` is the natural magnitude of the entries (e.g. one over a
    typical length).  Zero tests use it as a floor so that an all-zero
    matrix still reads as singular instead of being judged against its own
    rounding noise.
    """

    matrix: np.ndarray
    labels: tuple
    defect: float = 0.0
    scale: float = 0.0
    tol: Tolerances = field(default=DEFAULT, repr=False)
    eigenvalues: np.ndarray = field(init=False)

    def __post_init__(self):
        A = np.array(self.matrix, dtype=float).reshape(len(self.labels), len(self.labels))
        A.setflags(write=False)
        object.__setattr__(self, "matrix", A)
        ev = np.linalg.eigvalsh(A) if A.size else np.zeros(0)
        object.__setattr__(self, "eigenvalues", ev)

    @classmethod
    def from_raw(cls, raw, labels: Sequence, scale: float = 0.0,
                 tol: Tolerances = DEFAULT) -> "CurvatureMatrix":
        """Symmetrize ``raw`` and record max|raw - raw.T| as the defect."""
        raw = np.asarray(raw, dtype=float).reshape(len(labels), len(labels))
        defect = float(np.max(np.abs(raw - raw.T))) if raw.size else 0.0
        return cls((raw + raw.T) / 2, tuple(labels), defect, scale, tol)

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def signature(self) -> tuple[int, int, int]:
        return signature(self.eigenvalues, self.tol, self.scale)

    @property
    def relative_defect(self) -> float:
        scale = float(np.max(np.abs(self.matrix))) if self.size else 0.0
        return self.defect / scale if scale > 0 else 0.0

    @property
    def min_eigenvalue(self) -> float:
        return float(self.eigenvalues[0]) if self.size else float("inf")

    @property
    def positive_definite(self) -> bool:
        # an empty matrix is vacuously positive definite
        s = self.signature
        return s[1] == 0 and s[2] == 0

    def kernel_dimension(self, rank_tol: float | None = None) -> int:
        if not self.size:
            return 0
        s = np.linalg.svd(self.matrix, compute_uv=False)
        cut = (self.tol.rank if rank_tol is None else rank_tol) * max(s[0], self.scale)
        return int(np.sum(s <= cut))

    def summary(self) -> dict:
        return {
            "labels": [list(x) if isinstance(x, tuple) else x for x in self.labels],
            "entries": self.matrix.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "signature": list(self.signature),
            "symmetry_defect": self.defect,
        }
