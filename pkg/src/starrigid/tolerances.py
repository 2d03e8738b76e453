"""Numerical tolerances shared by every module.

All geometric checks read their thresholds from a :class:`Tolerances`
instance.  The module-level :data:`DEFAULT` is used when none is passed.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    area: float = 1e-10
    vol: float = 1e-12
    # relative to the bounding-box diagonal of the point set
    hull: float = 1e-9
    angle: float = 1e-9
    rel: float = 1e-9
    length: float = 1e-9
    normal: float = 1e-9
    # numerical rank cut, relative to the largest singular value
    rank: float = 1e-8
    # eigenvalue cut, relative to the largest |eigenvalue|
    eig: float = 1e-8
    sym: float = 1e-7

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


DEFAULT = Tolerances()
