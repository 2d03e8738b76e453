"""Infinitesimal rigidity of star-shaped polyhedra through curvature matrices.

The main entry points are :func:`load_mesh`, :func:`build_star_complex`,
:func:`lambda_P` and :func:`flex_report` for polyhedra, and :class:`Hat`,
:func:`lambda_G_fd` and :func:`complete` for hats.
"""

__version__ = "0.1.0"

from .geometry import GeometryError
from .hats import (ExcavationStep, Hat, HatError, StalledCompletion, complete, compute_M_S, excavate,
                   lambda_G_analytic, lambda_G_fd, theta_of_heights)
from .mesh import (MeshError, StarComplex, TriMesh, build_star_complex, load_mesh, weak_convexity_check,
                   write_off)
from .projective import build_phi, homotopy_signature, polyhedron_to_hat, transport_killing
from .rigidity import FlexReport, KillingField, flex_report, rigidity_matrix, trivial_motion_basis
from .spectral import CurvatureMatrix
from .star import cone_angles, lambda_P, regge_energy, remark_cross_check
from .tolerances import DEFAULT, Tolerances

__all__ = [
    "CurvatureMatrix", "DEFAULT", "ExcavationStep", "FlexReport", "GeometryError", "Hat", "HatError",
    "KillingField", "MeshError", "StalledCompletion", "StarComplex", "Tolerances", "TriMesh",
    "build_phi", "build_star_complex", "complete", "compute_M_S", "cone_angles", "excavate",
    "flex_report", "homotopy_signature", "lambda_G_analytic", "lambda_G_fd", "lambda_P", "load_mesh",
    "polyhedron_to_hat", "regge_energy", "remark_cross_check", "rigidity_matrix", "theta_of_heights",
    "transport_killing", "trivial_motion_basis", "weak_convexity_check", "write_off",
]
