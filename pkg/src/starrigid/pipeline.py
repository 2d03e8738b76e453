"""End-to-end checks run by the command line.

Each ``run_*`` function returns ``(results, verdicts, code)``: two plain
dictionaries in a fixed key order, ready for the report, and an exit code
from :class:`Status`.
"""

from __future__ import annotations

import enum
import logging

import numpy as np

from .geometry import GeometryError
from .hats import (Hat, StalledCompletion, complete, diagonally_dominant, flip,
                   hull_distance, lambda_G_analytic, lambda_G_fd, update_residual)
from .mesh import MeshError, TriMesh, build_star_complex, weak_convexity_check
from .projective import HomotopyInconsistency, homotopy_signature, polyhedron_to_hat, pullback_polyhedron
from .rigidity import flex_report
from .star import lambda_P, remark_cross_check

logger = logging.getLogger(__name__)

UPDATE_LAW_TOL = 2e-6
ANALYTIC_TOL = 1e-6


class Status(enum.IntEnum):
    PASS = 0
    VERDICT_FAILURE = 1
    INPUT_ERROR = 2
    INCONSISTENT = 3


def error_record(exc: BaseException) -> dict:
    rec = {"type": type(exc).__name__, "message": str(exc)}
    for attr in ("index", "simplex", "invariant"):
        value = getattr(exc, attr, None)
        if value is not None:
            rec[attr] = value
    return rec


def mesh_stats(mesh: TriMesh) -> dict:
    n, e, f = mesh.n_vertices, len(mesh.edges()), len(mesh.triangles)
    return {"vertices": n, "edges": e, "faces": f, "closed": mesh.closed,
            "euler_characteristic": n - e + f,
            "volume": float(mesh.volume()) if mesh.closed else None}


def _matrix_block(M) -> dict:
    out = M.summary()
    out["positive_definite"] = M.positive_definite
    out["min_eigenvalue"] = M.min_eigenvalue if M.size else None
    out["relative_symmetry_defect"] = M.relative_defect
    return out


def star_section(mesh: TriMesh, apex: int) -> dict:
    """Star complex, curvature matrix and rigidity correspondence from one apex."""
    try:
        sc = build_star_complex(mesh, apex)
    except (MeshError, GeometryError) as exc:
        return {"apex": apex, "star_shaped": False, "error": error_record(exc)}
    lam = lambda_P(sc)
    rc = remark_cross_check(sc.mesh, sc, lam)
    return {
        "apex": apex,
        "star_shaped": True,
        "simplices": len(sc.simplices),
        "interior_edges": [list(e) for e in sc.interior_edges],
        "lambda_P": _matrix_block(lam),
        "kernel_cross_check": {"flex_dimension": rc.flex_dimension, "lambda_kernel": rc.lambda_kernel,
                   "consistent": rc.consistent, "borderline": rc.borderline,
                   "rigidity_gap": float(rc.rigidity_gap)},
    }


def run_analyze(mesh: TriMesh, apices) -> tuple[dict, dict, Status]:
    """Weak convexity, rigidity and the per-apex curvature matrices.

    ``apices`` is a list of vertex indices; with more than one (auto mode)
    an apex from which the surface is not star-shaped is reported but is
    not a failure by itself.
    """
    wc = weak_convexity_check(mesh)
    fr = flex_report(mesh, tol=mesh.tol)
    stars = [star_section(mesh, a) for a in apices]
    ok = [s for s in stars if s["star_shaped"]]
    results = {
        "mesh": mesh_stats(mesh),
        "weak_convexity": {"weakly_convex": wc.weakly_convex, "witness": wc.witness},
        "rigidity": fr.summary(),
        "stars": stars,
    }
    verdicts = {
        "weakly_convex": wc.weakly_convex,
        "infinitesimally_rigid": fr.rigid,
        "star_shaped_apices": [s["apex"] for s in ok],
        "lambda_P_positive_definite": bool(ok) and all(s["lambda_P"]["positive_definite"] for s in ok),
        "kernel_cross_check_consistent": all(s["kernel_cross_check"]["consistent"] for s in ok),
    }
    if any(not s["kernel_cross_check"]["consistent"] and not s["kernel_cross_check"]["borderline"] for s in ok):
        code = Status.INCONSISTENT
    elif not (verdicts["weakly_convex"] and verdicts["infinitesimally_rigid"]
              and verdicts["lambda_P_positive_definite"] and verdicts["kernel_cross_check_consistent"]):
        code = Status.VERDICT_FAILURE
    elif len(apices) == 1 and not ok:
        code = Status.VERDICT_FAILURE
    else:
        code = Status.PASS
    return results, verdicts, code


def hat_section(hat: Hat) -> dict:
    lam = lambda_G_fd(hat)
    fr = flex_report(hat.mesh, fixed_heights=hat.boundary, tol=hat.tol)
    convex = hat.is_convex()
    out = {
        "vertices": hat.mesh.n_vertices,
        "boundary": list(hat.boundary),
        "interior": list(hat.interior),
        "faces": len(hat.faces),
        "convex": convex,
        "concave_edges": sorted([list(e) for e, x in hat.concavity().items() if x > hat.tol.angle]),
        "lambda_H": _matrix_block(lam),
        "constrained_rigidity": fr.summary(),
    }
    if convex and lam.size:
        an = lambda_G_analytic(hat)
        scale = max(float(np.max(np.abs(lam.matrix))), 1e-300)
        out["analytic"] = {"max_relative_difference": float(np.max(np.abs(an.matrix - lam.matrix))) / scale,
                           "diagonally_dominant": diagonally_dominant(an)}
    return out


def completion_section(hat: Hat) -> dict:
    """Complete ``hat`` and check every glued simplex against fresh matrices."""
    final, steps = complete(hat)
    chain = []
    current, lam_cur = hat, lambda_G_fd(hat)
    for step in steps:
        nxt = flip(current, step.lower)
        lam_next = lambda_G_fd(nxt)
        rec = step.summary()
        # the more excavated hat carries the extra M_S
        rec["update_residual"] = update_residual(lam_next, lam_cur, step)
        chain.append(rec)
        current, lam_cur = nxt, lam_next
    return {"steps": chain, "final_convex": final.is_convex(),
            "hull_distance": float(hull_distance(final)),
            "final_lambda_H": _matrix_block(lam_cur)}


def run_hat(hat: Hat | None = None, mesh: TriMesh | None = None, apex: int | None = None,
            do_complete: bool = False, homotopy=None) -> tuple[dict, dict, Status]:
    """Hat analysis for a hat given directly or extracted from ``mesh`` at ``apex``."""
    results: dict = {}
    errors: list = []
    if hat is None:
        hat, keep = polyhedron_to_hat(mesh, apex, check="weak")
        results["vertex_map"] = list(keep)
    results["hat"] = hs = hat_section(hat)
    verdicts = {
        "lambda_H_positive_definite": hs["lambda_H"]["positive_definite"],
        "constrained_rigid": hs["constrained_rigidity"]["verdict"] == "infinitesimally_rigid",
    }
    if "analytic" in hs:
        verdicts["analytic_agrees"] = hs["analytic"]["max_relative_difference"] <= ANALYTIC_TOL
        verdicts["diagonally_dominant"] = hs["analytic"]["diagonally_dominant"]
    code = Status.PASS
    if do_complete:
        try:
            results["completion"] = cs = completion_section(hat)
        except StalledCompletion as exc:
            errors.append(error_record(exc))
            code = Status.INCONSISTENT
        else:
            verdicts["completion_convex"] = cs["final_convex"]
            verdicts["steps_rank_one"] = all(s["rank_one"] for s in cs["steps"])
            verdicts["update_law"] = all(s["update_residual"] <= UPDATE_LAW_TOL for s in cs["steps"])
    if homotopy is not None:
        if mesh is None:
            mesh, apex = pullback_polyhedron(hat)
        try:
            results["homotopy"] = hr = homotopy_signature(mesh, apex, tuple(homotopy)).summary()
        except HomotopyInconsistency as exc:
            errors.append(error_record(exc))
            code = Status.INCONSISTENT
        else:
            verdicts["homotopy_constant"] = hr["constant_signature"]
            verdicts["homotopy_positive_definite"] = all(r["signature"][1:] == [0, 0] for r in hr["rows"])
    if errors:
        results["errors"] = errors
    if code == Status.PASS and not all(v for v in verdicts.values()):
        code = Status.VERDICT_FAILURE
    return results, verdicts, code


__all__ = ["Status", "error_record", "mesh_stats", "run_analyze", "run_hat", "star_section",
           "hat_section", "completion_section"]
