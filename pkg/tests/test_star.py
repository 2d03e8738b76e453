import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import derivative, regge_energy_oracle, regge_hessian_mp, theta_octahedron
from starrigid.geometry import GeometryError
from starrigid.gallery import flat_vertex_tetra, octa, suspension, tetra
from starrigid.mesh import build_star_complex
from starrigid.spectral import CurvatureMatrix, StencilError, richardson_jacobian, signature
from starrigid.star import SimplexDegeneration, cone_angles, lambda_P, regge_energy, remark_cross_check


@pytest.fixture(scope="module")
def octa_star():
    return build_star_complex(octa(), 0)


def test_theta_closed_form_matches_pipeline(octa_star):
    for d in (0.0, 1e-3, 0.05, 0.2, -0.1):
        l = 2 + d
        assert cone_angles(octa_star, [l])[0] == pytest.approx(theta_octahedron(l), abs=1e-12)


def test_octahedron_lambda_is_four(octa_star):
    assert derivative(theta_octahedron, 2.0) == pytest.approx(4.0, abs=1e-9)
    lam = lambda_P(octa_star)
    assert lam.size == 1
    assert lam.matrix[0, 0] == pytest.approx(4.0, abs=1e-6)
    assert lam.signature == (1, 0, 0) and lam.positive_definite


def test_tetrahedron_lambda_is_empty():
    lam = lambda_P(build_star_complex(tetra(), 0))
    assert lam.size == 0 and lam.positive_definite and lam.signature == (0, 0, 0)


def test_degenerate_lengths_name_a_simplex(octa_star):
    with pytest.raises(SimplexDegeneration) as exc:
        cone_angles(octa_star, [2 * math.sqrt(2) + 0.1])
    assert exc.value.simplex is not None


def test_corpus_lambda_symmetric_and_positive(gallery_corpus):
    for shape in gallery_corpus:
        lam = lambda_P(build_star_complex(shape.mesh, shape.apex))
        assert lam.relative_defect <= 1e-7
        assert lam.positive_definite


@settings(max_examples=10, deadline=None)
@given(st.floats(0.05, 20))
def test_scale_covariance(s):
    m = suspension(5, 1.0, 1.3)
    a = lambda_P(build_star_complex(m, 0))
    b = lambda_P(build_star_complex(m.with_vertices(s * m.vertices), 0))
    assert b.matrix == pytest.approx(a.matrix / s, rel=1e-6)
    assert a.signature == b.signature


def test_regge_interior_term_vanishes_and_gradient_is_zero(gallery_corpus):
    for shape in gallery_corpus:
        sc = build_star_complex(shape.mesh, shape.apex)
        if not sc.m:
            continue
        x0 = sc.interior_lengths
        assert regge_energy(sc) == pytest.approx(regge_energy_oracle(sc, x0), abs=1e-9)
        for j in range(sc.m):
            h = 1e-6 * x0[j]
            e = np.zeros(sc.m)
            e[j] = h
            g = (regge_energy(sc, x0 + e) - regge_energy(sc, x0 - e)) / (2 * h)
            assert abs(g) <= 1e-7 * max(1.0, abs(regge_energy(sc)))


def test_schlafli_gradient_away_from_reference(octa_star):
    # dF/dl = 2 pi - theta at perturbed lengths as well
    l = 2.05
    g = derivative(lambda x: regge_energy(octa_star, [x]), l, h=1e-4)
    assert g == pytest.approx(2 * math.pi - theta_octahedron(l), abs=1e-8)


def test_regge_hessian_octahedron(octa_star):
    H = regge_hessian_mp(octa_star)
    assert -H[0, 0] == pytest.approx(4.0, abs=1e-9)


def test_kernel_cross_check_octahedron():
    sc = build_star_complex(octa(), 0)
    rc = remark_cross_check(sc.mesh, sc)
    assert (rc.flex_dimension, rc.lambda_kernel) == (0, 0) and rc.consistent


def test_kernel_cross_check_flat_vertex():
    m = flat_vertex_tetra()
    sc = build_star_complex(m, 3)
    lam = lambda_P(sc)
    assert lam.signature == (0, 1, 0)
    rc = remark_cross_check(sc.mesh, sc, lam)
    assert (rc.flex_dimension, rc.lambda_kernel) == (1, 1) and rc.consistent


# ----------------------------------------------------------- spectral


def test_richardson_on_polynomial():
    f = lambda x: np.array([x[0] ** 3 * x[1], np.sin(x[1])])
    J = richardson_jacobian(f, np.array([1.5, 0.7]))
    exact = np.array([[3 * 1.5**2 * 0.7, 1.5**3], [0, math.cos(0.7)]])
    assert J == pytest.approx(exact, rel=1e-9)


def limited(radius):
    """Doubling map that refuses points farther than ``radius`` from 1."""
    def f(x):
        if abs(x[0] - 1) > radius:
            raise GeometryError("outside the domain")
        return 2 * x

    return f


def test_stencil_shrinks_once():
    # the 1e-5 stencil fails, the 1e-6 one fits
    J = richardson_jacobian(limited(3e-6), np.array([1.0]), rel_step=1e-5)
    assert J[0, 0] == pytest.approx(2.0)


def test_stencil_fails_after_one_shrink():
    with pytest.raises(StencilError):
        richardson_jacobian(limited(1e-7), np.array([1.0]), rel_step=1e-5)


def test_curvature_matrix_defect_and_signature():
    raw = np.array([[2.0, 1.0 + 1e-9], [1.0, -3.0]])
    M = CurvatureMatrix.from_raw(raw, ["a", "b"])
    assert M.defect == pytest.approx(1e-9)
    assert np.array_equal(M.matrix, M.matrix.T)
    assert M.signature == (1, 0, 1)
    assert signature([1.0, 1e-12, -1.0]) == (1, 1, 1)


def test_refinement_recovers_steep_derivative():
    # a fixed 1e-5 step is too coarse for sin(10000 x); refinement brings it to roundoff
    f = lambda x: np.array([math.sin(10000 * x[0])])
    exact = 10000 * math.cos(10000.0)
    coarse = richardson_jacobian(f, np.array([1.0]), max_refine=0)[0, 0]
    fine = richardson_jacobian(f, np.array([1.0]))[0, 0]
    assert abs(coarse - exact) > 1e-8 * abs(exact)
    assert fine == pytest.approx(exact, rel=2e-9)


def test_refinement_keeps_smooth_columns():
    f = lambda x: np.array([x[0] ** 2, 3 * x[0]])
    assert richardson_jacobian(f, np.array([2.0]))[:, 0] == pytest.approx([4.0, 3.0], rel=1e-9)
