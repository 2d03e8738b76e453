import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import TWO_PI, pyramid_hat
from oracles import derivative, lambda_hat_oracle, m_s_oracle, theta_pyramid
from starrigid.gallery import excavated_hat, excavation_sampler, random_convex_hat, random_simplex
from starrigid.hats import (FlipError, Hat, HatError, complete, compute_M_S, diagonally_dominant, excavate,
                            flip, hull_distance, lambda_G_analytic, lambda_G_fd, theta_of_heights,
                            update_residual, upper_hull_hat, write_hat_off)
from starrigid.hull import bbox_diagonal, convex_hull_3d
from starrigid.mesh import TriMesh, load_mesh
from starrigid.rigidity import flex_report

ANCHOR = np.array([(1, 0, 2), (-1, 0, 2), (0, 1, 1), (0, -1, 1)], dtype=float)


def edges_of(hat):
    return set(hat.mesh.edges())


def excavatable_edges(hat):
    out = []
    for e, _ in hat.interior_edges():
        try:
            excavate(hat, e)
        except (FlipError, HatError):
            continue
        out.append(e)
    return out


# ------------------------------------------------------------- pyramid


def test_pyramid_reference_angle(pyramid):
    assert theta_of_heights(pyramid) == pytest.approx([TWO_PI], abs=1e-12)


@pytest.mark.parametrize("t", [0.6, 0.8, 1.0, 1.1])
def test_pyramid_theta_closed_form(pyramid, t):
    h = pyramid.heights
    h[4] = 1 + t
    assert theta_of_heights(pyramid, h)[0] == pytest.approx(theta_pyramid(t), abs=1e-12)


def test_pyramid_lambda_is_sixteen(pyramid):
    assert derivative(theta_pyramid, 1.0) == pytest.approx(16.0, abs=1e-8)
    fd = lambda_G_fd(pyramid)
    an = lambda_G_analytic(pyramid)
    assert fd.matrix[0, 0] == pytest.approx(16.0, abs=1e-6)
    assert an.matrix[0, 0] == pytest.approx(16.0, abs=1e-6)
    assert fd.labels == an.labels == (4,)


def test_pyramid_off_export(pyramid):
    again = load_mesh(write_hat_off(pyramid))
    assert np.array_equal(again.vertices, pyramid.vertices)
    assert not again.closed


# --------------------------------------------------------- convex hats


@pytest.fixture(scope="module")
def convex_hats():
    return [random_convex_hat(nb, ni, seed) for seed, (nb, ni) in enumerate([(5, 1), (6, 3), (7, 6), (8, 10), (6, 15)])]


def test_reference_heights_are_flat(convex_hats):
    for hat in convex_hats:
        assert np.all(np.abs(theta_of_heights(hat) - TWO_PI) <= 1e-9)


def test_fd_against_arccos_oracle(convex_hats):
    for hat in convex_hats:
        fd = lambda_G_fd(hat).matrix
        ref = lambda_hat_oracle(hat)
        assert np.max(np.abs(fd - ref)) <= 1e-5 * np.max(np.abs(fd))


def test_analytic_matches_fd_and_dominates(convex_hats):
    for hat in convex_hats:
        fd, an = lambda_G_fd(hat), lambda_G_analytic(hat)
        assert fd.relative_defect <= 1e-7
        assert np.max(np.abs(fd.matrix - an.matrix)) <= 1e-6 * np.max(np.abs(fd.matrix))
        assert diagonally_dominant(an)
        assert fd.positive_definite and an.positive_definite


def test_off_diagonal_zero_without_edge(convex_hats):
    for hat in convex_hats:
        an = lambda_G_analytic(hat)
        E = edges_of(hat)
        for a, i in enumerate(an.labels):
            for b, j in enumerate(an.labels):
                if i != j and tuple(sorted((i, j))) not in E:
                    assert an.matrix[a, b] == 0


def test_analytic_rejects_nonconvex():
    eh = excavated_hat(6, 5, 1, 0)
    assert eh.history
    with pytest.raises(HatError):
        lambda_G_analytic(eh.hat)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(-3, 3), st.floats(-3, 3))
def test_lambda_scales_inversely_and_ignores_translation(s, dx, dy):
    hat = random_convex_hat(6, 3, 1)
    V = s * hat.vertices + np.array([dx, dy, 0.0])
    moved = Hat.from_mesh(hat.mesh.with_vertices(V), check="convex")
    assert lambda_G_fd(moved).matrix == pytest.approx(lambda_G_fd(hat).matrix / s, rel=1e-6, abs=1e-9)


# ------------------------------------------------------------- invariants


def test_vertex_below_plane_rejected():
    V = pyramid_hat().vertices.copy()
    V[0, 2] = -0.1
    with pytest.raises(HatError) as exc:
        Hat.from_mesh(TriMesh(V, pyramid_hat().faces))
    assert exc.value.invariant == "heights"


def test_inner_vertex_dipping_below_is_not_extreme():
    # apex pushed below the boundary: still a disk, but vertex 4 sits inside the shadow hull
    V = pyramid_hat().vertices.copy()
    V[4, 2] = 0.5
    with pytest.raises(HatError) as exc:
        Hat.from_mesh(TriMesh(V, pyramid_hat().faces))
    assert exc.value.invariant == "weakly_convex" and exc.value.index == 4


def test_folded_shadow_rejected():
    V = pyramid_hat().vertices.copy()
    V[4, :2] = (0.9, 0.0)
    with pytest.raises(HatError) as exc:
        Hat.from_mesh(TriMesh(V, pyramid_hat().faces))
    assert exc.value.invariant in ("normal", "injective")


def test_closed_surface_is_not_a_hat(octahedron):
    with pytest.raises(HatError):
        Hat.from_mesh(octahedron)


def test_convex_check_flags_excavated_hat():
    eh = excavated_hat(6, 5, 2, 3)
    Hat.from_mesh(eh.hat.mesh, eh.hat.lengths, check="weak")
    with pytest.raises(HatError) as exc:
        Hat.from_mesh(eh.hat.mesh, eh.hat.lengths, check="convex")
    assert exc.value.invariant == "convex"


# ---------------------------------------------------------------- M_S


def test_anchor_kernel_and_positive_deformation():
    step = compute_M_S(ANCHOR)
    M = step.matrix.matrix
    top = step.eigenvalues[-1]
    for v in ([1, 1, 1, 1], [1, -1, 0, 0], [0, 0, 1, -1]):
        assert np.linalg.norm(M @ np.array(v, dtype=float)) <= 1e-8 * top
    dh = np.array([1.0, 1.0, -1.0, -1.0])
    assert dh @ M @ dh > 0
    assert step.rank_one()


def test_anchor_against_arccos_oracle():
    M = compute_M_S(ANCHOR).matrix.matrix
    assert np.max(np.abs(M - m_s_oracle(ANCHOR))) <= 1e-7


def test_random_simplices_rank_one():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        P = random_simplex(rng)
        step = compute_M_S(P)
        ev = step.eigenvalues
        assert step.matrix.relative_defect <= 1e-7
        assert np.all(np.abs(ev[:3]) < 1e-8 * ev[3])
        assert np.max(np.abs(step.matrix.matrix - m_s_oracle(P))) <= 1e-6 * ev[3]


def test_m_s_labels_follow_diagonals():
    P = ANCHOR[[2, 0, 3, 1]]
    step = compute_M_S(P, upper=(1, 3), lower=(0, 2), labels=("a", "b", "c", "d"))
    assert step.vertices == ("b", "d", "a", "c")
    assert step.matrix.matrix == pytest.approx(compute_M_S(ANCHOR).matrix.matrix, abs=1e-9)


def test_m_s_rejects_wrong_pairing():
    with pytest.raises(FlipError):
        compute_M_S(ANCHOR, upper=(0, 2), lower=(1, 3))


# ---------------------------------------------------------- excavation


def test_two_triangle_hat():
    V = np.array([(1, 0, 2), (0, 1, 1), (-1, 0, 2), (0, -1, 1)], dtype=float)
    hat = Hat.from_mesh(TriMesh(V, [(0, 1, 2), (0, 2, 3)]), check="convex")
    new, step = excavate(hat, (0, 2))
    assert (1, 3) in edges_of(new) and not new.is_convex()
    assert list(new.concavity().values())[0] > 0
    assert lambda_G_fd(new).size == 0 and lambda_G_fd(hat).size == 0
    assert step.rank_one() and step.eigenvalues[0] >= -1e-8 * step.eigenvalues[-1]
    assert update_residual(lambda_G_fd(hat), lambda_G_fd(new), step) == 0.0


def test_update_law_small_hat():
    hat = random_convex_hat(5, 2, 4)
    edges = [e for e in excavatable_edges(hat) if set(e) & set(hat.interior)]
    assert edges
    for e in edges:
        new, step = excavate(hat, e)
        diff = lambda_hat_oracle(new) - lambda_hat_oracle(hat)
        index = {v: k for k, v in enumerate(hat.interior)}
        assert np.max(np.abs(diff - step.scatter(index, len(index)))) <= 2e-6
        assert update_residual(lambda_G_fd(hat), lambda_G_fd(new), step) <= 2e-6


def test_excavating_concave_edge_fails():
    eh = excavated_hat(6, 5, 1, 0)
    e = tuple(sorted(eh.convex_hat.opposite(eh.history[0])))
    with pytest.raises(FlipError) as exc:
        excavate(eh.hat, e)
    assert exc.value.invariant in ("convex_edge", "quad")


def test_boundary_edge_cannot_flip(pyramid):
    with pytest.raises(FlipError):
        flip(pyramid, (0, 1))


def test_excavate_then_complete_restores():
    hat = random_convex_hat(6, 4, 9)
    edges = excavatable_edges(hat)[:4]
    assert edges
    for e in edges:
        new, step = excavate(hat, e)
        back, steps = complete(new)
        assert len(steps) == 1
        assert {frozenset(t) for t in back.faces} == {frozenset(t) for t in hat.faces}
        # the glued simplex is the excavated one, with the same matrix
        g = steps[0]
        assert set(g.upper) == set(step.upper) and set(g.lower) == set(step.lower)
        order = [g.vertices.index(v) for v in step.vertices]
        assert np.allclose(g.matrix.matrix[np.ix_(order, order)], step.matrix.matrix, atol=1e-8)


def test_convex_hat_needs_no_steps(convex_hats):
    for hat in convex_hats:
        out, steps = complete(hat)
        assert steps == [] and out is hat


@pytest.mark.parametrize("seed", range(6))
def test_disjoint_excavations_complete_in_k_steps(seed):
    eh = excavated_hat(8, 8, 3, seed)
    _, steps = complete(eh.hat)
    assert len(steps) == len(eh.history) == eh.params["achieved"]
    assert {frozenset(s.upper) for s in steps} == {frozenset(e) for e in eh.history}


def upper_facets_oracle(hat):
    """Shadow hull facets whose outward normal points up."""
    V = hat.vertices
    P = V.copy()
    P[:, 2] = 0
    hull = convex_hull_3d(np.vstack([V, P]))
    return {frozenset(f) for f, n in zip(hull.facets, hull.normals) if n[2] > 1e-9 and max(f) < len(V)}


@pytest.mark.parametrize("seed", range(5))
def test_completion_lands_on_the_hull(seed):
    rng = np.random.default_rng(seed)
    base = random_convex_hat(7, 6, 100 + seed)
    hat, hist = excavation_sampler(base, 4, rng, disjoint=False)
    done, steps = complete(hat)
    assert done.is_convex()
    assert hull_distance(done) <= done.tol.hull * bbox_diagonal(done.shadow_points())
    V = done.vertices
    for t in done.faces:
        a, b, c = V[list(t)]
        n = np.cross(b - a, c - a)
        n /= np.linalg.norm(n)
        assert np.max((V - a) @ n) <= 1e-9 * bbox_diagonal(V)
    assert {frozenset(t) for t in done.faces} == upper_facets_oracle(done)


@pytest.mark.parametrize("seed", range(4))
def test_chain_update_law_and_monotone_positivity(seed):
    eh = excavated_hat(7, 6, 3, seed, disjoint=False)
    hat, steps = complete(eh.hat)
    cur = eh.hat
    lam_cur = lambda_G_fd(cur)
    mins = [lam_cur.min_eigenvalue]
    for step in steps:
        nxt = flip(cur, step.lower)
        lam_next = lambda_G_fd(nxt)
        # read backwards, the glue is an excavation of nxt: lam_cur = lam_next + M_S
        assert update_residual(lam_next, lam_cur, step) <= 2e-6
        mins.append(lam_next.min_eigenvalue)
        cur, lam_cur = nxt, lam_next
    assert {frozenset(t) for t in cur.faces} == {frozenset(t) for t in hat.faces}
    # excavations add PSD terms, so no hat on the chain falls below the convex one
    assert all(m > 0 for m in mins)
    for a, b in zip(mins, mins[1:]):
        assert a >= b - 1e-6


@pytest.mark.parametrize("seed", range(4))
def test_weakly_convex_hats_rigid_with_fixed_boundary(seed):
    eh = excavated_hat(6, 5, 2, seed)
    r = flex_report(eh.hat.mesh, fixed_heights=eh.hat.boundary)
    assert r.rigid and r.trivial_dimension == 3


def test_upper_hull_hat_rejects_hidden_point():
    P = np.array([(1, 0, 1), (-1, 1, 1), (-1, -1, 1), (0, 0, 0.5)], dtype=float)
    with pytest.raises(HatError) as exc:
        upper_hull_hat(P)
    assert exc.value.index == 3


def test_from_mesh_reorients_downward_faces(pyramid):
    flipped = TriMesh(pyramid.vertices, [t[::-1] for t in pyramid.faces])
    hat = Hat.from_mesh(flipped, check="convex")
    assert lambda_G_fd(hat).matrix[0, 0] == pytest.approx(16.0, abs=1e-6)
    assert math.isclose(theta_of_heights(hat)[0], TWO_PI, abs_tol=1e-12)
