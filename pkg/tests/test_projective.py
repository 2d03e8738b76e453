import numpy as np
import pytest

from oracles import numerical_rank, rigidity_rows
from starrigid.gallery import flat_vertex_tetra, octa, random_convex_hat, star_pullback, tetra
from starrigid.hats import lambda_G_fd
from starrigid.mesh import build_star_complex
from starrigid.projective import (ProjectiveError, ProjectiveMap, build_phi, homotopy_signature,
                                  polyhedron_to_hat, pullback_polyhedron, transport_killing,
                                  vertical_subspace_residual)
from starrigid.rigidity import KillingField, flex_report
from starrigid.star import lambda_P

SAMPLES = (0.0, 0.25, 0.5, 0.75, 0.9)


def non_adjacent(polygons, n, apex):
    adjacent = {w for p in polygons if apex in p for w in p}
    return [w for w in range(n) if w not in adjacent]


def sample_points(mesh, apex):
    """Vertices other than the apex, face centroids away from it, and
    midpoints of the segments from the apex (inside the polyhedron)."""
    V = mesh.vertices
    others = np.delete(V, apex, axis=0)
    cent = [V[list(t)].mean(axis=0) for t in mesh.triangles if apex not in t]
    return np.vstack([others, cent, (others + V[apex]) / 2])


def apex_axis_field(bridge, axis):
    """Rotation about ``axis`` (frame coordinates) through the apex, in world coordinates."""
    w = bridge.frame.rotation.T @ np.asarray(axis, dtype=float)
    return KillingField(-np.cross(w, bridge.frame.origin), w)


# ------------------------------------------------------------------ map


def test_axis_point():
    c = 2.5
    F = build_phi(octa(), 0)
    pm = ProjectiveMap(np.array([[1.0, 0, 0, 0], [0, 1, 0, 0], [0, 0, c, -1], [0, 0, 1, 0]]))
    assert pm([0, 0, 1]) == pytest.approx([0, 0, c - 1], abs=1e-15)
    p = F.frame.from_frame(np.array([0.0, 0.0, 1.0]))
    assert F.phi(p) == pytest.approx([0, 0, F.c - 1], abs=1e-12)


@pytest.mark.parametrize("shape", ["octa", "pullback"])
def test_segments_through_apex_become_vertical(shape):
    if shape == "octa":
        mesh, apex = octa(), 0
    else:
        s = star_pullback(6, 5, 2, 7)
        mesh, apex = s.mesh, s.apex
    b = build_phi(mesh, apex)
    a = mesh.vertices[apex]
    for v in range(mesh.n_vertices):
        if v == apex:
            continue
        pts = a + np.linspace(0.2, 1.0, 5)[:, None] * (mesh.vertices[v] - a)
        img = b.phi(pts)
        assert np.max(np.abs(img[:, :2] - img[-1, :2])) <= 1e-10 * max(1.0, np.abs(img).max())
        assert np.all(np.diff(img[:, 2]) > 0)


def test_octahedron_image_heights():
    m = octa()
    b = build_phi(m, 0)
    z = b.phi(m.vertices[1:])[:, 2]
    assert z.min() == pytest.approx(1.0, abs=1e-12)
    assert np.all(z >= 1 - 1e-12)


def test_map_and_inverse():
    s = star_pullback(7, 6, 3, 11)
    b = build_phi(s.mesh, s.apex)
    P = np.delete(s.mesh.vertices, s.apex, axis=0)
    assert np.max(np.abs(b.phi.inverse(b.phi(P)) - P)) <= 1e-10
    for t in SAMPLES[1:]:
        pm = b.at(t)
        assert np.max(np.abs(pm.inverse(pm(s.mesh.vertices)) - s.mesh.vertices)) <= 1e-10


def test_identity_at_zero_and_full_map_at_one():
    s = star_pullback(6, 4, 1, 7)
    b = build_phi(s.mesh, s.apex)
    V = s.mesh.vertices
    assert np.max(np.abs(b.at(0.0)(V) - V)) <= 1e-12
    P = np.delete(V, s.apex, axis=0)
    assert b.at(1.0)(P) == pytest.approx(b.frame.from_frame(b.phi(P)), abs=1e-10)


def test_infinity_plane_misses_polyhedron():
    m = octa()
    b = build_phi(m, 0)
    margins = [b.infinity_margin(t) for t in SAMPLES]
    assert margins[0] == np.inf and all(x > y > 0 for x, y in zip(margins, margins[1:]))
    for t in SAMPLES[1:]:
        w = b.at(t).weights(m.vertices)
        assert np.all(w > 0) or np.all(w < 0)


def test_non_extreme_apex_rejected():
    with pytest.raises(ProjectiveError):
        build_phi(flat_vertex_tetra(), 4)


def test_invalid_homotopy_parameter():
    with pytest.raises(ValueError):
        build_phi(octa(), 0).at(1.5)


# ---------------------------------------------------------------- hats


@pytest.mark.parametrize("apex", range(4))
def test_tetrahedron_hat(apex):
    hat, keep = polyhedron_to_hat(tetra(), apex)
    assert len(hat.boundary) == 3 and hat.interior == () and len(hat.faces) == 1
    assert apex not in keep


def test_octahedron_hat():
    hat, keep = polyhedron_to_hat(octa(), 0)
    assert len(hat.boundary) == 4 and len(hat.interior) == 1 and len(hat.faces) == 4
    assert keep[hat.interior[0]] == 1
    assert hat.is_convex()


def test_corpus_hats(gallery_corpus):
    for shape in gallery_corpus:
        m, apex = shape.mesh, shape.apex
        hat, keep = polyhedron_to_hat(m, apex)
        far = non_adjacent(m.polygons or m.triangles, m.n_vertices, apex)
        assert sorted(keep[v] for v in hat.interior) == far
        assert len(hat.faces) == sum(1 for t in m.refan(apex).triangles if apex not in t)
        if "convex" in shape.classes:
            assert hat.is_convex()
        r = flex_report(hat.mesh, fixed_heights=hat.boundary)
        assert r.rigid, shape.name


@pytest.mark.parametrize("seed", range(3))
def test_pullback_round_trip_keeps_combinatorics(seed):
    hat = random_convex_hat(6, 4, seed)
    mesh, apex = pullback_polyhedron(hat)
    back, keep = polyhedron_to_hat(mesh, apex)
    assert {frozenset(keep[v] for v in t) for t in back.faces} == {frozenset(t) for t in hat.faces}
    assert back.is_convex()
    # same signature on both sides of the bridge
    assert lambda_G_fd(back).positive_definite and lambda_P(build_star_complex(mesh, apex)).positive_definite


# ------------------------------------------------------------ transport


def test_zero_field():
    b = build_phi(octa(), 0)
    out = transport_killing(b.phi, KillingField.zero(), sample_points(octa(), 0))
    assert out.is_killing
    assert np.all(out.field.translation == 0) and np.all(out.field.rotation == 0)


@pytest.mark.parametrize("name", ["octa", "icosa", "star_pullback"])
def test_random_fields_stay_killing(name, gallery_corpus):
    shape = next(s for s in gallery_corpus if s.name == name)
    mesh, apex = shape.mesh, shape.apex
    b = build_phi(mesh, apex)
    S = sample_points(mesh, apex)
    X = b.phi(np.delete(mesh.vertices, apex, axis=0))
    keep = [v for v in range(mesh.n_vertices) if v != apex]
    pos = {v: k for k, v in enumerate(keep)}
    edges = [(pos[a], pos[c]) for a, c in mesh.edges() if apex not in (a, c)]
    R = rigidity_rows(X, edges)
    rng = np.random.default_rng(5)
    for _ in range(100):
        U = KillingField(rng.normal(size=3), rng.normal(size=3))
        out = transport_killing(b.phi, U, S)
        assert out.antisymmetry <= 1e-10 and out.fit_residual <= 1e-10
        # oracle: transported vertex velocities satisfy every first-order length constraint
        vel = np.array([b.phi.psi(x) @ U(x) for x in np.delete(mesh.vertices, apex, axis=0)])
        assert np.linalg.norm(R @ vel.ravel()) <= 1e-9 * np.linalg.norm(R) * np.linalg.norm(vel)
        # and the fitted field reproduces them
        assert np.max(np.abs(np.array([out.field(x) for x in X]) - vel)) <= 1e-9 * np.abs(vel).max()


def test_apex_axis_rotations():
    s = star_pullback(6, 5, 2, 7)
    for mesh, apex in ((octa(), 0), (s.mesh, s.apex)):
        b = build_phi(mesh, apex)
        S = sample_points(mesh, apex)
        L = np.ptp(b.phi(S), axis=0).max()
        vert = transport_killing(b.phi, apex_axis_field(b, (0, 0, 1)), S)
        assert vert.is_killing and vertical_subspace_residual(vert.field, L) <= 1e-10
        assert np.linalg.norm(vert.field.rotation) > 0
        for axis in ((1, 0, 0), (0, 1, 0), (0.6, 0.8, 0)):
            out = transport_killing(b.phi, apex_axis_field(b, axis), S)
            assert out.is_killing and vertical_subspace_residual(out.field, L) <= 1e-10
            # a horizontal axis gives a pure horizontal translation
            assert np.linalg.norm(out.field.translation[:2]) > 1e3 * L * np.linalg.norm(out.field.rotation)


def test_coplanar_samples_rejected():
    m = tetra()
    b = build_phi(m, 0)
    face = m.vertices[1:]
    with pytest.raises(ProjectiveError):
        transport_killing(b.phi, KillingField([1.0, 0, 0], [0, 0, 1.0]), np.vstack([face, face.mean(axis=0)]))
    out = transport_killing(b.phi, KillingField([1.0, 0, 0], [0, 0, 1.0]), sample_points(m, 0))
    assert out.is_killing


def test_generic_field_leaves_the_subspace():
    b = build_phi(octa(), 0)
    out = transport_killing(b.phi, KillingField([0, 0, 1.0], [0, 0, 0]), sample_points(octa(), 0))
    assert out.is_killing and vertical_subspace_residual(out.field) > 1e-3


def test_transported_kernel_dimension_matches():
    # rigid stays rigid: constrained kernel of the hat equals the Killing fields fixing heights
    s = star_pullback(6, 5, 2, 7)
    hat, _ = polyhedron_to_hat(s.mesh, s.apex)
    R = rigidity_rows(hat.vertices, hat.mesh.edges())
    C = np.zeros((len(hat.boundary), R.shape[1]))
    for row, v in enumerate(hat.boundary):
        C[row, 3 * v + 2] = 1
    A = np.vstack([R, C])
    assert A.shape[1] - numerical_rank(A) == 3


# ------------------------------------------------------------- homotopy


def test_octahedron_homotopy():
    res = homotopy_signature(octa(), 0, SAMPLES)
    assert res.signatures == [(1, 0, 0)] * len(SAMPLES) and res.constant
    for row in res.rows:
        m = octa()
        b = build_phi(m, 0)
        mt = m if row.t == 0 else m.with_vertices(b.at(row.t)(m.vertices))
        assert row.matrix.matrix == pytest.approx(lambda_P(build_star_complex(mt, 0)).matrix, abs=0)
    assert res.hat_matrix.positive_definite


def test_homotopy_start_is_lambda_p_exactly(gallery_corpus):
    for shape in gallery_corpus[:6]:
        res = homotopy_signature(shape.mesh, shape.apex, (0.0,), with_hat=False)
        ref = lambda_P(build_star_complex(shape.mesh, shape.apex))
        assert np.array_equal(res.rows[0].matrix.matrix, ref.matrix)
        assert res.hat_matrix is None


def test_homotopy_rejects_t_one():
    with pytest.raises(ValueError):
        homotopy_signature(octa(), 0, (0.0, 1.0))


def test_homotopy_summary_is_plain():
    import json

    json.dumps(homotopy_signature(octa(), 0, (0.0, 0.5)).summary())
