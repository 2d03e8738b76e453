import math

import numpy as np
import pytest

from starrigid.gallery import corpus, flat_vertex_tetra, octa, tetra
from starrigid.hats import Hat
from starrigid.mesh import TriMesh

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def pyramid_hat(apex_height: float = 2.0) -> Hat:
    """Unit square at height 1 with a vertex above its centre."""
    V = np.array([(-0.5, -0.5, 1), (0.5, -0.5, 1), (0.5, 0.5, 1), (-0.5, 0.5, 1), (0, 0, apex_height)])
    tris = [(0, 1, 4), (1, 2, 4), (2, 3, 4), (3, 0, 4)]
    return Hat.from_mesh(TriMesh(V, tris), check="convex")


def regular_octahedron() -> TriMesh:
    return octa()


@pytest.fixture(scope="session")
def gallery_corpus():
    return corpus()


@pytest.fixture
def octahedron():
    return octa()


@pytest.fixture
def tetrahedron():
    return tetra()


@pytest.fixture
def flat_tetra():
    return flat_vertex_tetra()


@pytest.fixture
def pyramid():
    return pyramid_hat()


def random_rotation(rng) -> np.ndarray:
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


TWO_PI = 2 * math.pi
