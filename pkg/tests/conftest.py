import numpy as np
import pytest

from curveddg.mesh import Mesh, generate_disk_mesh

# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture(scope="session")
def coarse_mesh():
    return generate_disk_mesh(0.5)


@pytest.fixture(scope="session")
def medium_mesh():
    return generate_disk_mesh(0.25)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def square_mesh(n=3):
    """Structured triangulation of [-1, 1]^2 (straight boundary, no curving)."""
    t = np.linspace(-1.0, 1.0, n + 1)
    X, Y = np.meshgrid(t, t, indexing="ij")
    verts = np.column_stack([X.ravel(), Y.ravel()])
    idx = lambda i, j: i * (n + 1) + j  # noqa: E731
    tris = []
    for i in range(n):
        for j in range(n):
            a, b, c, d = idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)
            tris += [(a, b, c), (a, c, d)]
    bnd = []
    for k in range(n):
        bnd += [(idx(k, 0), idx(k + 1, 0)), (idx(n, k), idx(n, k + 1)),
                (idx(k + 1, n), idx(k, n)), (idx(0, k + 1), idx(0, k))]
    return Mesh(verts, np.array(tris), np.array(bnd), np.ones(len(bnd), dtype=int))
