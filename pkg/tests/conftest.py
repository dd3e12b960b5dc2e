import numpy as np
import pytest

from deformgeo import catalog as cat
from deformgeo import riemann
from deformgeo.jets import make_jet


def random_jet(n=2, seed=1, with_delta=True, scale=1.0):
    """Smooth generic (non-Riemannian) deformation jet built from trig closures."""
    rng = np.random.default_rng(seed)
    A = scale * rng.uniform(-0.3, 0.3, (n, n, n))
    B = scale * rng.uniform(-0.4, 0.4, (n, n, n, n))
    C = scale * rng.uniform(-0.4, 0.4, (n, n, n, n, n))

    def hfn(x):
        return [[(1.0 if i == j else 0.0) + sum(A[i, j, k] * np.sin(x[k] + i) for k in range(n)) for j in range(n)]
                for i in range(n)]

    def gfn(x):
        return [[[sum(B[m, a, b, k] * np.cos(x[k] * (1 + m)) for k in range(n)) for b in range(n)] for a in range(n)]
                for m in range(n)]

    def dfn(x):
        return [[[[sum(C[m, a, b, c, k] * np.sin(x[k]) for k in range(n)) for c in range(n)] for b in range(n)]
                 for a in range(n)] for m in range(n)]

    return make_jet(n, hfn, gfn, dfn if with_delta else None)


@pytest.fixture(scope="session")
def jet2():
    return random_jet(2, seed=1)


@pytest.fixture(scope="session")
def jet3():
    return random_jet(3, seed=5)


@pytest.fixture(scope="session")
def sphere():
    return cat.get("sphere2").metric()


@pytest.fixture(scope="session")
def sphere_jet(sphere):
    return riemann.solve_deformation(sphere)


@pytest.fixture(scope="session")
def hyperbolic():
    return cat.get("hyperbolic2").metric()


#: (criterion number, PASS/FAIL, detail) lines collected by the acceptance tests
ACCEPTANCE: list[tuple[int, str, str]] = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for num, status, detail in sorted(ACCEPTANCE):
        terminalreporter.write_line(f"criterion {num:2d}: {status}  {detail}")
