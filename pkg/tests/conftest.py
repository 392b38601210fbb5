import numpy as np
import pytest

from tt2cp.tensor_core import KruskalTensor, TTTensor


def rel(a, b):
    """Relative difference of ``a`` against the reference ``b``."""
    return np.linalg.norm(np.ravel(a - b)) / np.linalg.norm(np.ravel(b))


def random_kt(rng, shape, r, complex_valued=False):
    factors = []
    for i in shape:
        f = rng.standard_normal((i, r))
        if complex_valued:
            f = f + 1j * rng.standard_normal((i, r))
        factors.append(f)
    return KruskalTensor(factors)


def random_tt(rng, shape, ranks, complex_valued=False):
    cores = []
    for n, i in enumerate(shape):
        c = rng.standard_normal((ranks[n], i, ranks[n + 1]))
        if complex_valued:
            c = c + 1j * rng.standard_normal(c.shape)
        cores.append(c)
    return TTTensor(cores)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        passed, detail = RESULTS[number]
        terminalreporter.write_line(f"AC{number:<2d} {'PASS' if passed else 'FAIL'}  {detail}")
