import numpy as np
import pytest

from hubogas import _kernels
from hubogas.poly import HuboPolynomial

ACCEPTANCE_LINES = pytest.StashKey[list]()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_LINES, [])
    if lines:
        terminalreporter.section("acceptance")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture(params=_kernels.available())
def kernel_backend(request):
    """Run a test once per available kernel backend."""
    previous = _kernels.BACKEND
    _kernels.use(request.param)
    yield request.param
    _kernels.use(previous)


@pytest.fixture
def three_bit_poly():
    return HuboPolynomial(3, {(): 1.0, (0,): 1.0, (1, 2): -2.0})


@pytest.fixture
def real_toy_poly():
    return HuboPolynomial(4, {(): 1.0, (0,): 1.0, (1, 2, 3): -1.8})


def random_poly(rng, n, n_terms, max_degree=None, integer=False):
    max_degree = n if max_degree is None else max_degree
    terms = {}
    for _ in range(n_terms):
        deg = int(rng.integers(0, min(max_degree, n) + 1))
        mono = tuple(sorted(rng.choice(n, size=deg, replace=False).tolist()))
        c = int(rng.integers(-5, 6)) if integer else float(rng.normal())
        terms[mono] = terms.get(mono, 0.0) + c
    return HuboPolynomial(n, terms)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)
