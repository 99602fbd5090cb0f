import functools

import pytest

from doublewell.ebk import ebk_spectrum
from doublewell.model import Method, PotentialParams
from doublewell.solvers import SolverConfig, solve_spectrum


@functools.lru_cache(maxsize=None)
def diag_spectrum(method: str, hbar: float, basis_size: int | None = None, vectors: bool = True):
    cfg = SolverConfig(Method(method), basis_size, compute_vectors=vectors)
    return solve_spectrum(cfg, PotentialParams(hbar=hbar))


@functools.lru_cache(maxsize=None)
def semiclassical_spectrum(hbar: float, e_max: float = 0.0):
    return ebk_spectrum(PotentialParams(hbar=hbar), e_max)


@pytest.fixture
def params():
    return PotentialParams()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
