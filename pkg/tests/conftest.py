import numpy as np
import pytest

from jscmd.mdq import build_2dsq
from jscmd.source_model import GaussMarkovSource, derive_markov_model


@pytest.fixture(scope="session")
def codebook21():
    return build_2dsq(side_size=8, spread=3, n_cells=21)


@pytest.fixture(scope="session")
def gm_models(codebook21):
    return {rho: derive_markov_model(GaussMarkovSource(rho), codebook21.boundaries) for rho in (0.0, 0.5, 0.9)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    """Collects one PASS/FAIL line per acceptance criterion; echoed in the terminal summary."""

    def report(number: int, ok: bool, detail: str):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
