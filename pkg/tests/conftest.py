import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from qw1.operators import DensityMatrix, HermitianOperator, Region  # noqa: E402

Z = np.diag([1.0, -1.0])
X = np.array([[0.0, 1.0], [1.0, 0.0]])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_herm(rng, region):
    G = rng.standard_normal((region.dim,) * 2) + 1j * rng.standard_normal((region.dim,) * 2)
    return HermitianOperator(region, (G + G.conj().T) / 2)


def random_density(rng, region, rank=None):
    rank = rank or region.dim
    G = rng.standard_normal((region.dim, rank)) + 1j * rng.standard_normal((region.dim, rank))
    W = G @ G.conj().T
    return DensityMatrix(region, W / np.trace(W).real)


def chain(n, q=2):
    return Region.chain(n, q)


# one PASS/FAIL line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def record_criterion(number, title, ok, detail=""):
    line = f"criterion {number:2d} {'PASS' if ok else 'FAIL'}  {title}" + (f"  ({detail})" if detail else "")
    ACCEPTANCE_LINES.append((number, line))
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
