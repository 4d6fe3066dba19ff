import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from ttsa.core import NoiseModel, Problem  # noqa: E402
from ttsa.problems import PolyakSpec, make_affine_problem, make_polyak  # noqa: E402

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def declared_problem(lam, mu, L, c1=0.0, x_star=(0.0,), y_star=(0.0,)):
    """A 1-D problem carrying arbitrary declared constants (only the constant algebra reads them)."""
    return Problem(1, 1, lambda x, y: lam * x, lambda x, y: mu * y, lam, mu, L,
                   np.array(x_star), np.array(y_star),
                   noise_fast=NoiseModel.additive(c1) if c1 else NoiseModel.zero())


@pytest.fixture
def polyak():
    return make_polyak(PolyakSpec([[0.5]], [0.5], NoiseModel.additive(0.5), NoiseModel.additive(0.5)))


@pytest.fixture
def polyak_quiet():
    return make_polyak(PolyakSpec([[0.5]], [0.5]))


@pytest.fixture
def strict_problem():
    return make_affine_problem([[0.5]], [[0.25]], [0.25], [[0.5]], [[0.25]], [0.25],
                               NoiseModel.additive(0.005), NoiseModel.additive(0.005), name="strict")


@pytest.fixture
def coupled():
    """2+1-dimensional affine problem with multiplicative noise on both scales."""
    return make_affine_problem([[0.5, 0.1], [0.0, 0.3]], [[0.2], [0.1]], [0.5, 0.1],
                               [[0.3, 0.2]], [[0.1]], [0.3],
                               NoiseModel.multiplicative(0.4), NoiseModel.multiplicative(0.3), name="coupled")


@pytest.fixture
def configs_dir():
    return CONFIGS


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion that ran."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
