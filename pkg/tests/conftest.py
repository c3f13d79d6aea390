import numpy as np
import pytest

from fdelab.mild_solver import FdeProblem, SolverConfig
from fdelab.periodic_rd import RdModel, build_delayed_logistic
from fdelab.semigroups import MatrixSemigroup, SpectralNeumannSemigroup
from fdelab.state_space import HistorySegment


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def spectral():
    return SpectralNeumannSemigroup([0.1], length=1.0, modes=16)


def linear_delay_problem(h=1 / 64, history=1.0):
    """u'(t) = -u(t - 1) with A = 0, tau = 1 and a constant history."""
    k = round(1.0 / h)
    phi = HistorySegment.constant(1.0, k, history, [0.0])
    return FdeProblem(MatrixSemigroup([[0.0]]), lambda t, seg: -seg.values[0], 1.0, phi)


@pytest.fixture
def scalar_problem():
    return linear_delay_problem()


@pytest.fixture
def logistic_forced():
    return build_delayed_logistic(RdModel(forcing=0.2))


@pytest.fixture
def logistic_unforced():
    return build_delayed_logistic(RdModel(forcing=0.0))


@pytest.fixture
def cfg128():
    return SolverConfig(h=1 / 128)


def pytest_terminal_summary(terminalreporter):
    mod = __import__("sys").modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(mod.RESULTS):
        terminalreporter.write_line(mod.RESULTS[key])
