import numpy as np
import pytest

from traceshift import TraceAlgebra, bump_fixture, gaussian_fixture
from traceshift import fixtures as fx


@pytest.fixture
def alg4():
    return TraceAlgebra.of([(4, 1.0)])


@pytest.fixture
def alg5():
    return TraceAlgebra.of([(5, 1.0)])


@pytest.fixture
def alg_weighted():
    return TraceAlgebra.of([(3, 1.0), (2, 0.5)])


@pytest.fixture
def pair5(alg5):
    return fx.random_pair(alg5, 11, h_scale=1.2, v_scale=0.25)


@pytest.fixture
def gauss():
    return gaussian_fixture(0.0, 0.9, depth=10)


@pytest.fixture
def wide_bump():
    return bump_fixture(-1.0, 1.0, 0.6, depth=6)


def rng(seed=0):
    return np.random.Generator(np.random.PCG64(seed))
