"""Shared fixtures and small builders used across the suite."""
import numpy as np
import pytest

from dwsim import (
    AgentParams,
    OpinionState,
    RandomStream,
    StopRule,
    run_simulation,
)


def make_params(bounds, weights):
    return AgentParams(
        bounds=np.asarray(bounds, dtype=np.float64),
        weights=np.asarray(weights, dtype=np.float64),
    )


def make_state(rows):
    return OpinionState(opinions=np.asarray(rows, dtype=np.float64))


@pytest.fixture
def boundary_trio_state():
    # three agents on a line; only {2,3} ever interacts
    return make_state([[0.0], [0.75], [1.25]])


@pytest.fixture
def boundary_trio_params():
    third = 1.0 / 3.0
    return make_params([0.5, 0.5, 1.0], [third, third, third])


@pytest.fixture(scope="session")
def warmed_kernel():
    """Trigger the jit compile once so timed sections measure the model,
    not the compiler."""
    state = make_state([[0.0], [0.4], [1.0]])
    params = make_params([0.5, 0.5, 0.5], [0.25, 0.25, 0.25])
    run_simulation(state, params, RandomStream(7), 50,
                   stop=StopRule(freeze_window=10, diam_tol=1e-9,
                                 horizon_cap=50))
    return True
