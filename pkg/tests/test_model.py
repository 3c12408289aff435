"""Core dynamics: gating, update arithmetic, traces, kernel parity."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from dwsim import (
    AgentParams,
    InvalidParameterError,
    OpinionState,
    RandomStream,
    StopRule,
    UnorderedPair,
    dw_step,
    opinion_diameter,
    replay_snapshots,
    run_simulation,
    sample_pair,
    state_at,
    step_with_gates,
)
from conftest import make_params, make_state


class TestValidation:
    def test_params_require_two_agents(self):
        with pytest.raises(InvalidParameterError):
            make_params([1.0], [0.5])

    def test_params_reject_nonpositive_bound(self):
        with pytest.raises(InvalidParameterError):
            make_params([1.0, 0.0], [0.5, 0.5])

    def test_params_reject_weight_outside_open_interval(self):
        for bad in (0.0, 1.0, -0.2, 1.5):
            with pytest.raises(InvalidParameterError):
                make_params([1.0, 1.0], [0.5, bad])

    def test_params_reject_shape_mismatch(self):
        with pytest.raises(InvalidParameterError):
            make_params([1.0, 1.0, 1.0], [0.5, 0.5])

    def test_state_rejects_nonfinite(self):
        with pytest.raises(InvalidParameterError):
            make_state([[0.0], [np.inf]])

    def test_state_rejects_wrong_rank(self):
        with pytest.raises(InvalidParameterError):
            OpinionState(opinions=np.zeros(3))

    def test_state_is_readonly(self):
        s = make_state([[0.0], [1.0]])
        with pytest.raises(ValueError):
            s.opinions[0, 0] = 5.0

    def test_pair_orders_labels(self):
        with pytest.raises(InvalidParameterError):
            UnorderedPair(2, 2)
        with pytest.raises(InvalidParameterError):
            UnorderedPair(3, 1)
        assert UnorderedPair(1, 3).as_tuple() == (1, 3)

    def test_stop_rule_validation(self):
        with pytest.raises(InvalidParameterError):
            StopRule(freeze_window=0, diam_tol=1e-9, horizon_cap=10)
        with pytest.raises(InvalidParameterError):
            StopRule(freeze_window=5, diam_tol=-1.0, horizon_cap=10)
        rule = StopRule.default_for(20)
        assert rule.freeze_window == 4000


def test_symmetric_move():
    # both in range: each closes its own fraction of the gap
    state = make_state([[0.0, 0.0], [1.0, 0.0]])
    params = make_params([2.0, 2.0], [0.25, 0.5])
    out = dw_step(state, params, UnorderedPair(1, 2))
    assert out.opinions[0, 0] == 0.25
    assert out.opinions[1, 0] == 0.5
    # input untouched
    assert state.opinions[0, 0] == 0.0


def test_one_sided_gate():
    # gap 1.0: agent 1 (bound 0.5) ignores, agent 2 (bound 1.5) moves
    state = make_state([[0.0], [1.0]])
    params = make_params([0.5, 1.5], [0.5, 0.5])
    _, fa, fb = step_with_gates(state, params, UnorderedPair(1, 2))
    assert (fa, fb) == (False, True)
    out = dw_step(state, params, UnorderedPair(1, 2))
    assert out.opinions[0, 0] == 0.0
    assert out.opinions[1, 0] == 0.5


def test_gate_is_boundary_inclusive():
    # distance exactly equal to the bound still counts
    state = make_state([[0.0], [1.0]])
    params = make_params([1.0, 1.0], [0.5, 0.25])
    _, fa, fb = step_with_gates(state, params, UnorderedPair(1, 2))
    assert fa and fb


def test_out_of_range_pair_is_noop():
    state = make_state([[0.0], [3.0]])
    params = make_params([1.0, 1.0], [0.5, 0.5])
    out, fa, fb = step_with_gates(state, params, UnorderedPair(1, 2))
    assert not fa and not fb
    assert np.array_equal(out.opinions, state.opinions)


def test_update_uses_pre_step_positions():
    # simultaneous update: both read the same pre-step gap
    state = make_state([[0.0], [1.0]])
    params = make_params([2.0, 2.0], [0.5, 0.5])
    out = dw_step(state, params, UnorderedPair(1, 2))
    assert tuple(out.opinions[:, 0]) == (0.5, 0.5)


def test_trio_pair_update(boundary_trio_state, boundary_trio_params):
    out = dw_step(boundary_trio_state, boundary_trio_params, UnorderedPair(2, 3))
    np.testing.assert_allclose(
        out.opinions[:, 0],
        [0.0, 0.75 + 0.5 / 3.0, 1.25 - 0.5 / 3.0],
        rtol=0, atol=1e-15)


def test_opinion_diameter(boundary_trio_state):
    assert opinion_diameter(boundary_trio_state) == 1.25
    assert opinion_diameter(boundary_trio_state, subset=(2, 3)) == 0.5
    single = make_state([[4.0, 4.0]])
    assert opinion_diameter(single) == 0.0


@given(
    arrays(np.float64, (4, 2), elements=st.floats(-5, 5)),
    arrays(np.float64, (4,), elements=st.floats(0.01, 3)),
    arrays(np.float64, (4,), elements=st.floats(0.01, 0.99)),
    st.integers(min_value=0, max_value=5),
)
@settings(max_examples=150)
def test_step_respects_gates_and_geometry(x, r, mu, pair_idx):
    from dwsim.rng import pair_from_index
    state = OpinionState(opinions=x)
    params = AgentParams(bounds=r, weights=mu)
    i, j = pair_from_index(pair_idx, 4)
    dist = float(np.linalg.norm(x[i - 1] - x[j - 1]))
    out, fa, fb = step_with_gates(state, params, UnorderedPair(i, j))
    assert fa == (dist <= r[i - 1])
    assert fb == (dist <= r[j - 1])
    if fa:
        want_i = x[i - 1] + mu[i - 1] * (x[j - 1] - x[i - 1])
    else:
        want_i = x[i - 1]
    assert np.array_equal(out.opinions[i - 1], want_i)
    # untouched rows are bit-identical
    for k in range(4):
        if k not in (i - 1, j - 1):
            assert np.array_equal(out.opinions[k], x[k])


def test_sample_pair_uniform_smoke():
    s = RandomStream(314)
    counts = {}
    for _ in range(10000):
        p = sample_pair(s, 5)
        counts[p.as_tuple()] = counts.get(p.as_tuple(), 0) + 1
    assert len(counts) == 10
    assert all(800 < c < 1200 for c in counts.values())


def test_run_consumes_one_draw_per_step():
    state = make_state([[0.0], [0.3], [0.9]])
    params = make_params([1.0, 1.0, 1.0], [0.5, 0.5, 0.5])
    trace = run_simulation(state, params, RandomStream(8), 40)
    assert trace.cursor_end - trace.cursor_start == trace.n_steps == 40


def test_zero_horizon():
    state = make_state([[0.0], [1.0]])
    params = make_params([1.0, 1.0], [0.5, 0.5])
    trace = run_simulation(state, params, RandomStream(0), 0)
    assert trace.n_steps == 0
    assert not trace.stopped
    assert np.array_equal(trace.final.opinions, state.opinions)


def test_negative_horizon_rejected():
    state = make_state([[0.0], [1.0]])
    params = make_params([1.0, 1.0], [0.5, 0.5])
    with pytest.raises(InvalidParameterError):
        run_simulation(state, params, RandomStream(0), -1)


def test_kernel_matches_pure_python_loop():
    """The compiled path and the one-step reference must agree bitwise."""
    rng = np.random.default_rng(5)
    x0 = rng.uniform(0, 1, size=(7, 3))
    r = rng.uniform(0.1, 0.8, size=7)
    mu = rng.uniform(0.1, 0.9, size=7)
    state = OpinionState(opinions=x0.copy())
    params = AgentParams(bounds=r, weights=mu)

    trace = run_simulation(state, params, RandomStream(123), 300,
                           snapshot_stride=1)

    ref = OpinionState(opinions=x0.copy())
    stream = RandomStream(123)
    for t in range(1, 301):
        pair = sample_pair(stream, 7)
        assert pair == trace.pair_at(t)
        ref = dw_step(ref, params, pair)
        snap = trace.snapshots[list(trace.snapshot_times).index(t)]
        assert np.array_equal(ref.opinions, snap)
    assert np.array_equal(ref.opinions, trace.final.opinions)


def test_state_at_and_replay_agree():
    state = make_state([[0.0, 0.1], [0.5, 0.2], [0.8, 0.9], [0.2, 0.7]])
    params = make_params([0.6] * 4, [0.3] * 4)
    trace = run_simulation(state, params, RandomStream(77), 250)
    replayed = replay_snapshots(trace)
    assert np.array_equal(replayed, trace.snapshots)
    for t in (0, 1, 17, 250):
        got = state_at(trace, t)
        assert got.n == 4
    assert np.array_equal(state_at(trace, trace.n_steps).opinions,
                          trace.final.opinions)


def test_stop_rule_halts_early(boundary_trio_state, boundary_trio_params):
    rule = StopRule(freeze_window=30, diam_tol=1e-9, horizon_cap=100000)
    trace = run_simulation(boundary_trio_state, boundary_trio_params, RandomStream(17),
                           100000, stop=rule)
    assert trace.stopped
    assert trace.n_steps < 100000
    np.testing.assert_allclose(trace.final.opinions[:, 0], [0.0, 1.0, 1.0],
                               rtol=0, atol=1e-6)


def test_snapshot_stride_one_records_everything():
    state = make_state([[0.0], [0.4]])
    params = make_params([1.0, 1.0], [0.5, 0.5])
    trace = run_simulation(state, params, RandomStream(2), 25,
                           snapshot_stride=1)
    assert list(trace.snapshot_times) == list(range(26))
    with pytest.raises(InvalidParameterError):
        run_simulation(state, params, RandomStream(2), 5, snapshot_stride=0)
