"""Convergence verdicts, settling times, batch aggregation."""
import numpy as np
import pytest

from dwsim import (
    ControlSchedule,
    InvalidParameterError,
    RandomStream,
    StopRule,
    UnorderedPair,
    apply_schedule,
    batch_stats,
    check_limit_separation,
    detect_convergence,
    estimate_topology_freeze,
    replay_snapshots,
    run_simulation,
    tau_epsilon,
)
from conftest import make_params, make_state

TRIO_RULE = StopRule(freeze_window=30, diam_tol=1e-9, horizon_cap=10**5)


def _overshoot_trace():
    # two agents with heavy weights swap past each other before settling;
    # snapshots: (0,1), (0.9,0.1), (0.18,0.82)
    state = make_state([[0.0], [1.0]])
    params = make_params([2.0, 2.0], [0.9, 0.9])
    sched = ControlSchedule(steps=(UnorderedPair(1, 2),) * 2)
    return apply_schedule(state, params, sched), params


def test_tau_uses_last_exceedance():
    trace, _ = _overshoot_trace()
    limits = np.array([[0.0], [1.0]])
    # state 0 is inside eps, state 1 leaves, state 2 comes back: the
    # settling time must look past the early dip
    assert tau_epsilon(trace, limits, 0.2) == 2
    # settling times are positive by definition, even when the run starts
    # inside the band
    assert tau_epsilon(trace, limits, 0.95) == 1


def test_tau_boundary_is_inclusive():
    trace, _ = _overshoot_trace()
    limits = np.array([[0.5], [0.5]])
    # deviations per state: 0.5, 0.4, 0.32
    assert tau_epsilon(trace, limits, 0.4) == 1
    assert tau_epsilon(trace, limits, 0.39) == 2


def test_tau_none_when_final_still_out():
    trace, _ = _overshoot_trace()
    limits = np.array([[0.0], [1.0]])
    assert tau_epsilon(trace, limits, 0.1) is None


def test_tau_rejects_bad_eps():
    trace, _ = _overshoot_trace()
    limits = np.array([[0.0], [1.0]])
    with pytest.raises(InvalidParameterError):
        tau_epsilon(trace, limits, 0.0)


def test_trio_instance_report(boundary_trio_state, boundary_trio_params):
    trace = run_simulation(boundary_trio_state, boundary_trio_params, RandomStream(17),
                           10**5, stop=TRIO_RULE)
    report = detect_convergence(trace, TRIO_RULE, tau_eps=(0.1, 0.01))
    assert report.converged
    np.testing.assert_allclose(report.limits[:, 0], [0.0, 1.0, 1.0],
                               rtol=0, atol=1e-6)
    assert report.xi.xi == 0
    assert report.xi.last_change is None
    assert [c.members for c in report.final_partition] == [(1,), (2, 3)]
    assert report.separation_ok is True
    # the isolated agent ends exactly one bound-length from the pair
    assert report.boundary_flags == ((1, 3),)
    # settling times are consistent with the recorded deviations
    snaps = replay_snapshots(trace)
    for eps in (0.1, 0.01):
        tau = report.tau_table[eps]
        assert tau is not None and tau >= 1
        devs = np.linalg.norm(snaps - report.limits[None, :, :], axis=2).max(1)
        times = np.asarray(trace.snapshot_times)
        assert devs[times >= tau].max() <= eps
        before = devs[(times >= 0) & (times < tau)]
        assert before.size == 0 or before.max() > eps


def test_not_converged_short_run(boundary_trio_state, boundary_trio_params):
    rule = StopRule(freeze_window=10**6, diam_tol=1e-9, horizon_cap=10**6)
    trace = run_simulation(boundary_trio_state, boundary_trio_params, RandomStream(17),
                           5, stop=rule)
    report = detect_convergence(trace, rule)
    assert not report.converged
    assert report.separation_ok is None
    assert report.boundary_flags == ()


def test_check_limit_separation_matches_report(boundary_trio_state, boundary_trio_params):
    trace = run_simulation(boundary_trio_state, boundary_trio_params, RandomStream(17),
                           10**5, stop=TRIO_RULE)
    report = detect_convergence(trace, TRIO_RULE)
    sep = check_limit_separation(report, boundary_trio_params)
    assert sep.ok is True
    assert sep.boundary_pairs == ((1, 3),)


def _tiny_batch():
    reports = []
    # consensus run: two close agents merge
    s1 = make_state([[0.0], [0.2]])
    p1 = make_params([1.0, 1.0], [0.5, 0.5])
    rule = StopRule(freeze_window=20, diam_tol=1e-9, horizon_cap=2000)
    tr = run_simulation(s1, p1, RandomStream(1), 2000, stop=rule)
    reports.append(detect_convergence(tr, rule, tau_eps=(0.05,)))
    # split run: two separated agents freeze instantly
    s2 = make_state([[0.0], [5.0]])
    tr = run_simulation(s2, p1, RandomStream(2), 2000, stop=rule)
    reports.append(detect_convergence(tr, rule, tau_eps=(0.05,)))
    # censored run: zero budget, nothing settles
    tr = run_simulation(s1, p1, RandomStream(3), 0,
                        stop=StopRule(freeze_window=20, diam_tol=1e-9,
                                      horizon_cap=10**6))
    reports.append(detect_convergence(
        tr, StopRule(freeze_window=10**6, diam_tol=0.0, horizon_cap=10**6),
        tau_eps=(0.05,)))
    return reports


def test_batch_stats_aggregation():
    reports = _tiny_batch()
    assert [r.converged for r in reports] == [True, True, False]
    stats = batch_stats(reports)
    assert stats.n_runs == 3
    assert stats.n_converged == 2
    # only the first run ends in a single cluster
    assert stats.consensus_frequency == pytest.approx(1 / 3)
    taus = [r.tau_table[0.05] for r in reports[:2]]
    assert stats.tau_mean[0.05] == pytest.approx(sum(taus) / 2)
    assert stats.tau_censored[0.05] == 1  # the unconverged run
    assert stats.xi_max >= stats.xi_mean >= 0


def test_batch_stats_empty_rejected():
    with pytest.raises(InvalidParameterError):
        batch_stats([])


def test_estimate_topology_freeze():
    reports = _tiny_batch()
    summary = estimate_topology_freeze(reports, thresholds=(0, 10))
    assert len(summary.xi_values) == 3
    assert summary.fraction_xi_at_most[10] >= summary.fraction_xi_at_most[0]
    assert 0.0 <= summary.fraction_xi_at_most[0] <= 1.0
