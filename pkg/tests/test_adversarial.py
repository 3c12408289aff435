"""Tuned slow-convergence instances and their certificates."""
import dataclasses

import numpy as np
import pytest

from dwsim import (
    InvalidParameterError,
    OpinionState,
    VerificationError,
    build_slow_instance,
    evaluate_slow_instance,
    forced_prefix_trace,
    slow_tau_curve,
    verify_slow_instance,
)


def test_tuned_layout_frozen_k10():
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=10)
    # margin is half the smaller of its two caps: min(0.4, 0.2)/2
    assert inst.margin == 0.10000000000000002
    assert inst.wide_start == 2.249999948800005
    x = inst.initial.opinions[:, 0]
    assert float(x[2]) == 0.0          # stationary at the origin
    assert float(x[0]) == 1.75          # chaser at r_w - margin/mu_w
    assert float(x[1]) == inst.wide_start
    assert float(x[1] - x[0]) == 0.4999999488000051
    assert inst.reach == 2.0
    assert inst.contact_steps == 10
    assert len(inst.forced) == 11


@pytest.mark.parametrize("K", [1, 5, 10, 20, 40, 200])
def test_certificate_passes_across_contact_counts(K):
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=K)
    report = verify_slow_instance(inst)
    assert report.ok
    assert report.max_deviation <= 1e-9
    assert report.telescope_deviation <= 1e-10


def test_exact_contact_is_machine_precision():
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=10)
    report = evaluate_slow_instance(inst)
    # the landing coordinate is tuned to hit the reach exactly; only
    # rounding noise remains
    assert report.max_deviation <= 3e-16


def test_tampered_initial_fails_closed():
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=10)
    bumped = inst.initial.opinions.copy()
    bumped[1, 0] += 1e-3
    tampered = dataclasses.replace(inst, initial=OpinionState(opinions=bumped))
    report = evaluate_slow_instance(tampered)
    assert not report.exact_contact
    assert report.max_deviation > 1e-4
    with pytest.raises(VerificationError):
        verify_slow_instance(tampered)


def test_rejects_invalid_parameter_orderings():
    with pytest.raises(InvalidParameterError):
        build_slow_instance(2.0, 1.0, 1.0, 0.4, 0.4, 0.4, K=5)  # r_c >= r_w
    with pytest.raises(InvalidParameterError):
        build_slow_instance(1.0, 2.0, 1.5, 0.4, 0.4, 0.4, K=5)  # r_s > r_c
    with pytest.raises(InvalidParameterError):
        build_slow_instance(1.0, 2.0, 1.0, 0.5, 0.5, 0.4, K=5)  # both at 1/2
    with pytest.raises(InvalidParameterError):
        build_slow_instance(1.0, 2.0, 1.0, 0.6, 0.4, 0.4, K=5)  # over 1/2
    with pytest.raises(InvalidParameterError):
        build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=0)


def test_one_boundary_weight_is_allowed():
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.5, 0.4, 0.4, K=5)
    assert verify_slow_instance(inst).ok


def test_padding_agents_never_move():
    plain = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=8)
    padded = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=8,
                                 padding=3)
    assert padded.params.n == 6
    assert verify_slow_instance(padded).ok
    trace = forced_prefix_trace(padded)
    for k in range(3, 6):
        assert np.array_equal(trace.final.opinions[k],
                              padded.initial.opinions[k])
    # the designated three evolve exactly as in the unpadded instance
    plain_trace = forced_prefix_trace(plain)
    assert np.array_equal(trace.final.opinions[:3],
                          plain_trace.final.opinions[:3])


def test_higher_dimension_contact_on_first_axis():
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=6, d=3)
    assert inst.initial.d == 3
    assert verify_slow_instance(inst).ok
    final = forced_prefix_trace(inst).final.opinions
    # off-axis coordinates stay identically zero
    assert np.all(final[:, 1:] == 0.0)


def test_forced_prefix_only_moves_the_pair():
    inst = build_slow_instance(1.0, 2.0, 1.0, 0.4, 0.4, 0.4, K=4)
    trace = forced_prefix_trace(inst)
    assert trace.n_steps == 5
    for t in range(1, 6):
        assert trace.pair_at(t).as_tuple() == (1, 2)
    assert np.array_equal(trace.final.opinions[2], inst.initial.opinions[2])


def test_slow_curve_medians_grow(warmed_kernel):
    points = slow_tau_curve(1.0, 2.0, 1.0, 0.4, 0.4, 0.4,
                            K_values=(2, 10, 20), seeds=range(8))
    assert [p.contact_steps for p in points] == [2, 10, 20]
    assert all(p.n_runs == 8 for p in points)
    assert all(p.n_censored == 0 for p in points)
    medians = [p.median_tau for p in points]
    assert all(m is not None for m in medians)
    assert medians[0] < medians[1] < medians[2]
