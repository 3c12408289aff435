"""Slow-convergence certificate instances.

Three agents sit on a line.  A stationary agent (index 3) holds the origin.
A wide-bound agent (index 2) starts just outside the stationary agent's
reach, and a narrow chaser (index 1) starts inside the wide agent's bound.
Every interaction of the pair {1, 2} pulls the wide agent toward the
chaser by a fixed contraction factor, and the starting coordinate is tuned
so that after exactly ``contact_steps`` interactions the wide agent lands
on the stationary agent's boundary.  Until that landing no other pair has
an edge, so the hitting time of any neighbourhood of the shared limit can
be pushed past any bound by raising ``contact_steps``.

``build_slow_instance`` constructs the tuned configuration,
``verify_slow_instance`` replays the forced pair schedule and certifies
the closed-form behaviour, and ``slow_tau_curve`` measures how the
empirical settling time grows under the genuine random dynamics.
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass

import numpy as np

from .analysis import detect_convergence
from .control import ControlSchedule, apply_schedule
from .errors import InvalidParameterError, VerificationError
from .model import (
    AgentParams,
    OpinionState,
    StopRule,
    UnorderedPair,
    run_simulation,
    step_with_gates,
)
from .rng import RandomStream

__all__ = [
    "SlowInstance",
    "VerificationReport",
    "SlowCurvePoint",
    "build_slow_instance",
    "evaluate_slow_instance",
    "verify_slow_instance",
    "slow_tau_curve",
]

# Underflow guard for the contraction power: below this the tuned start
# coordinate is evaluated at its limit value instead.
_POWER_FLOOR = 1e-300

_CHASER = 1
_WIDE = 2
_STATIONARY = 3


def _contraction_power(beta: float, k: int) -> float:
    # beta in (0, 1); k >= 1
    if k * math.log(beta) < math.log(_POWER_FLOOR):
        return 0.0
    return beta**k


def _tuned_start(r_wide: float, margin: float, mu_c: float, mu_w: float, k: int) -> float:
    p = _contraction_power(1.0 - mu_c - mu_w, k)
    return r_wide + margin * (1.0 - p) / (mu_c + mu_w * p)


@dataclass(frozen=True, eq=False)
class SlowInstance:
    """A tuned three-agent configuration with its forced pair schedule.

    Agents are ordered chaser (1), wide (2), stationary (3); any padding
    agents follow.  ``margin`` is the tuning slack that places the wide
    agent's start strictly outside the stationary agent's reach, and
    ``wide_start`` is the wide agent's starting coordinate along the first
    axis.  ``forced`` holds ``contact_steps + 1`` consecutive selections
    of the pair {1, 2}.
    """

    params: AgentParams
    margin: float
    wide_start: float
    contact_steps: int
    initial: OpinionState
    forced: ControlSchedule

    def __post_init__(self) -> None:
        r = self.params.bounds
        mu = self.params.weights
        if self.params.n < 3:
            raise InvalidParameterError("need at least the three designated agents")
        r_c, r_w, r_s = float(r[0]), float(r[1]), float(r[2])
        mu_c, mu_w = float(mu[0]), float(mu[1])
        if not (r_s <= r_c < r_w):
            raise InvalidParameterError(
                f"bounds must satisfy r_stationary <= r_chaser < r_wide, got "
                f"({r_c}, {r_w}, {r_s})"
            )
        if not (mu_c <= 0.5 and mu_w <= 0.5 and (mu_c < 0.5 or mu_w < 0.5)):
            raise InvalidParameterError(
                f"weights of the moving pair must be at most 1/2 and not both "
                f"equal to it, got ({mu_c}, {mu_w})"
            )
        cap_gap = (r_w - r_c) * mu_w
        cap_pull = r_c * mu_c * mu_w / (mu_c + mu_w)
        if not (0.0 < self.margin < cap_gap):
            raise InvalidParameterError(
                f"margin must lie in (0, {cap_gap}), got {self.margin}"
            )
        if self.margin > cap_pull:
            raise InvalidParameterError(
                f"margin must not exceed {cap_pull}, got {self.margin}"
            )
        if self.contact_steps < 1:
            raise InvalidParameterError("contact_steps must be a positive integer")
        want = _tuned_start(r_w, self.margin, mu_c, mu_w, self.contact_steps)
        if abs(self.wide_start - want) > 1e-12:
            raise InvalidParameterError(
                f"wide_start {self.wide_start} does not match the tuned value {want}"
            )
        # Analytically strict, but the gap to the ceiling is of order the
        # contraction power and collapses to equality in floats for large
        # contact counts.
        if not self.wide_start <= r_w + self.margin / mu_c:
            raise InvalidParameterError("wide_start exceeds its ceiling")
        # Geometric sanity of the layout.
        r_max = max(r_c, r_w, r_s)
        if not 3.0 * r_max > self.wide_start + r_max:
            raise InvalidParameterError("layout sanity failed: start too far out")
        if not self.wide_start - (r_w - self.margin / mu_w) < r_c:
            raise InvalidParameterError("layout sanity failed: pair out of range")
        if not r_w - self.margin / mu_w > r_c:
            raise InvalidParameterError("layout sanity failed: chaser too close")
        if len(self.forced) != self.contact_steps + 1:
            raise InvalidParameterError(
                f"forced schedule must hold {self.contact_steps + 1} selections, "
                f"got {len(self.forced)}"
            )
        if any(p != UnorderedPair(_CHASER, _WIDE) for p in self.forced.steps):
            raise InvalidParameterError("forced schedule may only select the pair {1, 2}")

    @property
    def reach(self) -> float:
        """The stationary agent's boundary distance, i.e. the wide bound."""
        return float(self.params.bounds[1])


@dataclass(frozen=True)
class VerificationReport:
    """Outcome of replaying an instance's forced schedule.

    Flags, in check order: the stationary agent stays out of range of both
    movers before contact while the moving pair keeps its edge; the wide
    agent lands on the reach coordinate; that landing is a boundary edge
    with the stationary agent; and the three-agent diameter never drops
    below the reach before contact, which certifies that settling within
    half the reach takes more than ``contact_steps`` interactions.
    """

    pair_only_interactions: bool
    exact_contact: bool
    boundary_contact: bool
    slowness_certificate: bool
    max_deviation: float
    telescope_deviation: float

    @property
    def ok(self) -> bool:
        return (
            self.pair_only_interactions
            and self.exact_contact
            and self.boundary_contact
            and self.slowness_certificate
        )


@dataclass(frozen=True)
class SlowCurvePoint:
    contact_steps: int
    median_tau: float | None
    n_runs: int
    n_censored: int


def build_slow_instance(
    r_i: float,
    r_j: float,
    r_k: float,
    mu_i: float,
    mu_j: float,
    mu_k: float,
    K: int,
    d: int = 1,
    padding: int = 0,
) -> SlowInstance:
    """Construct the tuned configuration for a given interaction count.

    Arguments follow the chaser/wide/stationary roles in that order: agent
    1 gets (r_i, mu_i), agent 2 gets (r_j, mu_j), agent 3 gets (r_k, mu_k).
    ``padding`` extra agents, with the stationary agent's parameters, are
    parked far along the first axis where nothing can ever reach them.
    """
    if K < 1:
        raise InvalidParameterError(f"K must be a positive integer, got {K}")
    if d < 1:
        raise InvalidParameterError(f"d must be a positive integer, got {d}")
    if padding < 0:
        raise InvalidParameterError(f"padding must be nonnegative, got {padding}")
    if not (r_k <= r_i < r_j):
        raise InvalidParameterError(
            f"bounds must satisfy r_k <= r_i < r_j, got ({r_i}, {r_j}, {r_k})"
        )
    if not (mu_i <= 0.5 and mu_j <= 0.5 and (mu_i < 0.5 or mu_j < 0.5)):
        raise InvalidParameterError(
            f"mu_i and mu_j must be at most 1/2 and not both equal to it, "
            f"got ({mu_i}, {mu_j})"
        )

    # Halfway inside both caps keeps every inequality strict.
    margin = 0.5 * min((r_j - r_i) * mu_j, r_i * mu_i * mu_j / (mu_i + mu_j))
    wide_start = _tuned_start(r_j, margin, mu_i, mu_j, K)

    n = 3 + padding
    bounds = np.array([r_i, r_j, r_k] + [r_k] * padding, dtype=np.float64)
    weights = np.array([mu_i, mu_j, mu_k] + [mu_k] * padding, dtype=np.float64)
    params = AgentParams(bounds, weights)

    x = np.zeros((n, d), dtype=np.float64)
    x[0, 0] = r_j - margin / mu_j
    x[1, 0] = wide_start
    # Stationary agent stays at the origin.  Padding parks beyond any
    # reachable displacement: opinions never leave their initial hull.
    park = 3.0 * max(r_i, r_j, r_k) + wide_start + 1.0
    for m in range(3, n):
        x[m, 0] = park

    forced = ControlSchedule(
        steps=tuple(UnorderedPair(_CHASER, _WIDE) for _ in range(K + 1))
    )
    return SlowInstance(
        params=params,
        margin=margin,
        wide_start=wide_start,
        contact_steps=K,
        initial=OpinionState(x),
        forced=forced,
    )


def evaluate_slow_instance(
    inst: SlowInstance,
    contact_tol: float = 1e-9,
    telescope_tol: float = 1e-10,
    isolation_slack: float = 1e-12,
) -> VerificationReport:
    """Replay the forced schedule and measure every certificate check.

    Never raises on a failed check; see ``verify_slow_instance`` for the
    raising wrapper.  ``isolation_slack`` absorbs the one-ulp rounding that
    can park the wide agent numerically on the boundary a few interactions
    early when the contraction power is far below float resolution.
    """
    K = inst.contact_steps
    r = inst.params.bounds
    reach = inst.reach
    r_c, r_s = float(r[0]), float(r[2])
    mu_c, mu_w = float(inst.params.weights[0]), float(inst.params.weights[1])
    beta = 1.0 - mu_c - mu_w
    pair = UnorderedPair(_CHASER, _WIDE)

    states = [inst.initial]
    gates_ok = True
    for _ in range(K + 1):
        nxt, fa, fb = step_with_gates(states[-1], inst.params, pair)
        gates_ok = gates_ok and fa and fb
        states.append(nxt)

    gap0 = states[0].opinions[1] - states[0].opinions[0]

    # (a) before contact only the forced pair is in range, and it stays so.
    isolated = True
    for h in range(K):
        x = states[h].opinions
        d_wide = math.sqrt(float(np.dot(x[1] - x[2], x[1] - x[2])))
        d_chaser = math.sqrt(float(np.dot(x[0] - x[2], x[0] - x[2])))
        if d_wide < reach - isolation_slack:
            isolated = False
        if d_chaser < max(r_c, r_s) - isolation_slack:
            isolated = False
    flag_a = isolated and gates_ok

    # (b) the wide agent lands on the reach coordinate at contact.
    x_contact = states[K].opinions
    target = np.zeros(inst.initial.d)
    target[0] = reach
    dev = math.sqrt(float(np.dot(x_contact[1] - target, x_contact[1] - target)))
    flag_b = dev <= contact_tol

    # (c) the landing is a boundary edge with the stationary agent.
    d_land = math.sqrt(float(np.dot(x_contact[1] - x_contact[2], x_contact[1] - x_contact[2])))
    flag_c = abs(d_land - reach) <= contact_tol

    # (d) the three-agent diameter stays at the reach up to contact, so no
    # common limit can be within half the reach of all three that early.
    flag_d = True
    for h in range(K + 1):
        x = states[h].opinions
        diam = 0.0
        for p in range(3):
            for q in range(p + 1, 3):
                g = x[p] - x[q]
                diam = max(diam, math.sqrt(float(np.dot(g, g))))
        if diam < reach - contact_tol:
            flag_d = False

    tele = 0.0
    for h in range(1, K + 1):
        x = states[h].opinions
        want = (beta**h) * gap0
        err = (x[1] - x[0]) - want
        tele = max(tele, math.sqrt(float(np.dot(err, err))))

    return VerificationReport(
        pair_only_interactions=flag_a,
        exact_contact=flag_b,
        boundary_contact=flag_c,
        slowness_certificate=flag_d,
        max_deviation=dev,
        telescope_deviation=tele,
    )


def verify_slow_instance(inst: SlowInstance) -> VerificationReport:
    """Certify an instance, raising on any failed check."""
    report = evaluate_slow_instance(inst)
    if not report.ok:
        raise VerificationError(
            "slow-instance certificate failed: "
            f"pair_only_interactions={report.pair_only_interactions} "
            f"exact_contact={report.exact_contact} "
            f"boundary_contact={report.boundary_contact} "
            f"slowness_certificate={report.slowness_certificate} "
            f"max_deviation={report.max_deviation:.3e}"
        )
    if report.telescope_deviation > 1e-10:
        raise VerificationError(
            f"gap contraction drifted from its closed form by "
            f"{report.telescope_deviation:.3e}"
        )
    return report


def forced_prefix_trace(inst: SlowInstance):
    """The instance's forced schedule applied as a recorded trace."""
    return apply_schedule(inst.initial, inst.params, inst.forced)


def slow_tau_curve(
    r_i: float,
    r_j: float,
    r_k: float,
    mu_i: float,
    mu_j: float,
    mu_k: float,
    K_values,
    seeds,
    horizon: int = 100_000,
    d: int = 1,
    padding: int = 0,
) -> tuple[SlowCurvePoint, ...]:
    """Median settling time under the genuine random dynamics, per K.

    For each entry of ``K_values`` the tuned instance is rebuilt and run
    to convergence once per seed; the settling time to within half the
    wide bound of the limits is read off the trace.  Runs that do not
    converge inside ``horizon`` count as censored and drop out of the
    median.  The medians are expected, not guaranteed, to grow with K.
    """
    seeds = [int(s) for s in seeds]
    rows = []
    for K in K_values:
        inst = build_slow_instance(r_i, r_j, r_k, mu_i, mu_j, mu_k, K, d, padding)
        n = inst.params.n
        rule = StopRule(
            freeze_window=10 * n * n, diam_tol=1e-9, horizon_cap=horizon
        )
        half_reach = inst.reach / 2.0
        taus = []
        censored = 0
        for seed in seeds:
            stream = RandomStream(int(seed))
            trace = run_simulation(
                inst.initial, inst.params, stream, horizon, stop=rule
            )
            report = detect_convergence(trace, rule, tau_eps=(half_reach,))
            if not report.converged:
                censored += 1
                continue
            tau = report.tau_table[half_reach]
            if tau is None:
                censored += 1
            else:
                taus.append(tau)
        rows.append(
            SlowCurvePoint(
                contact_steps=int(K),
                median_tau=statistics.median(taus) if taus else None,
                n_runs=len(seeds),
                n_censored=censored,
            )
        )
    return tuple(rows)
