"""Forced-pair schedules: designer-chosen interactions instead of random ones.

Two constructions live here. The hub schedule pairs one agent with every
other member of a subset round after round, driving an isolated complete
subset to consensus. The cluster merge walks a large-bound agent across the
gap between two tight clusters and then contracts the union below a target
diameter; it follows the six-phase procedure whose correctness rests on the
eps ceiling computed by :func:`eps_upper_bound`, and it verifies each
guaranteed inequality as it goes, raising :class:`ControlError` the moment
one fails (which no valid input should ever trigger).

Internal bookkeeping for the merge writes every opinion as
``origin + lambda_k * axis + residual_k`` with ``origin`` the walking
agent's start, ``axis`` the vector to the far bridge endpoint, scalar
``lambda_k`` and a residual bounded by eps. The coefficients evolve by the
same two-sided recursion as the opinions themselves, so the decomposition
stays exact up to rounding; drift is asserted, never corrected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ControlError, InvalidParameterError
from .model import (
    AgentParams,
    OpinionState,
    SimulationTrace,
    UnorderedPair,
    _apply_pair_inplace,
    _distance,
    _freeze_trace_arrays,
    opinion_diameter,
)
from .rng import pair_count
from .topology import ClusterSet, _adjacency, _refresh_rows


@dataclass(frozen=True)
class ControlSchedule:
    """Finite forced-pair sequence, applied in order starting at ``origin_t``."""

    steps: tuple[UnorderedPair, ...]
    origin_t: int = 0

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        for p in self.steps:
            if not isinstance(p, UnorderedPair):
                raise InvalidParameterError("schedule entries must be UnorderedPair")
        if self.origin_t < 0:
            raise InvalidParameterError("origin_t must be non-negative")

    def __len__(self) -> int:
        return len(self.steps)


def apply_schedule(state: OpinionState, params: AgentParams,
                   schedule: ControlSchedule) -> SimulationTrace:
    """Run a forced schedule, producing the same trace shape as a random run.

    A pair whose labels exceed the agent count is recorded as a step but
    changes nothing; this keeps schedule replay total. No generator draws
    are consumed (seed and cursors are zero in the trace).
    """
    if state.n != params.n:
        raise InvalidParameterError("state and params disagree on agent count")
    n = state.n
    x = state.opinions.copy()
    r = params.bounds
    w = params.weights
    adj = _adjacency(x, r)
    stride = pair_count(n)
    total = len(schedule)

    pair_i = np.empty(total, np.int32)
    pair_j = np.empty(total, np.int32)
    moved_i = np.empty(total, np.bool_)
    moved_j = np.empty(total, np.bool_)
    events: list[int] = []
    snap_t = [0]
    snaps = [x.copy()]

    for t, pair in enumerate(schedule.steps, start=1):
        pair_i[t - 1] = pair.i
        pair_j[t - 1] = pair.j
        if pair.j > n:
            moved_i[t - 1] = False
            moved_j[t - 1] = False
        else:
            fa, fb = _apply_pair_inplace(x, r, w, pair.i - 1, pair.j - 1)
            moved_i[t - 1] = fa
            moved_j[t - 1] = fb
            changed = False
            if fa:
                changed = _refresh_rows(x, r, adj, pair.i - 1)
            if fb:
                if _refresh_rows(x, r, adj, pair.j - 1):
                    changed = True
            if changed:
                events.append(t)
        if t % stride == 0:
            snap_t.append(t)
            snaps.append(x.copy())

    if snap_t[-1] != total:
        snap_t.append(total)
        snaps.append(x.copy())

    trace = SimulationTrace(
        initial=state,
        params=params,
        seed=0,
        cursor_start=0,
        cursor_end=0,
        n_steps=total,
        pair_i=pair_i,
        pair_j=pair_j,
        moved_i=moved_i,
        moved_j=moved_j,
        snapshot_times=np.asarray(snap_t, np.int64),
        snapshots=np.stack(snaps),
        edge_events=np.asarray(events, np.int64),
        stride=stride,
        stopped=False,
        forced=True,
    )
    return _freeze_trace_arrays(trace)


def _ceil_log_ratio(ratio: float, base: float) -> int:
    """ceil(log(ratio) / log(base)) for ratio in (0, 1], base in (0, 1)."""
    if ratio >= 1.0:
        return 0
    return max(0, math.ceil(math.log(ratio) / math.log(base)))


def eps_upper_bound(params: AgentParams) -> float:
    """Largest merge tolerance the six-phase procedure is guaranteed for.

    Per agent, the smaller of two ceilings: a quarter bound shrunk by the
    worst-case approach length, and half the per-step pull. The minimum
    over agents makes any one of them usable as the walking endpoint.
    """
    r = params.bounds
    mu = params.weights
    r_min = float(r.min())
    best = math.inf
    for k in range(params.n):
        ell = _ceil_log_ratio(r_min / r[k], 1.0 - mu[k])
        first = (r[k] / 4.0) * (1.0 - mu[k]) ** (1 + ell)
        second = mu[k] * r[k] / 2.0
        best = min(best, first, second)
    return best


def hub_consensus_schedule(subset, hub: int, window_T: int, rounds: int) -> ControlSchedule:
    """Schedule of ``rounds`` windows, each pairing ``hub`` with every other
    subset member once and padding remaining slots with the first pairing."""
    members = sorted(set(int(m) for m in subset))
    if len(members) < 2:
        raise InvalidParameterError("subset must contain at least two agents")
    if hub not in members:
        raise InvalidParameterError("hub must belong to the subset")
    others = [m for m in members if m != hub]
    if window_T < len(others):
        raise InvalidParameterError(
            f"window of {window_T} cannot cover {len(others)} partners")
    if rounds < 1:
        raise InvalidParameterError("rounds must be positive")
    window = [UnorderedPair(min(hub, o), max(hub, o)) for o in others]
    window += [window[0]] * (window_T - len(others))
    return ControlSchedule(steps=tuple(window * rounds))


@dataclass(frozen=True)
class ContractStep:
    """One forced step of the final contraction phase.

    The forced pair is the one at maximal distance, so ``diam_before``
    doubles as its pre-step distance. ``max_other_first``/``_second`` are
    the largest post-step distances from any third member to the two moved
    agents (0 when the union has no third member).
    """

    pair: UnorderedPair
    diam_before: float
    dist_after: float
    diam_after: float
    max_other_first: float
    max_other_second: float


@dataclass(frozen=True, eq=False)
class MergeTrace:
    """Everything recorded while merging two clusters.

    ``bridge`` is the cross-cluster pair the merge was built on and
    ``anchor`` its walking endpoint (the larger-bound one). Histories are
    sampled at ``boundary_times``: time 0, the end of the approach, the end
    of each pull-in round, and the end of the contraction phase. The
    schedule length never exceeds ``length_bound``.
    """

    schedule: ControlSchedule
    eps: float
    bridge: UnorderedPair
    anchor: int
    union_members: tuple[int, ...]
    frame_origin: np.ndarray
    frame_axis: np.ndarray
    boundary_times: tuple[int, ...]
    t1: int
    n_rounds: int
    t_rounds_done: int
    t_star: int
    lambda_history: np.ndarray
    delta_history: np.ndarray
    delta_lambda_history: np.ndarray
    anchor_gap_history: np.ndarray
    reach_history: np.ndarray
    contract_steps: tuple[ContractStep, ...]
    length_bound: int
    bound_breakdown: dict


def _members_of(cluster) -> tuple[int, ...]:
    if isinstance(cluster, ClusterSet):
        return cluster.members
    members = tuple(sorted(set(int(m) for m in cluster)))
    if not members:
        raise InvalidParameterError("cluster must be non-empty")
    return members


def merge_eps_clusters(state: OpinionState, params: AgentParams,
                       cluster_a, cluster_b, eps: float) -> tuple[OpinionState, MergeTrace]:
    """Merge two edge-connected eps-clusters into one, forcing pairs only
    inside their union.

    Phases: walk the anchor across the bridge until the far endpoint
    accepts it; repeatedly pull in whichever member is farthest in
    coefficient terms until the coefficient spread clears the target that
    certifies a min-bound-diameter union; then force the current farthest
    pair until the union diameter is at most ``eps``. Agents outside the
    union are returned bit-identical.
    """
    members_a = _members_of(cluster_a)
    members_b = _members_of(cluster_b)
    if set(members_a) & set(members_b):
        raise InvalidParameterError("clusters must be disjoint")
    n = params.n
    if state.n != n:
        raise InvalidParameterError("state and params disagree on agent count")
    for m in members_a + members_b:
        if not 1 <= m <= n:
            raise InvalidParameterError(f"agent label {m} out of range")
    if not (math.isfinite(eps) and eps > 0.0):
        raise InvalidParameterError("eps must be finite and positive")
    ceiling = eps_upper_bound(params)
    if eps > ceiling:
        raise InvalidParameterError(f"eps {eps} exceeds the procedure ceiling {ceiling}")
    if opinion_diameter(state, members_a) > eps:
        raise InvalidParameterError("first cluster is wider than eps")
    if opinion_diameter(state, members_b) > eps:
        raise InvalidParameterError("second cluster is wider than eps")

    x = state.opinions.copy()
    r = params.bounds
    mu = params.weights

    candidates = []
    for a in members_a:
        for b in members_b:
            if _distance(x, a - 1, b - 1) <= max(r[a - 1], r[b - 1]):
                candidates.append((a, b))
    if not candidates:
        raise InvalidParameterError("no edge joins the two clusters")
    # widest bridge first; among equals the lexicographically smallest pair
    a_star, b_star = min(
        candidates,
        key=lambda ab: (-max(r[ab[0] - 1], r[ab[1] - 1]), min(ab), max(ab)))
    if r[b_star - 1] > r[a_star - 1]:
        anchor, far = b_star, a_star
    elif r[a_star - 1] > r[b_star - 1]:
        anchor, far = a_star, b_star
    else:
        anchor, far = min(a_star, b_star), max(a_star, b_star)

    union = tuple(sorted(members_a + members_b))
    m_union = len(union)
    pos = {k: idx for idx, k in enumerate(union)}
    anchor_side = set(members_a) if anchor in members_a else set(members_b)

    origin = x[anchor - 1].copy()
    axis = x[far - 1] - origin
    lam = np.array([0.0 if k in anchor_side else 1.0 for k in union])
    delta = np.stack([x[k - 1] - origin - lam[idx] * axis
                      for idx, k in enumerate(union)])

    r_anchor = float(r[anchor - 1])
    mu_anchor = float(mu[anchor - 1])
    r_min = float(r.min())
    target = (r_min - 2.0 * eps) / r_anchor
    approach = 1 + _ceil_log_ratio(r_min / r_anchor, 1.0 - mu_anchor)
    # per-round coefficient-gap factor: either the anchor lands within
    # (1-mu)^approach of the extreme, or overshoots past the midpoint
    q_round = max(1.0 - 0.5 * (1.0 - mu_anchor) ** approach, 1.0 - mu_anchor)
    if target >= 1.0:
        rounds_cap = 0
    else:
        per_sweep = max(1, math.ceil(math.log(target / 2.0) / math.log(q_round)))
        rounds_cap = 4 * m_union * per_sweep + 2 * m_union + 8
    rho = 0.0
    for p in range(m_union):
        mu_p = mu[union[p] - 1]
        rho = max(rho, math.sqrt(1.0 - mu_p + mu_p * mu_p))
        for q in range(p + 1, m_union):
            rho = max(rho, abs(1.0 - mu_p - mu[union[q] - 1]))
    n_pairs = m_union * (m_union - 1) // 2
    if r_min <= eps:
        contract_cap = n_pairs
    else:
        contract_cap = n_pairs * math.ceil(math.log(r_min / eps) / math.log(1.0 / rho)) + n_pairs
    length_bound = approach + rounds_cap * approach + contract_cap
    breakdown = {
        "approach": approach,
        "rounds_cap": rounds_cap,
        "contract_cap": contract_cap,
        "round_factor": q_round,
        "contract_factor": rho,
        "target": target,
    }

    sched: list[UnorderedPair] = []
    lam_hist = []
    delta_hist = []
    dlam_hist = []
    gap_hist = []
    reach_hist = []
    boundaries = []

    def force(p_label: int, q_label: int) -> tuple[bool, bool]:
        fa, fb = _apply_pair_inplace(x, r, mu, p_label - 1, q_label - 1)
        p_idx = pos[p_label]
        q_idx = pos[q_label]
        dl = lam[q_idx] - lam[p_idx]
        dvec = delta[q_idx] - delta[p_idx]
        if fa:
            lam[p_idx] = lam[p_idx] + mu[p_label - 1] * dl
            delta[p_idx] = delta[p_idx] + mu[p_label - 1] * dvec
        if fb:
            lam[q_idx] = lam[q_idx] - mu[q_label - 1] * dl
            delta[q_idx] = delta[q_idx] - mu[q_label - 1] * dvec
        sched.append(UnorderedPair(min(p_label, q_label), max(p_label, q_label)))
        return fa, fb

    def record_boundary() -> tuple[float, float, float]:
        worst_drift = 0.0
        for idx, k in enumerate(union):
            recon = origin + lam[idx] * axis + delta[idx]
            worst_drift = max(worst_drift, float(np.linalg.norm(x[k - 1] - recon)))
            if float(np.linalg.norm(delta[idx])) > eps + 1e-12:
                raise ControlError(
                    f"residual of agent {k} exceeded eps at step {len(sched)}")
        if worst_drift > 1e-10:
            raise ControlError(
                f"coefficient decomposition drifted {worst_drift:.3e} at step {len(sched)}")
        lam_hist.append(lam.copy())
        delta_hist.append(delta.copy())
        dl = float(lam.max() - lam.min())
        gap = float(np.abs(lam - lam[pos[anchor]]).max())
        reach = max(_distance(x, anchor - 1, k - 1) for k in union)
        dlam_hist.append(dl)
        gap_hist.append(gap)
        reach_hist.append(reach)
        boundaries.append(len(sched))
        return dl, gap, reach

    record_boundary()

    # phase 1: walk the anchor over the bridge until the far side accepts it
    t1 = 0
    while True:
        f_anchor, f_far = force(anchor, far)
        t1 += 1
        if not f_anchor:
            raise ControlError("anchor gate closed during the bridge approach")
        if f_far:
            break
        if t1 > 10 * approach:
            raise ControlError(f"approach still running after {t1} steps (cap {approach})")
    record_boundary()
    if _distance(x, anchor - 1, far - 1) > r[far - 1] + 1e-12:
        raise ControlError("approach ended with the far endpoint out of reach")

    # phases 2-5: pull in the extreme member until the spread target holds
    n_rounds = 0
    while float(lam.max() - lam.min()) > target + 1e-12:
        dl_before = float(lam.max() - lam.min())
        gaps = np.abs(lam - lam[pos[anchor]])
        m_label = union[int(np.argmax(gaps))]
        if m_label == anchor:
            raise ControlError("no extreme member found with spread above target")
        t_round = 0
        while True:
            f_anchor, f_m = force(anchor, m_label)
            t_round += 1
            if not f_anchor:
                raise ControlError("anchor gate closed during a pull-in round")
            if f_m:
                break
            if t_round > 10 * approach:
                raise ControlError(
                    f"round still running after {t_round} steps (cap {approach})")
        n_rounds += 1
        _, gap_after, reach = record_boundary()
        if reach > r_anchor + 1e-10:
            raise ControlError(
                f"round {n_rounds} left reach {reach:.6g} beyond the anchor bound {r_anchor}")
        if gap_after > (1.0 - 2.0 * eps / r_anchor) * dl_before + 1e-10:
            raise ControlError(f"round {n_rounds} missed the guaranteed gap contraction")
        if n_rounds > max(10 * rounds_cap, 50):
            raise ControlError(f"pull-in phase still running after {n_rounds} rounds")
    t_rounds_done = len(sched)

    # phase 6: contract the farthest pair until the union fits in eps
    contract: list[ContractStep] = []
    while True:
        best = -1.0
        best_pair = (union[0], union[0])
        for p in range(m_union):
            for q in range(p + 1, m_union):
                dd = _distance(x, union[p] - 1, union[q] - 1)
                if dd > best:
                    best = dd
                    best_pair = (union[p], union[q])
        if best <= eps:
            break
        pa, pb = best_pair
        diam_before = best
        f_a, f_b = force(pa, pb)
        if not (f_a and f_b):
            raise ControlError("contraction pair did not interact mutually")
        dist_after = _distance(x, pa - 1, pb - 1)
        expected = abs(1.0 - mu[pa - 1] - mu[pb - 1]) * diam_before
        if abs(dist_after - expected) > 1e-10:
            raise ControlError("contracted pair distance missed its closed form")
        max_a = 0.0
        max_b = 0.0
        for k in union:
            if k == pa or k == pb:
                continue
            max_a = max(max_a, _distance(x, k - 1, pa - 1))
            max_b = max(max_b, _distance(x, k - 1, pb - 1))
        diam_after = 0.0
        for p in range(m_union):
            for q in range(p + 1, m_union):
                dd = _distance(x, union[p] - 1, union[q] - 1)
                if dd > diam_after:
                    diam_after = dd
        if diam_after > diam_before + 1e-12:
            raise ControlError("contraction step expanded the union diameter")
        mu_a = mu[pa - 1]
        mu_b = mu[pb - 1]
        if max_a > math.sqrt(1.0 - mu_a + mu_a * mu_a) * diam_before + 1e-10:
            raise ControlError("a third member ended too far from the first moved agent")
        if max_b > math.sqrt(1.0 - mu_b + mu_b * mu_b) * diam_before + 1e-10:
            raise ControlError("a third member ended too far from the second moved agent")
        contract.append(ContractStep(
            pair=UnorderedPair(pa, pb),
            diam_before=diam_before,
            dist_after=dist_after,
            diam_after=diam_after,
            max_other_first=max_a,
            max_other_second=max_b,
        ))
        if len(contract) > max(10 * contract_cap, 50):
            raise ControlError(f"contraction still running after {len(contract)} steps")
    record_boundary()
    t_star = len(sched)
    if t_star > length_bound:
        raise ControlError(
            f"schedule length {t_star} exceeded its precomputed bound {length_bound}")

    outside = [k for k in range(1, n + 1) if k not in pos]
    for k in outside:
        if not np.array_equal(x[k - 1], state.opinions[k - 1]):
            raise ControlError(f"agent {k} outside the union was modified")

    trace = MergeTrace(
        schedule=ControlSchedule(steps=tuple(sched)),
        eps=float(eps),
        bridge=UnorderedPair(min(anchor, far), max(anchor, far)),
        anchor=anchor,
        union_members=union,
        frame_origin=origin,
        frame_axis=axis,
        boundary_times=tuple(boundaries),
        t1=t1,
        n_rounds=n_rounds,
        t_rounds_done=t_rounds_done,
        t_star=t_star,
        lambda_history=np.stack(lam_hist),
        delta_history=np.stack(delta_hist),
        delta_lambda_history=np.asarray(dlam_hist),
        anchor_gap_history=np.asarray(gap_hist),
        reach_history=np.asarray(reach_hist),
        contract_steps=tuple(contract),
        length_bound=length_bound,
        bound_breakdown=breakdown,
    )
    return OpinionState(x), trace


def _has_bridge(x: np.ndarray, r: np.ndarray, group_a, group_b) -> bool:
    for a in group_a:
        for b in group_b:
            if _distance(x, a - 1, b - 1) <= max(r[a - 1], r[b - 1]):
                return True
    return False


def global_merge_schedule(state: OpinionState, params: AgentParams,
                          eps: float) -> tuple[OpinionState, list[MergeTrace]]:
    """Merge edge-connected clusters until none remain connected.

    Starts from singletons and repeatedly merges the lexicographically
    smallest connected pair of current clusters (ordered by least member).
    At most n-1 merges happen; the result is a partition of eps-clusters
    with no edges between them.
    """
    if state.n != params.n:
        raise InvalidParameterError("state and params disagree on agent count")
    clusters: list[tuple[int, ...]] = [(k,) for k in range(1, params.n + 1)]
    current = state
    traces: list[MergeTrace] = []
    while True:
        clusters.sort(key=lambda c: c[0])
        x = current.opinions
        hit = None
        for ai in range(len(clusters)):
            for bi in range(ai + 1, len(clusters)):
                if _has_bridge(x, params.bounds, clusters[ai], clusters[bi]):
                    hit = (ai, bi)
                    break
            if hit:
                break
        if hit is None:
            return current, traces
        first, second = clusters[hit[0]], clusters[hit[1]]
        current, mtrace = merge_eps_clusters(current, params, first, second, eps)
        traces.append(mtrace)
        merged = tuple(sorted(first + second))
        clusters = [c for idx, c in enumerate(clusters) if idx not in hit]
        clusters.append(merged)
