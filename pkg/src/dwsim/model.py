"""Core bounded-confidence dynamics.

Opinions live in R^d. At each step one unordered agent pair is selected
(randomly in :func:`run_simulation`, or by a controller elsewhere) and each
member moves toward the other by its own weighting factor, provided the
other's opinion lies within its own confidence bound. The comparison is
``distance <= bound``, so the boundary is inclusive.

Determinism contract: the compiled kernel and the Python step here perform
the same floating-point operations in the same order, and a trace replayed
through the Python step reproduces every kernel snapshot bit for bit. The
helpers ``_distance`` and ``_apply_pair_inplace`` are the single source of
truth for that arithmetic; topology and controller code import them instead
of rolling their own.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameterError
from .rng import RandomStream, pair_count, pair_from_index


def _readonly(a: np.ndarray) -> np.ndarray:
    b = np.ascontiguousarray(a, dtype=np.float64).copy()
    b.setflags(write=False)
    return b


@dataclass(frozen=True, eq=False)
class AgentParams:
    """Per-agent confidence bounds and weighting factors.

    ``bounds[i] > 0`` and ``weights[i] in (0, 1)``, both strict. Two agents
    are the minimum: every interaction and every controller argument is
    pairwise.
    """

    bounds: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bounds, dtype=np.float64)
        w = np.asarray(self.weights, dtype=np.float64)
        if b.ndim != 1 or w.ndim != 1 or b.shape != w.shape:
            raise InvalidParameterError("bounds and weights must be 1-d arrays of equal length")
        if b.shape[0] < 2:
            raise InvalidParameterError("at least two agents required")
        if not np.all(np.isfinite(b)) or not np.all(b > 0.0):
            raise InvalidParameterError("confidence bounds must be finite and positive")
        if not np.all(np.isfinite(w)) or not np.all((w > 0.0) & (w < 1.0)):
            raise InvalidParameterError("weighting factors must lie strictly inside (0, 1)")
        object.__setattr__(self, "bounds", _readonly(b))
        object.__setattr__(self, "weights", _readonly(w))

    @property
    def n(self) -> int:
        return self.bounds.shape[0]


@dataclass(frozen=True, eq=False)
class OpinionState:
    """An n-by-d matrix of opinions, one row per agent."""

    opinions: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.opinions, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 1:
            raise InvalidParameterError("opinions must be a non-empty 2-d matrix")
        if not np.all(np.isfinite(x)):
            raise InvalidParameterError("opinions must be finite")
        object.__setattr__(self, "opinions", _readonly(x))

    @property
    def n(self) -> int:
        return self.opinions.shape[0]

    @property
    def d(self) -> int:
        return self.opinions.shape[1]


@dataclass(frozen=True, order=True)
class UnorderedPair:
    """Agent pair with 1-based labels, stored as i < j."""

    i: int
    j: int

    def __post_init__(self):
        if not (isinstance(self.i, int) and isinstance(self.j, int)):
            raise InvalidParameterError("pair labels must be integers")
        if not 1 <= self.i < self.j:
            raise InvalidParameterError(f"pair ({self.i}, {self.j}) must satisfy 1 <= i < j")

    def as_tuple(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class StopRule:
    """Convergence detector for random-pairing runs.

    A run halts once no directed influence edge has flipped for
    ``freeze_window`` consecutive steps and every component of the
    symmetrized edge relation has opinion diameter at most ``diam_tol``.
    ``horizon_cap`` bounds the run length regardless. The test is evaluated
    every pair-count steps, so at most that many extra steps run past the
    moment both conditions first hold.
    """

    freeze_window: int
    diam_tol: float
    horizon_cap: int = 10_000_000

    def __post_init__(self):
        if self.freeze_window < 1:
            raise InvalidParameterError("freeze_window must be at least 1")
        if not (math.isfinite(self.diam_tol) and self.diam_tol >= 0.0):
            raise InvalidParameterError("diam_tol must be finite and non-negative")
        if self.horizon_cap < 1:
            raise InvalidParameterError("horizon_cap must be at least 1")

    @classmethod
    def default_for(cls, n: int) -> "StopRule":
        return cls(freeze_window=10 * n * n, diam_tol=1e-9)


def sample_pair(stream: RandomStream, n: int) -> UnorderedPair:
    """Draw one pair uniformly from the n(n-1)/2 unordered pairs.

    Consumes exactly one raw draw. The index-to-pair map is lexicographic,
    (1,2), (1,3), ..., so a recorded draw sequence pins down the whole
    pairing sequence.
    """
    if n < 2:
        raise InvalidParameterError("need at least two agents to form a pair")
    k = stream.randbelow(pair_count(n))
    i, j = pair_from_index(k, n)
    return UnorderedPair(i, j)


def _distance(x: np.ndarray, a: int, b: int) -> float:
    """Euclidean distance between rows a and b, kernel-identical arithmetic."""
    acc = 0.0
    for kk in range(x.shape[1]):
        diff = x[a, kk] - x[b, kk]
        acc += diff * diff
    return math.sqrt(acc)


def _apply_pair_inplace(x: np.ndarray, bounds: np.ndarray, weights: np.ndarray,
                        a: int, b: int) -> tuple[bool, bool]:
    """One interaction of 0-based rows a and b, mutating ``x``.

    Returns the two gate flags (whether each endpoint accepted the other).
    Operation order matches the compiled kernel exactly; see module note.
    """
    d = x.shape[1]
    g = [0.0] * d
    acc = 0.0
    for kk in range(d):
        gk = x[b, kk] - x[a, kk]
        g[kk] = gk
        acc += gk * gk
    dd = math.sqrt(acc)
    fa = bool(dd <= bounds[a])
    fb = bool(dd <= bounds[b])
    if fa:
        for kk in range(d):
            x[a, kk] = x[a, kk] + weights[a] * g[kk]
    if fb:
        for kk in range(d):
            x[b, kk] = x[b, kk] - weights[b] * g[kk]
    return fa, fb


def step_with_gates(state: OpinionState, params: AgentParams,
                    pair: UnorderedPair) -> tuple[OpinionState, bool, bool]:
    """Like :func:`dw_step` but also reports which gates opened."""
    if state.n != params.n:
        raise InvalidParameterError("state and params disagree on agent count")
    if pair.j > state.n:
        raise InvalidParameterError(f"pair {pair.as_tuple()} out of range for n={state.n}")
    x = state.opinions.copy()
    fa, fb = _apply_pair_inplace(x, params.bounds, params.weights, pair.i - 1, pair.j - 1)
    return OpinionState(x), fa, fb


def dw_step(state: OpinionState, params: AgentParams, pair: UnorderedPair) -> OpinionState:
    """Apply one pairwise interaction and return the new state."""
    new_state, _, _ = step_with_gates(state, params, pair)
    return new_state


def opinion_diameter(state: OpinionState, subset=None) -> float:
    """Largest pairwise opinion distance, over ``subset`` (1-based) or all agents."""
    x = state.opinions
    members = range(x.shape[0]) if subset is None else sorted(m - 1 for m in set(subset))
    members = list(members)
    if subset is not None:
        if not members:
            raise InvalidParameterError("subset must be non-empty")
        if members[0] < 0 or members[-1] >= x.shape[0]:
            raise InvalidParameterError("subset label out of range")
    best = 0.0
    for p in range(len(members)):
        for q in range(p + 1, len(members)):
            dd = _distance(x, members[p], members[q])
            if dd > best:
                best = dd
    return best


@dataclass(frozen=True, eq=False)
class SimulationTrace:
    """Complete record of one run.

    Per-step arrays are 1-based pair labels and gate flags, indexed by
    step-1. ``edge_events`` holds the step numbers (1-based) at which the
    directed edge set after the step differed from before it.
    ``snapshots[k]`` is the full state at time ``snapshot_times[k]``;
    entry 0 is the initial state and the last entry is the final state.
    ``cursor_start``/``cursor_end`` delimit the raw draws consumed, one per
    step, from the stream with seed ``seed``. Forced-schedule traces carry
    the pair log but no draws (``cursor_start == cursor_end``).
    """

    initial: OpinionState
    params: AgentParams
    seed: int
    cursor_start: int
    cursor_end: int
    n_steps: int
    pair_i: np.ndarray
    pair_j: np.ndarray
    moved_i: np.ndarray
    moved_j: np.ndarray
    snapshot_times: np.ndarray
    snapshots: np.ndarray
    edge_events: np.ndarray
    stride: int
    stopped: bool
    forced: bool = field(default=False)

    @property
    def final(self) -> OpinionState:
        return OpinionState(self.snapshots[-1])

    def pair_at(self, t: int) -> UnorderedPair:
        if not 1 <= t <= self.n_steps:
            raise InvalidParameterError(f"step {t} outside 1..{self.n_steps}")
        return UnorderedPair(int(self.pair_i[t - 1]), int(self.pair_j[t - 1]))


def _freeze_trace_arrays(trace: SimulationTrace) -> SimulationTrace:
    for name in ("pair_i", "pair_j", "moved_i", "moved_j",
                 "snapshot_times", "snapshots", "edge_events"):
        getattr(trace, name).setflags(write=False)
    return trace


def run_simulation(initial: OpinionState, params: AgentParams, stream: RandomStream,
                   horizon: int, stop: StopRule | None = None,
                   snapshot_stride: int | None = None) -> SimulationTrace:
    """Random-pairing run of up to ``horizon`` steps.

    Advances ``stream`` by exactly one draw per executed step. With a
    :class:`StopRule` the effective budget is ``min(horizon,
    stop.horizon_cap)`` and the run halts early when the rule fires;
    without one it always runs the full horizon. Snapshots are taken every
    ``snapshot_stride`` steps (default: the pair count) plus the initial
    and final states.
    """
    if initial.n != params.n:
        raise InvalidParameterError("state and params disagree on agent count")
    if horizon < 0:
        raise InvalidParameterError("horizon must be non-negative")
    n = params.n
    m = pair_count(n)
    stride = m if snapshot_stride is None else int(snapshot_stride)
    if stride < 1:
        raise InvalidParameterError("snapshot_stride must be at least 1")

    eff_horizon = horizon if stop is None else min(horizon, stop.horizon_cap)
    use_stop = stop is not None
    freeze_window = stop.freeze_window if use_stop else 1
    diam_tol = stop.diam_tol if use_stop else 0.0

    x = initial.opinions.copy()
    pair_i = np.empty(eff_horizon, np.int32)
    pair_j = np.empty(eff_horizon, np.int32)
    moved_i = np.empty(eff_horizon, np.bool_)
    moved_j = np.empty(eff_horizon, np.bool_)
    event_t = np.empty(eff_horizon, np.int64)
    max_snaps = eff_horizon // stride + 2
    snap_t = np.empty(max_snaps, np.int64)
    snaps = np.empty((max_snaps, n, initial.d), np.float64)

    from ._kernel import simulate_kernel

    steps, n_events, n_snaps, stopped = simulate_kernel(
        x, params.bounds, params.weights,
        np.uint64(stream.seed), np.uint64(stream.cursor), np.int64(eff_horizon),
        use_stop, np.int64(freeze_window), float(diam_tol), np.int64(m),
        np.int64(stride),
        pair_i, pair_j, moved_i, moved_j, event_t, snap_t, snaps,
    )
    steps = int(steps)
    cursor_start = stream.cursor
    stream.cursor += steps

    trace = SimulationTrace(
        initial=initial,
        params=params,
        seed=stream.seed,
        cursor_start=cursor_start,
        cursor_end=stream.cursor,
        n_steps=steps,
        pair_i=pair_i[:steps].copy(),
        pair_j=pair_j[:steps].copy(),
        moved_i=moved_i[:steps].copy(),
        moved_j=moved_j[:steps].copy(),
        snapshot_times=snap_t[:n_snaps].copy(),
        snapshots=snaps[:n_snaps].copy(),
        edge_events=event_t[:n_events].copy(),
        stride=stride,
        stopped=bool(stopped),
    )
    return _freeze_trace_arrays(trace)


def state_at(trace: SimulationTrace, t: int) -> OpinionState:
    """State after step ``t`` (t=0 is the initial state).

    Replays recorded pairs forward from the nearest stored snapshot, so the
    cost is at most one snapshot stride of Python steps.
    """
    if not 0 <= t <= trace.n_steps:
        raise InvalidParameterError(f"time {t} outside 0..{trace.n_steps}")
    idx = int(np.searchsorted(trace.snapshot_times, t, side="right")) - 1
    x = trace.snapshots[idx].copy()
    bounds = trace.params.bounds
    weights = trace.params.weights
    for s in range(int(trace.snapshot_times[idx]) + 1, t + 1):
        pj = int(trace.pair_j[s - 1])
        if pj > x.shape[0]:
            continue
        _apply_pair_inplace(x, bounds, weights, int(trace.pair_i[s - 1]) - 1, pj - 1)
    return OpinionState(x)


def replay_snapshots(trace: SimulationTrace) -> np.ndarray:
    """Recompute every stored snapshot from the initial state in pure Python.

    Applies the recorded pairs step by step; the result must match
    ``trace.snapshots`` bit for bit, which the test suite asserts against
    the compiled kernel.
    """
    x = trace.initial.opinions.copy()
    bounds = trace.params.bounds
    weights = trace.params.weights
    out = np.empty_like(trace.snapshots)
    pos = 0
    if trace.snapshot_times[0] == 0:
        out[0] = x
        pos = 1
    for s in range(1, trace.n_steps + 1):
        pj = int(trace.pair_j[s - 1])
        if pj <= x.shape[0]:
            _apply_pair_inplace(x, bounds, weights, int(trace.pair_i[s - 1]) - 1, pj - 1)
        if pos < len(trace.snapshot_times) and trace.snapshot_times[pos] == s:
            out[pos] = x
            pos += 1
    return out
