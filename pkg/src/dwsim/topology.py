"""Directed influence topology over an opinion state.

Edge (i, j) is present when agent i's opinion lies within agent j's
confidence bound, i.e. i can influence j. Distances reuse the arithmetic
of the core step so edge membership decisions agree bit for bit with the
simulation kernel's incremental bookkeeping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError
from .model import AgentParams, OpinionState, SimulationTrace, _distance, opinion_diameter


@dataclass(frozen=True, eq=False)
class EdgeSet:
    """Dense directed adjacency; ``matrix[i-1, j-1]`` holds edge (i, j)."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=bool)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise InvalidParameterError("adjacency must be square")
        if m.diagonal().any():
            raise InvalidParameterError("self-edges are not part of the relation")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def has_edge(self, i: int, j: int) -> bool:
        if not (1 <= i <= self.n and 1 <= j <= self.n and i != j):
            raise InvalidParameterError(f"({i}, {j}) is not a valid ordered pair")
        return bool(self.matrix[i - 1, j - 1])

    def edges(self) -> list[tuple[int, int]]:
        """All ordered edges as 1-based pairs, lexicographically sorted."""
        ii, jj = np.nonzero(self.matrix)
        return [(int(a) + 1, int(b) + 1) for a, b in zip(ii, jj)]

    def __eq__(self, other) -> bool:
        if not isinstance(other, EdgeSet):
            return NotImplemented
        return bool(np.array_equal(self.matrix, other.matrix))

    def __ne__(self, other) -> bool:
        eq = self.__eq__(other)
        return eq if eq is NotImplemented else not eq


@dataclass(frozen=True)
class TopologyStats:
    """Edge-change count over a window.

    A change at time s means the edge sets of the states at times s and
    s+1 differ; ``xi`` counts such s at or after the window start and
    ``last_change`` is the largest one, or None if the topology never
    changed in the window.
    """

    xi: int
    last_change: int | None


@dataclass(frozen=True)
class ClusterSet:
    """Agent subset certified to have opinion diameter at most ``eps``
    at the time it was built. Membership is 1-based and sorted."""

    members: tuple[int, ...]
    eps: float


def epsilon_cluster(state: OpinionState, members, eps: float) -> ClusterSet:
    if not is_epsilon_cluster(state, members, eps):
        raise InvalidParameterError(
            f"subset {sorted(set(members))} has diameter above {eps}")
    return ClusterSet(tuple(sorted(set(int(m) for m in members))), float(eps))


def is_epsilon_cluster(state: OpinionState, subset, eps: float) -> bool:
    if not np.isfinite(eps) or eps < 0.0:
        raise InvalidParameterError("eps must be finite and non-negative")
    members = set(int(m) for m in subset)
    if not members:
        raise InvalidParameterError("subset must be non-empty")
    return opinion_diameter(state, members) <= eps


def _adjacency(x: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Raw-array edge matrix; the writable form behind :func:`edge_set`."""
    n = x.shape[0]
    m = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            dd = _distance(x, a, b)
            m[a, b] = dd <= r[b]
            m[b, a] = dd <= r[a]
    return m


def _refresh_rows(x: np.ndarray, r: np.ndarray, adj: np.ndarray, a: int) -> bool:
    """Recompute both edge directions incident to row ``a`` in place.

    Mirrors the kernel's incremental update; returns True on any flip.
    """
    changed = False
    for k in range(x.shape[0]):
        if k == a:
            continue
        dd = _distance(x, a, k)
        e_out = dd <= r[k]
        e_in = dd <= r[a]
        if adj[a, k] != e_out:
            adj[a, k] = e_out
            changed = True
        if adj[k, a] != e_in:
            adj[k, a] = e_in
            changed = True
    return changed


def edge_set(state: OpinionState, params: AgentParams) -> EdgeSet:
    """Full directed edge relation of a state, O(n^2 d)."""
    if state.n != params.n:
        raise InvalidParameterError("state and params disagree on agent count")
    n = state.n
    x = state.opinions
    r = params.bounds
    m = np.zeros((n, n), dtype=bool)
    for a in range(n):
        for b in range(a + 1, n):
            dd = _distance(x, a, b)
            m[a, b] = dd <= r[b]
            m[b, a] = dd <= r[a]
    return EdgeSet(m)


def is_complete_subset(es: EdgeSet, subset) -> bool:
    """True when every ordered pair inside ``subset`` is an edge."""
    members = sorted(set(int(m) for m in subset))
    if not members:
        raise InvalidParameterError("subset must be non-empty")
    if members[0] < 1 or members[-1] > es.n:
        raise InvalidParameterError("subset label out of range")
    idx = [m - 1 for m in members]
    for p in idx:
        for q in idx:
            if p != q and not es.matrix[p, q]:
                return False
    return True


def no_edges_between(es: EdgeSet, group_a, group_b) -> bool:
    """True when no edge in either direction joins the two groups."""
    a = set(int(m) for m in group_a)
    b = set(int(m) for m in group_b)
    if not a or not b:
        raise InvalidParameterError("both groups must be non-empty")
    if a & b:
        raise InvalidParameterError("groups must be disjoint")
    for m in a | b:
        if not 1 <= m <= es.n:
            raise InvalidParameterError("group label out of range")
    for p in a:
        for q in b:
            if es.matrix[p - 1, q - 1] or es.matrix[q - 1, p - 1]:
                return False
    return True


def undirected_components(es: EdgeSet) -> list[tuple[int, ...]]:
    """Connected components after symmetrizing the relation (either
    direction links a pair). Components come back sorted by least member."""
    n = es.n
    sym = es.matrix | es.matrix.T
    seen = [False] * n
    out: list[tuple[int, ...]] = []
    for s in range(n):
        if seen[s]:
            continue
        stack = [s]
        seen[s] = True
        comp = []
        while stack:
            v = stack.pop()
            comp.append(v + 1)
            for w in np.nonzero(sym[v])[0]:
                if not seen[w]:
                    seen[w] = True
                    stack.append(int(w))
        out.append(tuple(sorted(comp)))
    return out


def count_edge_changes(trace: SimulationTrace, from_t: int = 0) -> TopologyStats:
    """Edge-change statistics of a trace from time ``from_t`` onward."""
    if not 0 <= from_t <= trace.n_steps:
        raise InvalidParameterError(f"window start {from_t} outside 0..{trace.n_steps}")
    change_times = trace.edge_events - 1
    kept = change_times[change_times >= from_t]
    if len(kept) == 0:
        return TopologyStats(xi=0, last_change=None)
    return TopologyStats(xi=int(len(kept)), last_change=int(kept.max()))
