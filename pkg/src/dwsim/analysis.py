"""Convergence detection, limit estimation, and batch statistics.

Time convention: step times are positive integers, so the earliest
reportable settling time is 1. A constant trajectory settles at 1, not 0.

Settling times are resolved at snapshot granularity: the reported value is
the first stored snapshot time after the last one whose deviation from the
limits exceeded eps. With snapshot stride 1 this is exact; with a coarser
stride it overshoots by less than one stride. Runs whose deviation is still
above eps at the end are censored (None), never given a sentinel value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import mean, median

import numpy as np

from .errors import InvalidParameterError
from .model import AgentParams, OpinionState, SimulationTrace, StopRule, opinion_diameter
from .topology import (
    ClusterSet,
    EdgeSet,
    TopologyStats,
    count_edge_changes,
    edge_set,
    epsilon_cluster,
    undirected_components,
)

__all__ = [
    "StopRule",
    "RunReport",
    "SeparationCheck",
    "BatchStats",
    "FreezeSummary",
    "detect_convergence",
    "tau_epsilon",
    "check_limit_separation",
    "batch_stats",
    "estimate_topology_freeze",
]


@dataclass(frozen=True, eq=False)
class RunReport:
    """Post-run verdict for one trace.

    ``converged`` means the trailing freeze window saw no edge flip and
    every component of the symmetrized final edge relation is tighter than
    the rule's diameter tolerance. ``limits`` are the final opinions
    themselves (within-cluster contraction puts any residual below the
    tolerance, so no extrapolation). The partition groups agents by the
    mutual-edge relation at the final state. ``separation_ok`` and
    ``boundary_flags`` are evaluated only for converged runs and are None /
    empty otherwise.
    """

    converged: bool
    n_steps: int
    limits: np.ndarray
    tau_table: dict
    xi: TopologyStats
    final_partition: tuple[ClusterSet, ...]
    separation_ok: bool | None
    boundary_flags: tuple[tuple[int, int], ...]
    diam_tol: float


@dataclass(frozen=True)
class SeparationCheck:
    """Outcome of the limit-separation dichotomy."""

    ok: bool
    boundary_pairs: tuple[tuple[int, int], ...]


def tau_epsilon(trace: SimulationTrace, limits, eps: float) -> int | None:
    """Settling time: first time the largest deviation from ``limits``
    drops to ``eps`` and stays there for the rest of the trace.

    Returns None (censored) when the deviation is still above ``eps`` at
    the last snapshot. See the module note for granularity.
    """
    if not (math.isfinite(eps) and eps > 0.0):
        raise InvalidParameterError("eps must be finite and positive")
    lim = limits.opinions if isinstance(limits, OpinionState) else np.asarray(limits, float)
    if lim.shape != (trace.initial.n, trace.initial.d):
        raise InvalidParameterError("limits shape must match the trace's agents")
    devs = np.linalg.norm(trace.snapshots - lim[None, :, :], axis=2).max(axis=1)
    above = devs > eps
    if not above.any():
        return 1
    last_bad = int(np.nonzero(above)[0].max())
    if last_bad == len(devs) - 1:
        return None
    return max(1, int(trace.snapshot_times[last_bad + 1]))


def _cross_cluster_separation(limits: np.ndarray, partition, params: AgentParams,
                              tol: float) -> SeparationCheck:
    label = {}
    for c_idx, cluster in enumerate(partition):
        for m in cluster.members:
            label[m] = c_idx
    n = params.n
    r = params.bounds
    ok = True
    boundary = []
    for i in range(1, n + 1):
        for j in range(i + 1, n + 1):
            if label[i] == label[j]:
                continue
            dd = float(np.linalg.norm(limits[i - 1] - limits[j - 1]))
            need = max(r[i - 1], r[j - 1])
            if abs(dd - need) <= tol:
                boundary.append((i, j))
            if dd < need - tol and dd > tol:
                ok = False
    return SeparationCheck(ok=ok, boundary_pairs=tuple(boundary))


def detect_convergence(trace: SimulationTrace, rule: StopRule,
                       tau_eps=(), separation_tol: float = 1e-6) -> RunReport:
    """Evaluate a finished trace against a stop rule.

    Works on any trace, whether or not the run itself used a stop rule:
    both convergence conditions are recomputed from the recorded events and
    the final state. ``tau_eps`` lists the eps values to tabulate settling
    times for.
    """
    params = trace.params
    final = trace.final
    es = edge_set(final, params)

    comps = undirected_components(es)
    diam_ok = all(opinion_diameter(final, c) <= rule.diam_tol for c in comps)
    no_recent_event = (len(trace.edge_events) == 0
                       or int(trace.edge_events[-1]) <= trace.n_steps - rule.freeze_window)
    converged = bool(diam_ok and no_recent_event)

    mutual = EdgeSet(es.matrix & es.matrix.T)
    partition = []
    for members in undirected_components(mutual):
        diam = opinion_diameter(final, members)
        partition.append(epsilon_cluster(final, members, max(rule.diam_tol, diam)))

    limits = final.opinions
    tau_table = {float(e): tau_epsilon(trace, limits, float(e)) for e in tau_eps}
    xi = count_edge_changes(trace, 0)

    if converged:
        sep = _cross_cluster_separation(limits, partition, params, separation_tol)
        separation_ok: bool | None = sep.ok
        boundary = sep.boundary_pairs
    else:
        separation_ok = None
        boundary = ()

    return RunReport(
        converged=converged,
        n_steps=trace.n_steps,
        limits=limits,
        tau_table=tau_table,
        xi=xi,
        final_partition=tuple(partition),
        separation_ok=separation_ok,
        boundary_flags=boundary,
        diam_tol=rule.diam_tol,
    )


def check_limit_separation(report: RunReport, params: AgentParams,
                           tol: float = 1e-6) -> SeparationCheck:
    """Limit dichotomy: cross-cluster limits either coincide (within tol)
    or sit at least the larger confidence bound apart (minus tol).

    Pairs within tol of exact equality with that bound are listed as
    boundary cases rather than failures; an edge survives there, so the
    limit is not an equilibrium even though the dichotomy holds.
    """
    if not report.converged:
        raise InvalidParameterError("separation check needs a converged report")
    return _cross_cluster_separation(report.limits, report.final_partition, params, tol)


@dataclass(frozen=True)
class BatchStats:
    """Aggregate over a batch of run reports (fixed input order, so float
    reductions are reproducible)."""

    n_runs: int
    n_converged: int
    consensus_frequency: float
    tau_mean: dict
    tau_median: dict
    tau_censored: dict
    xi_mean: float
    xi_max: int


def batch_stats(reports) -> BatchStats:
    reports = list(reports)
    if not reports:
        raise InvalidParameterError("need at least one report")
    n_runs = len(reports)
    n_conv = sum(1 for rep in reports if rep.converged)
    n_consensus = sum(1 for rep in reports
                      if rep.converged and len(rep.final_partition) == 1)
    eps_keys = sorted({e for rep in reports for e in rep.tau_table})
    tau_mean: dict = {}
    tau_median: dict = {}
    tau_censored: dict = {}
    for e in eps_keys:
        vals = [rep.tau_table[e] for rep in reports
                if e in rep.tau_table and rep.converged]
        known = [v for v in vals if v is not None]
        tau_censored[e] = sum(1 for v in vals if v is None) + (n_runs - len(vals))
        tau_mean[e] = float(mean(known)) if known else None
        tau_median[e] = float(median(known)) if known else None
    xis = [rep.xi.xi for rep in reports]
    return BatchStats(
        n_runs=n_runs,
        n_converged=n_conv,
        consensus_frequency=n_consensus / n_runs,
        tau_mean=tau_mean,
        tau_median=tau_median,
        tau_censored=tau_censored,
        xi_mean=float(mean(xis)),
        xi_max=max(xis),
    )


@dataclass(frozen=True)
class FreezeSummary:
    """Empirical distribution of topology-change counts across runs.

    ``fraction_xi_at_most`` maps each requested threshold to the observed
    fraction of runs whose change count stayed at or below it; these are
    finite-sample estimates, nothing more.
    """

    xi_values: tuple[int, ...]
    last_change_values: tuple
    fraction_xi_at_most: dict


def estimate_topology_freeze(reports, thresholds=()) -> FreezeSummary:
    reports = list(reports)
    if not reports:
        raise InvalidParameterError("need at least one report")
    xis = tuple(rep.xi.xi for rep in reports)
    lasts = tuple(rep.xi.last_change for rep in reports)
    frac = {int(t): sum(1 for v in xis if v <= t) / len(xis) for t in thresholds}
    return FreezeSummary(xi_values=xis, last_change_values=lasts,
                         fraction_xi_at_most=frac)
