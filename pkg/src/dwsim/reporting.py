"""Stable on-disk formats for traces, run reports, and merge records.

Everything written here must be byte-identical across repeated runs with
the same seed: floats go through the shortest round-trip decimal form,
JSON keys are sorted, and no timestamps or environment details are ever
included.  Report documents carry a schema version; readers accept any
minor revision of a known major and refuse the rest.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .analysis import RunReport
from .control import MergeTrace
from .errors import ConfigError
from .model import SimulationTrace, dw_step, state_at
from .topology import edge_set

__all__ = [
    "SCHEMA_VERSION",
    "write_trace_csv",
    "write_events_csv",
    "report_to_dict",
    "write_report_json",
    "read_report_json",
    "merge_trace_to_dict",
    "write_json",
]

SCHEMA_VERSION = "1.0.0"


def _fmt(v: float) -> str:
    return repr(float(v))


def write_trace_csv(path, trace: SimulationTrace) -> None:
    """Snapshot rows: time, 1-based agent, then one column per coordinate."""
    d = trace.initial.d
    header = "t,agent," + ",".join(f"x_{k + 1}" for k in range(d))
    lines = [header]
    for idx in range(len(trace.snapshot_times)):
        t = int(trace.snapshot_times[idx])
        snap = trace.snapshots[idx]
        for agent in range(snap.shape[0]):
            coords = ",".join(_fmt(snap[agent, k]) for k in range(d))
            lines.append(f"{t},{agent + 1},{coords}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _edge_tokens(pairs) -> str:
    return ";".join(f"{i}>{j}" for i, j in pairs)


def write_events_csv(path, trace: SimulationTrace) -> None:
    """One row per topology change: step, edges gained, edges lost.

    The edge sets on both sides of each recorded change are rebuilt by
    replaying from the nearest stored snapshot, so the file is complete
    even though the simulation only logs times.
    """
    lines = ["t,edges_added,edges_removed"]
    for t in (int(v) for v in trace.edge_events):
        before = state_at(trace, t - 1)
        after = dw_step(before, trace.params, trace.pair_at(t))
        e_before = edge_set(before, trace.params).matrix
        e_after = edge_set(after, trace.params).matrix
        added = np.argwhere(e_after & ~e_before) + 1
        removed = np.argwhere(e_before & ~e_after) + 1
        lines.append(
            f"{t},{_edge_tokens(map(tuple, added))},"
            f"{_edge_tokens(map(tuple, removed))}"
        )
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def report_to_dict(trace: SimulationTrace, report: RunReport,
                   context: dict | None = None) -> dict:
    """Flatten one run into a JSON-ready document."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "simulation": {
            "seed": int(trace.seed),
            "cursor_start": int(trace.cursor_start),
            "cursor_end": int(trace.cursor_end),
            "n_steps": int(trace.n_steps),
            "stride": int(trace.stride),
            "stopped": bool(trace.stopped),
            "forced": bool(trace.forced),
        },
        "params": {
            "bounds": [float(v) for v in trace.params.bounds],
            "weights": [float(v) for v in trace.params.weights],
        },
        "initial": [[float(v) for v in row] for row in trace.initial.opinions],
        "convergence": {
            "converged": bool(report.converged),
            "limits": [[float(v) for v in row] for row in report.limits],
            "tau": {repr(float(e)): (None if v is None else int(v))
                    for e, v in report.tau_table.items()},
            "xi": int(report.xi.xi),
            "last_change": (None if report.xi.last_change is None
                            else int(report.xi.last_change)),
            "partition": [
                {"members": [int(m) for m in c.members], "eps": float(c.eps)}
                for c in report.final_partition
            ],
            "separation_ok": report.separation_ok,
            "boundary_flags": [[int(i), int(j)] for i, j in report.boundary_flags],
            "diam_tol": float(report.diam_tol),
        },
    }
    if context:
        doc["context"] = context
    return doc


def write_json(path, doc: dict) -> None:
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")


def write_report_json(path, trace: SimulationTrace, report: RunReport,
                      context: dict | None = None) -> None:
    write_json(path, report_to_dict(trace, report, context))


def read_report_json(path) -> dict:
    """Load a report document, refusing schema majors we do not know."""
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("schema_version")
    if not isinstance(version, str) or "." not in version:
        raise ConfigError("schema_version", f"missing or malformed: {version!r}")
    major = version.split(".", 1)[0]
    ours = SCHEMA_VERSION.split(".", 1)[0]
    if major != ours:
        raise ConfigError(
            "schema_version",
            f"major {major} is not supported (this build reads {ours}.x)",
        )
    return doc


def merge_trace_to_dict(mt: MergeTrace) -> dict:
    """Flatten a merge record, phase times and pull-in progress included."""
    return {
        "schema_version": SCHEMA_VERSION,
        "eps": float(mt.eps),
        "bridge": [mt.bridge.i, mt.bridge.j],
        "anchor": int(mt.anchor),
        "union_members": [int(m) for m in mt.union_members],
        "frame_origin": [float(v) for v in mt.frame_origin],
        "frame_axis": [float(v) for v in mt.frame_axis],
        "phase_times": {
            "approach_done": int(mt.t1),
            "rounds_done": int(mt.t_rounds_done),
            "all_done": int(mt.t_star),
            "n_rounds": int(mt.n_rounds),
        },
        "boundary_times": [int(t) for t in mt.boundary_times],
        "delta_lambda": [float(v) for v in mt.delta_lambda_history],
        "anchor_gap": [float(v) for v in mt.anchor_gap_history],
        "reach": [float(v) for v in mt.reach_history],
        "contract_steps": [
            {
                "pair": [s.pair.i, s.pair.j],
                "diam_before": float(s.diam_before),
                "dist_after": float(s.dist_after),
                "diam_after": float(s.diam_after),
                "max_other_first": float(s.max_other_first),
                "max_other_second": float(s.max_other_second),
            }
            for s in mt.contract_steps
        ],
        "length_bound": int(mt.length_bound),
        "bound_breakdown": {
            k: (int(v) if isinstance(v, (int, np.integer)) else float(v))
            for k, v in mt.bound_breakdown.items()
        },
        "schedule": [[p.i, p.j] for p in mt.schedule.steps],
    }
