"""Command-line front end: simulate, repro, slow, merge-demo.

Exit codes: 0 success, 1 a verification or control procedure failed,
2 bad configuration or parameters, 3 could not read or write a file.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .adversarial import build_slow_instance, evaluate_slow_instance, slow_tau_curve
from .analysis import BatchStats, batch_stats
from .config import (
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    fig1_cells,
    fig2_cells,
    materialize_run,
    run_configured,
)
from .control import merge_eps_clusters
from .errors import (
    ConfigError,
    ControlError,
    InvalidParameterError,
    NotErgodicError,
    VerificationError,
)
from .reporting import (
    SCHEMA_VERSION,
    merge_trace_to_dict,
    write_events_csv,
    write_json,
    write_report_json,
    write_trace_csv,
)

__all__ = ["main"]


def _load_config(path: str) -> ExperimentConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError:
        raise
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("document", f"not valid JSON (line {exc.lineno}): {exc.msg}")
    return config_from_dict(doc)


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _stats_doc(stats: BatchStats) -> dict:
    return {
        "n_runs": stats.n_runs,
        "n_converged": stats.n_converged,
        "consensus_frequency": float(stats.consensus_frequency),
        "tau_mean": {k: (None if v is None else float(v))
                     for k, v in stats.tau_mean.items()},
        "tau_median": {k: (None if v is None else float(v))
                       for k, v in stats.tau_median.items()},
        "tau_censored": {k: int(v) for k, v in stats.tau_censored.items()},
        "xi_mean": float(stats.xi_mean),
        "xi_max": int(stats.xi_max),
    }


def _run_batch(config: ExperimentConfig, out: Path) -> None:
    reports = []
    for idx in range(config.run_count):
        run_dir = out / f"run_{idx:04d}"
        run_dir.mkdir(parents=True, exist_ok=True)
        trace, report = run_configured(config, idx)
        write_trace_csv(run_dir / "trace.csv", trace)
        write_events_csv(run_dir / "events.csv", trace)
        write_report_json(run_dir / "report.json", trace, report,
                          context={"run_index": idx})
        reports.append(report)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "config": config_to_dict(config),
        "stats": _stats_doc(batch_stats(reports)),
    }
    write_json(out / "summary.json", doc)


def _cmd_simulate(args) -> int:
    config = _load_config(args.config)
    if args.seed is not None:
        config = dataclasses.replace(config, master_seed=args.seed)
    _run_batch(config, _outdir(args.out))
    return 0


def _cmd_repro(args) -> int:
    cells = fig1_cells(args.seeds) if args.figure == "fig1" else fig2_cells(args.seeds)
    root = _outdir(args.out) / args.figure
    cell_stats = {}
    for name, config in cells:
        cell_dir = root / name
        cell_dir.mkdir(parents=True, exist_ok=True)
        _run_batch(config, cell_dir)
        with open(cell_dir / "summary.json", encoding="utf-8") as fh:
            cell_stats[name] = json.load(fh)["stats"]
    write_json(root / "summary.json",
               {"schema_version": SCHEMA_VERSION, "cells": cell_stats})
    return 0


def _cmd_slow(args) -> int:
    inst = build_slow_instance(
        args.ri, args.rj, args.rk, args.mui, args.muj, args.muk, args.K
    )
    report = evaluate_slow_instance(inst)
    out = _outdir(args.out)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "contact_steps": inst.contact_steps,
        "margin": inst.margin,
        "wide_start": inst.wide_start,
        "bounds": [float(v) for v in inst.params.bounds],
        "weights": [float(v) for v in inst.params.weights],
        "initial": [[float(v) for v in row] for row in inst.initial.opinions],
        "checks": {
            "pair_only_interactions": report.pair_only_interactions,
            "exact_contact": report.exact_contact,
            "boundary_contact": report.boundary_contact,
            "slowness_certificate": report.slowness_certificate,
        },
        "max_deviation": report.max_deviation,
        "telescope_deviation": report.telescope_deviation,
        "ok": report.ok,
    }
    write_json(out / "slow.json", doc)
    if args.curve:
        try:
            ks = [int(tok) for tok in args.curve.split(",") if tok.strip()]
        except ValueError:
            raise ConfigError("curve", f"expected a comma list of integers, "
                                       f"got {args.curve!r}")
        rows = slow_tau_curve(args.ri, args.rj, args.rk,
                              args.mui, args.muj, args.muk,
                              ks, range(args.curve_seeds))
        lines = ["contact_steps,median_tau,n_runs,n_censored"]
        for row in rows:
            med = "" if row.median_tau is None else repr(float(row.median_tau))
            lines.append(f"{row.contact_steps},{med},{row.n_runs},{row.n_censored}")
        (out / "slow_curve.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    if not report.ok:
        print("slow-instance verification failed", file=sys.stderr)
        return 1
    return 0


def _parse_members(raw: str, flag: str) -> tuple[int, ...]:
    try:
        members = tuple(int(tok) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(flag, f"expected a comma list of integers, got {raw!r}")
    if not members:
        raise ConfigError(flag, "needs at least one member")
    return members


def _cmd_merge_demo(args) -> int:
    config = _load_config(args.config)
    setup = materialize_run(config, 0)
    a = _parse_members(args.a, "a")
    b = _parse_members(args.b, "b")
    new_state, trace = merge_eps_clusters(
        setup.initial, setup.params, a, b, args.eps
    )
    out = _outdir(args.out)
    doc = merge_trace_to_dict(trace)
    doc["cluster_a"] = list(a)
    doc["cluster_b"] = list(b)
    doc["final_opinions"] = [[float(v) for v in row] for row in new_state.opinions]
    write_json(out / "merge.json", doc)
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dwsim",
        description="Seeded bounded-confidence simulator and verification harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a config's batch and write outputs")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config's master seed")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("repro", help="run a preset sweep")
    p.add_argument("figure", choices=("fig1", "fig2"))
    p.add_argument("--out", required=True)
    p.add_argument("--seeds", type=int, default=64, help="runs per cell")
    p.set_defaults(func=_cmd_repro)

    p = sub.add_parser("slow", help="build and certify a slow-convergence instance")
    p.add_argument("--K", type=int, required=True, dest="K",
                   help="forced interactions before contact")
    p.add_argument("--ri", type=float, default=1.0)
    p.add_argument("--rj", type=float, default=2.0)
    p.add_argument("--rk", type=float, default=1.0)
    p.add_argument("--mui", type=float, default=0.4)
    p.add_argument("--muj", type=float, default=0.4)
    p.add_argument("--muk", type=float, default=0.4)
    p.add_argument("--out", required=True)
    p.add_argument("--curve", default=None,
                   help="comma list of K values for an empirical settling curve")
    p.add_argument("--curve-seeds", type=int, default=50)
    p.set_defaults(func=_cmd_slow)

    p = sub.add_parser("merge-demo", help="merge two clusters and dump the record")
    p.add_argument("--config", required=True)
    p.add_argument("--a", required=True, help="comma list of cluster members")
    p.add_argument("--b", required=True, help="comma list of cluster members")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_merge_demo)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except InvalidParameterError as exc:
        print(f"parameter error: {exc}", file=sys.stderr)
        return 2
    except (VerificationError, ControlError, NotErgodicError) as exc:
        print(f"verification failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
