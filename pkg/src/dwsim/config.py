"""Experiment configuration and reproducible materialization.

A config is one JSON-friendly document describing a batch: population
size and dimension, how to obtain bounds, weights, and initial opinions
(explicit values or seeded draws), the horizon and stop rule, which
settling tolerances to tabulate, and the seeding plan.

Every run gets its own substream of the master seed, and inside a run
the draws are split by purpose: substream 1 feeds parameter draws (all
bounds first, agent by agent, then all weights), substream 2 feeds the
initial opinions (agent by agent, coordinate by coordinate), substream 3
drives the simulation itself.  Explicit specs consume no draws, so
switching one spec to explicit never shifts the others.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

import numpy as np

from .analysis import RunReport, detect_convergence
from .errors import ConfigError
from .model import (
    AgentParams,
    OpinionState,
    SimulationTrace,
    StopRule,
    run_simulation,
)
from .rng import RandomStream

__all__ = [
    "ExperimentConfig",
    "RunSetup",
    "config_from_dict",
    "config_to_dict",
    "materialize_run",
    "run_configured",
    "fig1_cells",
    "fig2_cells",
    "DEFAULT_PRESET_SEED",
]

_SWEEP_N = 20
_SWEEP_D = 2
_SWEEP_HORIZON = 10_000_000

DEFAULT_PRESET_SEED = 1_000_003

_PARAM_SUBSTREAM = 1
_INIT_SUBSTREAM = 2
_SIM_SUBSTREAM = 3


def _require(cond: bool, fieldname: str, message: str) -> None:
    if not cond:
        raise ConfigError(fieldname, message)


def _as_positive_int(value, fieldname: str) -> int:
    _require(isinstance(value, int) and not isinstance(value, bool), fieldname,
             f"expected an integer, got {value!r}")
    _require(value >= 1, fieldname, f"must be at least 1, got {value}")
    return value


def _as_finite_float(value, fieldname: str) -> float:
    _require(isinstance(value, (int, float)) and not isinstance(value, bool),
             fieldname, f"expected a number, got {value!r}")
    out = float(value)
    _require(np.isfinite(out), fieldname, f"must be finite, got {value}")
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    """One batch: population, sourcing of parameters and state, seeding.

    ``r_spec`` is either ``{"kind": "explicit", "values": [...]}`` or
    ``{"kind": "scaled-uniform", "m_bar_r": s}`` drawing r_i = s * u_i
    with u_i uniform in the open unit interval.  ``mu_spec`` adds
    ``{"kind": "homogeneous", "mu_star": m}``.  ``init_spec`` is explicit
    values or ``{"kind": "uniform-box", "low": [...], "high": [...]}``.
    ``stop`` of None runs the plain horizon with no early stop rule.
    """

    n: int
    d: int
    r_spec: dict
    mu_spec: dict
    init_spec: dict
    horizon: int
    master_seed: int
    run_count: int
    stop: StopRule | None = None
    tau_eps: tuple[float, ...] = ()
    record_stride: int | None = None

    def __post_init__(self) -> None:
        _require(self.n >= 3, "n", f"population must be at least 3, got {self.n}")
        _require(self.d >= 1, "d", f"dimension must be at least 1, got {self.d}")
        _require(self.horizon >= 1, "horizon", "must be at least 1")
        _require(self.run_count >= 1, "run_count", "must be at least 1")
        _require(0 <= self.master_seed < 2**64, "master_seed",
                 "must fit in an unsigned 64-bit integer")
        if self.record_stride is not None:
            _require(self.record_stride >= 1, "record_stride", "must be at least 1")
        for e in self.tau_eps:
            _require(e > 0, "tau_eps", f"tolerances must be positive, got {e}")
        self._check_r_spec()
        self._check_mu_spec()
        self._check_init_spec()

    def _check_r_spec(self) -> None:
        kind = self.r_spec.get("kind")
        if kind == "explicit":
            vals = self.r_spec.get("values")
            _require(isinstance(vals, (list, tuple)) and len(vals) == self.n,
                     "r_spec.values", f"need {self.n} bounds")
            for v in vals:
                _require(_as_finite_float(v, "r_spec.values") > 0,
                         "r_spec.values", f"bounds must be positive, got {v}")
        elif kind == "scaled-uniform":
            s = _as_finite_float(self.r_spec.get("m_bar_r"), "r_spec.m_bar_r")
            _require(s > 0, "r_spec.m_bar_r", f"scale must be positive, got {s}")
        else:
            raise ConfigError("r_spec.kind",
                              f"expected 'explicit' or 'scaled-uniform', got {kind!r}")

    def _check_mu_spec(self) -> None:
        kind = self.mu_spec.get("kind")
        if kind == "explicit":
            vals = self.mu_spec.get("values")
            _require(isinstance(vals, (list, tuple)) and len(vals) == self.n,
                     "mu_spec.values", f"need {self.n} weights")
            for v in vals:
                fv = _as_finite_float(v, "mu_spec.values")
                _require(0 < fv < 1, "mu_spec.values",
                         f"weights must lie in (0, 1), got {v}")
        elif kind == "scaled-uniform":
            s = _as_finite_float(self.mu_spec.get("m_bar_u"), "mu_spec.m_bar_u")
            # Drawn weights are s times an open-unit-interval variate and
            # must stay below 1.
            _require(0 < s <= 1, "mu_spec.m_bar_u",
                     f"scale must lie in (0, 1], got {s}")
        elif kind == "homogeneous":
            m = _as_finite_float(self.mu_spec.get("mu_star"), "mu_spec.mu_star")
            _require(0 < m < 1, "mu_spec.mu_star",
                     f"shared weight must lie in (0, 1), got {m}")
        else:
            raise ConfigError(
                "mu_spec.kind",
                f"expected 'explicit', 'scaled-uniform' or 'homogeneous', got {kind!r}")

    def _check_init_spec(self) -> None:
        kind = self.init_spec.get("kind")
        if kind == "explicit":
            vals = self.init_spec.get("values")
            _require(isinstance(vals, (list, tuple)) and len(vals) == self.n,
                     "init_spec.values", f"need {self.n} opinion rows")
            for row in vals:
                _require(isinstance(row, (list, tuple)) and len(row) == self.d,
                         "init_spec.values", f"each row needs {self.d} coordinates")
                for v in row:
                    _as_finite_float(v, "init_spec.values")
        elif kind == "uniform-box":
            low = self._box_edge("low")
            high = self._box_edge("high")
            for lo, hi in zip(low, high):
                _require(lo < hi, "init_spec",
                         f"low must be below high, got [{lo}, {hi}]")
        else:
            raise ConfigError("init_spec.kind",
                              f"expected 'explicit' or 'uniform-box', got {kind!r}")

    def _box_edge(self, which: str) -> list[float]:
        raw = self.init_spec.get(which)
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            return [float(raw)] * self.d
        _require(isinstance(raw, (list, tuple)) and len(raw) == self.d,
                 f"init_spec.{which}", f"need a number or {self.d} numbers")
        return [_as_finite_float(v, f"init_spec.{which}") for v in raw]


@dataclass(frozen=True)
class RunSetup:
    """Everything one run needs, fully drawn and ready to execute."""

    run_index: int
    params: AgentParams
    initial: OpinionState
    stream: RandomStream
    horizon: int
    stop: StopRule | None
    tau_eps: tuple[float, ...]
    record_stride: int | None


def config_from_dict(doc: dict) -> ExperimentConfig:
    """Validate a parsed JSON document into a config.

    Unknown top-level keys are rejected so typos fail loudly.
    """
    if not isinstance(doc, dict):
        raise ConfigError("document", f"expected an object, got {type(doc).__name__}")
    known = {"n", "d", "r_spec", "mu_spec", "init_spec", "horizon", "stop",
             "tau_eps", "master_seed", "run_count", "record_stride"}
    extra = set(doc) - known
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown field")
    missing = {"n", "d", "r_spec", "mu_spec", "init_spec", "horizon",
               "master_seed", "run_count"} - set(doc)
    if missing:
        raise ConfigError(sorted(missing)[0], "required field is missing")

    stop = None
    if doc.get("stop") is not None:
        s = doc["stop"]
        if not isinstance(s, dict):
            raise ConfigError("stop", "expected an object")
        for key in ("freeze_window", "diam_tol", "horizon_cap"):
            if key not in s:
                raise ConfigError(f"stop.{key}", "required field is missing")
        try:
            stop = StopRule(
                freeze_window=_as_positive_int(s["freeze_window"], "stop.freeze_window"),
                diam_tol=_as_finite_float(s["diam_tol"], "stop.diam_tol"),
                horizon_cap=_as_positive_int(s["horizon_cap"], "stop.horizon_cap"),
            )
        except ValueError as exc:
            raise ConfigError("stop", str(exc)) from exc

    tau_raw = doc.get("tau_eps", [])
    if not isinstance(tau_raw, (list, tuple)):
        raise ConfigError("tau_eps", "expected a list of tolerances")
    tau = tuple(_as_finite_float(v, "tau_eps") for v in tau_raw)

    stride = doc.get("record_stride")
    if stride is not None:
        stride = _as_positive_int(stride, "record_stride")

    for spec_name in ("r_spec", "mu_spec", "init_spec"):
        if not isinstance(doc[spec_name], dict):
            raise ConfigError(spec_name, "expected an object with a 'kind' field")

    return ExperimentConfig(
        n=_as_positive_int(doc["n"], "n"),
        d=_as_positive_int(doc["d"], "d"),
        r_spec=doc["r_spec"],
        mu_spec=doc["mu_spec"],
        init_spec=doc["init_spec"],
        horizon=_as_positive_int(doc["horizon"], "horizon"),
        master_seed=_as_seed(doc["master_seed"]),
        run_count=_as_positive_int(doc["run_count"], "run_count"),
        stop=stop,
        tau_eps=tau,
        record_stride=stride,
    )


def _as_seed(value) -> int:
    if not isinstance(value, int) or isinstance(value, bool):
        raise ConfigError("master_seed", f"expected an integer, got {value!r}")
    if not 0 <= value < 2**64:
        raise ConfigError("master_seed", "must fit in an unsigned 64-bit integer")
    return value


def config_to_dict(config: ExperimentConfig) -> dict:
    """Inverse of ``config_from_dict``, suitable for JSON dumping."""
    doc: dict[str, Any] = {
        "n": config.n,
        "d": config.d,
        "r_spec": config.r_spec,
        "mu_spec": config.mu_spec,
        "init_spec": config.init_spec,
        "horizon": config.horizon,
        "master_seed": config.master_seed,
        "run_count": config.run_count,
        "tau_eps": list(config.tau_eps),
        "record_stride": config.record_stride,
    }
    if config.stop is None:
        doc["stop"] = None
    else:
        doc["stop"] = {
            "freeze_window": config.stop.freeze_window,
            "diam_tol": config.stop.diam_tol,
            "horizon_cap": config.stop.horizon_cap,
        }
    return doc


def _draw_params(config: ExperimentConfig, run: RandomStream) -> AgentParams:
    s = run.substream(_PARAM_SUBSTREAM)
    if config.r_spec["kind"] == "explicit":
        r = np.array([float(v) for v in config.r_spec["values"]], dtype=np.float64)
    else:
        scale = float(config.r_spec["m_bar_r"])
        r = np.array([scale * s.uniform_open01() for _ in range(config.n)])
    kind = config.mu_spec["kind"]
    if kind == "explicit":
        mu = np.array([float(v) for v in config.mu_spec["values"]], dtype=np.float64)
    elif kind == "homogeneous":
        mu = np.full(config.n, float(config.mu_spec["mu_star"]), dtype=np.float64)
    else:
        scale = float(config.mu_spec["m_bar_u"])
        mu = np.array([scale * s.uniform_open01() for _ in range(config.n)])
    return AgentParams(r, mu)


def _draw_initial(config: ExperimentConfig, run: RandomStream) -> OpinionState:
    s = run.substream(_INIT_SUBSTREAM)
    if config.init_spec["kind"] == "explicit":
        x = np.array([[float(v) for v in row] for row in config.init_spec["values"]],
                     dtype=np.float64)
    else:
        low = [config.init_spec["low"]] * config.d \
            if isinstance(config.init_spec["low"], (int, float)) \
            else list(config.init_spec["low"])
        high = [config.init_spec["high"]] * config.d \
            if isinstance(config.init_spec["high"], (int, float)) \
            else list(config.init_spec["high"])
        x = np.empty((config.n, config.d), dtype=np.float64)
        for i in range(config.n):
            for k in range(config.d):
                x[i, k] = s.uniform(float(low[k]), float(high[k]))
    return OpinionState(x)


def materialize_run(config: ExperimentConfig, run_index: int) -> RunSetup:
    """Draw one run's parameters, initial state, and simulation stream."""
    if not 0 <= run_index < config.run_count:
        raise ConfigError("run_index",
                          f"must lie in [0, {config.run_count}), got {run_index}")
    run = RandomStream(config.master_seed).substream(run_index)
    return RunSetup(
        run_index=run_index,
        params=_draw_params(config, run),
        initial=_draw_initial(config, run),
        stream=run.substream(_SIM_SUBSTREAM),
        horizon=config.horizon,
        stop=config.stop,
        tau_eps=config.tau_eps,
        record_stride=config.record_stride,
    )


def run_configured(
    config: ExperimentConfig, run_index: int
) -> tuple[SimulationTrace, RunReport]:
    """Materialize, simulate, and evaluate one run of a config."""
    setup = materialize_run(config, run_index)
    trace = run_simulation(
        setup.initial,
        setup.params,
        setup.stream,
        setup.horizon,
        stop=setup.stop,
        snapshot_stride=setup.record_stride,
    )
    rule = setup.stop if setup.stop is not None else StopRule.default_for(config.n)
    report = detect_convergence(trace, rule, tau_eps=setup.tau_eps)
    return trace, report


def _sweep_config(mu_spec: dict, m_bar_r: float, seeds: int,
                  master_seed: int) -> ExperimentConfig:
    return ExperimentConfig(
        n=_SWEEP_N,
        d=_SWEEP_D,
        r_spec={"kind": "scaled-uniform", "m_bar_r": m_bar_r},
        mu_spec=mu_spec,
        init_spec={"kind": "uniform-box", "low": 0.0, "high": 1.0},
        horizon=_SWEEP_HORIZON,
        master_seed=master_seed,
        run_count=seeds,
        stop=StopRule.default_for(_SWEEP_N),
        tau_eps=(0.01,),
    )


def fig1_cells(seeds: int = 64,
               master_seed: int = DEFAULT_PRESET_SEED
               ) -> tuple[tuple[str, ExperimentConfig], ...]:
    """Heterogeneous sweep: bound scale crossed with weight scale.

    Eight cells, 20 agents in the plane, bounds and weights drawn as
    scaled uniforms, opinions uniform in the unit square.  Each cell gets
    its own substream of ``master_seed`` so cells are independent and the
    whole sweep is reproducible from one integer.
    """
    base = RandomStream(master_seed)
    cells = []
    index = 0
    for m_bar_r in (0.5, 1.0):
        for m_bar_u in (0.25, 0.5, 0.75, 1.0):
            name = f"r{m_bar_r}_u{m_bar_u}"
            cfg = _sweep_config({"kind": "scaled-uniform", "m_bar_u": m_bar_u},
                                m_bar_r, seeds, base.substream(index).seed)
            cells.append((name, cfg))
            index += 1
    return tuple(cells)


def fig2_cells(seeds: int = 64,
               master_seed: int = DEFAULT_PRESET_SEED
               ) -> tuple[tuple[str, ExperimentConfig], ...]:
    """Homogeneous-weight sweep matched to the heterogeneous one.

    Same eight-cell grid, but every agent shares one weight, chosen as
    half the matched heterogeneous scale so both sweeps have equal mean
    weight: mu_star in {0.125, 0.25, 0.375, 0.5}.  The top level is one
    half; see the matched m_bar_u = 1.0 column of ``fig1_cells``.  Cell
    substream indices continue after the heterogeneous sweep's, so no
    cell shares a seed across the two sweeps.
    """
    base = RandomStream(master_seed)
    cells = []
    index = 8
    for m_bar_r in (0.5, 1.0):
        for mu_star in (0.125, 0.25, 0.375, 0.5):
            name = f"r{m_bar_r}_star{mu_star}"
            cfg = _sweep_config({"kind": "homogeneous", "mu_star": mu_star},
                                m_bar_r, seeds, base.substream(index).seed)
            cells.append((name, cfg))
            index += 1
    return tuple(cells)
