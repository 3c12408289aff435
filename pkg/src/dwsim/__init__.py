"""Simulator and verification harness for heterogeneous bounded-confidence
opinion dynamics.

Agents hold d-dimensional opinions and meet in random pairs; each agent
moves toward a partner it finds within its own confidence bound by its
own weighting factor.  The package simulates that process bit-exactly
from a counter-based seeded stream, detects convergence and topology
freeze, builds designed pair schedules that merge opinion clusters or
force a group to consensus, constructs tuned instances whose settling
time exceeds any bound, and checks the row-stochastic matrix facts the
analysis rests on.
"""

from .adversarial import (
    SlowCurvePoint,
    SlowInstance,
    VerificationReport,
    build_slow_instance,
    evaluate_slow_instance,
    forced_prefix_trace,
    slow_tau_curve,
    verify_slow_instance,
)
from .analysis import (
    BatchStats,
    FreezeSummary,
    RunReport,
    SeparationCheck,
    batch_stats,
    check_limit_separation,
    detect_convergence,
    estimate_topology_freeze,
    tau_epsilon,
)
from .config import (
    DEFAULT_PRESET_SEED,
    ExperimentConfig,
    RunSetup,
    config_from_dict,
    config_to_dict,
    fig1_cells,
    fig2_cells,
    materialize_run,
    run_configured,
)
from .control import (
    ContractStep,
    ControlSchedule,
    MergeTrace,
    apply_schedule,
    eps_upper_bound,
    global_merge_schedule,
    hub_consensus_schedule,
    merge_eps_clusters,
)
from .errors import (
    ConfigError,
    ControlError,
    InvalidParameterError,
    NotErgodicError,
    VerificationError,
)
from .model import (
    AgentParams,
    OpinionState,
    SimulationTrace,
    StopRule,
    UnorderedPair,
    dw_step,
    opinion_diameter,
    replay_snapshots,
    run_simulation,
    sample_pair,
    state_at,
    step_with_gates,
)
from .reporting import (
    SCHEMA_VERSION,
    merge_trace_to_dict,
    read_report_json,
    report_to_dict,
    write_events_csv,
    write_json,
    write_report_json,
    write_trace_csv,
)
from .rng import RandomStream, index_of_pair, mix64, pair_count, pair_from_index
from .stochmat import (
    SpreadReport,
    StochasticMatrix,
    check_mix_distance_bound,
    is_ergodic,
    pair_update_matrix,
    spread,
    stationary_distribution,
    verify_hub_window,
    verify_spread_contraction,
    window_product,
)
from .topology import (
    ClusterSet,
    EdgeSet,
    TopologyStats,
    count_edge_changes,
    edge_set,
    epsilon_cluster,
    is_complete_subset,
    is_epsilon_cluster,
    no_edges_between,
    undirected_components,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "AgentParams",
    "BatchStats",
    "ClusterSet",
    "ConfigError",
    "ContractStep",
    "ControlError",
    "ControlSchedule",
    "DEFAULT_PRESET_SEED",
    "EdgeSet",
    "ExperimentConfig",
    "FreezeSummary",
    "InvalidParameterError",
    "MergeTrace",
    "NotErgodicError",
    "OpinionState",
    "RandomStream",
    "RunReport",
    "RunSetup",
    "SCHEMA_VERSION",
    "SeparationCheck",
    "SimulationTrace",
    "SlowCurvePoint",
    "SlowInstance",
    "SpreadReport",
    "StochasticMatrix",
    "StopRule",
    "TopologyStats",
    "UnorderedPair",
    "VerificationError",
    "VerificationReport",
    "apply_schedule",
    "batch_stats",
    "build_slow_instance",
    "check_mix_distance_bound",
    "check_limit_separation",
    "config_from_dict",
    "config_to_dict",
    "count_edge_changes",
    "detect_convergence",
    "dw_step",
    "edge_set",
    "eps_upper_bound",
    "epsilon_cluster",
    "estimate_topology_freeze",
    "evaluate_slow_instance",
    "fig1_cells",
    "fig2_cells",
    "forced_prefix_trace",
    "global_merge_schedule",
    "hub_consensus_schedule",
    "index_of_pair",
    "is_complete_subset",
    "is_epsilon_cluster",
    "is_ergodic",
    "materialize_run",
    "merge_eps_clusters",
    "merge_trace_to_dict",
    "mix64",
    "no_edges_between",
    "opinion_diameter",
    "pair_count",
    "pair_from_index",
    "pair_update_matrix",
    "read_report_json",
    "replay_snapshots",
    "report_to_dict",
    "run_configured",
    "run_simulation",
    "sample_pair",
    "slow_tau_curve",
    "spread",
    "state_at",
    "stationary_distribution",
    "step_with_gates",
    "tau_epsilon",
    "undirected_components",
    "verify_hub_window",
    "verify_slow_instance",
    "verify_spread_contraction",
    "window_product",
    "write_events_csv",
    "write_json",
    "write_report_json",
    "write_trace_csv",
]
