"""Deterministic simulator for beep-channel MIS protocols."""

from .engine import (
    ChannelMode,
    HAS_KERNEL,
    SimResult,
    WakeupSchedule,
    compute_active_times,
    default_round_cap,
    deliver_round,
    run_simulation,
    survivors_at,
)
from .experiments import (
    ExperimentConfig,
    RunRecord,
    lowerbound_report,
    run_experiment,
    sweep,
    verify_file,
    write_csv,
)
from .lowerbound import (
    FailureProduct,
    UniformSchedule,
    empirical_failure_rate,
    failure_prob,
    min_product_over_p,
    round_failure_product,
    simulate_uniform_process,
)
from .graphs import (
    Graph,
    Status,
    VerificationResult,
    gen_bipartite_family,
    gen_clique,
    gen_gnp,
    gen_ring,
    good_vertices,
    read_edge_list,
    read_status_file,
    verify_mis,
    write_edge_list,
)
from .protocols import (
    Algo1NoCdProtocol,
    Algo1Protocol,
    Algo2Protocol,
    ceil_log2,
    phase_probability,
)
from .rng import SplitMix64

__version__ = "0.1.0"

__all__ = [
    "Algo1NoCdProtocol",
    "Algo1Protocol",
    "Algo2Protocol",
    "ChannelMode",
    "ExperimentConfig",
    "FailureProduct",
    "Graph",
    "HAS_KERNEL",
    "RunRecord",
    "SimResult",
    "SplitMix64",
    "Status",
    "UniformSchedule",
    "VerificationResult",
    "WakeupSchedule",
    "ceil_log2",
    "compute_active_times",
    "default_round_cap",
    "deliver_round",
    "empirical_failure_rate",
    "failure_prob",
    "gen_bipartite_family",
    "gen_clique",
    "gen_gnp",
    "gen_ring",
    "good_vertices",
    "lowerbound_report",
    "min_product_over_p",
    "phase_probability",
    "read_edge_list",
    "read_status_file",
    "round_failure_product",
    "run_experiment",
    "run_simulation",
    "simulate_uniform_process",
    "survivors_at",
    "sweep",
    "verify_file",
    "verify_mis",
    "write_csv",
    "write_edge_list",
    "__version__",
]
