"""Decentralized optimization with communication compression.

The package simulates gossip-based first-order methods on a single machine:
clients hold data shards, exchange compressed state over a mixing matrix,
and track gradients so that compression error does not accumulate.
"""

from .algorithms import (
    ALGORITHMS,
    MESSAGES_PER_ROUND,
    AlgoState,
    HyperParams,
    beer_step,
    choco_step,
    d2_step,
    dsgd_step,
    init_state,
    theoretical_stepsizes,
)
from .compression import (
    Compressor,
    Gsgd,
    Identity,
    RandK,
    RandKUnbiased,
    Scaled,
    TopK,
    bias_correct,
    parse_compressor,
)
from .datasets import (
    DataError,
    Dataset,
    Shard,
    parse_libsvm,
    partition_shuffled,
    partition_unshuffled,
    synth_binary,
    synth_quadratic,
    to_libsvm,
)
from .diagnostics import (
    MetricsRow,
    Omegas,
    contraction_slacks,
    find_feasible_constants,
    lyapunov_value,
    omegas,
    rate_bound_margins,
    rate_system,
    verify_rate_constants,
    write_csv,
)
from .estimator import CompressedGossipClassifier
from .experiment import (
    ConfigError,
    DivergenceError,
    ExperimentConfig,
    config_from_dict,
    run,
)
from .oracles import (
    LogisticObjective,
    QuadraticObjective,
    SmoothnessInfo,
    reference_minimum,
)
from .rng import RngStream
from .topology import (
    Graph,
    MixingMatrix,
    build_graph,
    lazy_mix,
    metropolis_weights,
    spectral_constants,
)

__version__ = "0.1.0"

__all__ = [
    "ALGORITHMS",
    "MESSAGES_PER_ROUND",
    "AlgoState",
    "CompressedGossipClassifier",
    "Compressor",
    "ConfigError",
    "DataError",
    "Dataset",
    "DivergenceError",
    "ExperimentConfig",
    "Graph",
    "Gsgd",
    "HyperParams",
    "Identity",
    "LogisticObjective",
    "MetricsRow",
    "MixingMatrix",
    "Omegas",
    "QuadraticObjective",
    "RandK",
    "RandKUnbiased",
    "RngStream",
    "Scaled",
    "Shard",
    "SmoothnessInfo",
    "TopK",
    "beer_step",
    "bias_correct",
    "build_graph",
    "choco_step",
    "config_from_dict",
    "contraction_slacks",
    "d2_step",
    "dsgd_step",
    "find_feasible_constants",
    "init_state",
    "lazy_mix",
    "lyapunov_value",
    "metropolis_weights",
    "omegas",
    "parse_compressor",
    "parse_libsvm",
    "partition_shuffled",
    "partition_unshuffled",
    "rate_bound_margins",
    "rate_system",
    "reference_minimum",
    "run",
    "spectral_constants",
    "synth_binary",
    "synth_quadratic",
    "theoretical_stepsizes",
    "to_libsvm",
    "verify_rate_constants",
    "write_csv",
]
