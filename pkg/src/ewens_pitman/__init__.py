"""Ewens-Pitman random partitions: exact laws, streaming simulation and
martingale limit theorems for the block counts K_n and K_{r,n}."""

from ._version import __version__, version_string
from .exactmath import (
    ExactDistribution,
    GFCTable,
    PrecisionWarning,
    b_seq,
    cross_moment_KnS,
    cross_moment_KrnS,
    dp_dist_oracle,
    enumerate_joint_oracle,
    exact_dist_Kn,
    falling_moment_Kn,
    falling_moment_Krn,
    gfc_oracle,
    gfc_table,
    limit_moment_S,
    mean_Kn_exact,
    raw_moment_Kn,
    raw_moment_Krn,
)
from .params import ModelParams, ParameterError
from .partition import (
    PartitionState,
    StepOutcome,
    advance_many,
    new_state,
    simulate,
    simulate_batch,
    simulate_counts,
    step,
    transition_probs,
)
from .records import FluctuationSample, TrajectoryRecord
from .rng import PhiloxStream
from .signedlog import SignedLogValue
from .stats import ExperimentConfig, ExperimentResult, ks_statistic, moment_estimate, run_experiment

__all__ = [
    "ExactDistribution",
    "ExperimentConfig",
    "ExperimentResult",
    "FluctuationSample",
    "GFCTable",
    "ModelParams",
    "ParameterError",
    "PartitionState",
    "PhiloxStream",
    "PrecisionWarning",
    "SignedLogValue",
    "StepOutcome",
    "TrajectoryRecord",
    "__version__",
    "advance_many",
    "b_seq",
    "cross_moment_KnS",
    "cross_moment_KrnS",
    "dp_dist_oracle",
    "enumerate_joint_oracle",
    "exact_dist_Kn",
    "falling_moment_Kn",
    "falling_moment_Krn",
    "gfc_oracle",
    "gfc_table",
    "ks_statistic",
    "limit_moment_S",
    "mean_Kn_exact",
    "moment_estimate",
    "new_state",
    "raw_moment_Kn",
    "raw_moment_Krn",
    "run_experiment",
    "simulate",
    "simulate_batch",
    "simulate_counts",
    "step",
    "transition_probs",
    "version_string",
]
