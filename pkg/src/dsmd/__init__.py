"""Distributed stochastic mirror descent over time-varying networks."""

from .algorithms import (
    EpochSchedule,
    TheoremConstants,
    epoch_schedule,
    run_dsmd,
    run_dsps,
    run_epoch_dsmd,
    step_bound_check,
    theorem1_bound,
    theorem2_bound,
    theorem_constants,
)
from .geometry import (
    ConstraintSet,
    MirrorGeometry,
    bregman_divergence,
    bregman_project,
    entropic_step,
    euclidean_diameter,
    mirror_step,
    phi_diameter,
)
from .harness import ExperimentConfig, disagreement_report, rate_fit, run_experiment
from .network import (
    MixingSchedule,
    mixing_bound_check,
    mixing_constants,
    sample_matrix,
    transition_product,
    verify_assumption1,
)
from .problem import (
    ProblemInstance,
    QuadraticObjective,
    StochasticOracle,
    certify_G,
    certify_sigma_F,
    global_optimum,
    noisy_subgradient,
    random_instance,
    subgradient,
)

__all__ = [
    "bregman_divergence",
    "bregman_project",
    "certify_G",
    "certify_sigma_F",
    "ConstraintSet",
    "disagreement_report",
    "entropic_step",
    "epoch_schedule",
    "EpochSchedule",
    "euclidean_diameter",
    "ExperimentConfig",
    "global_optimum",
    "mirror_step",
    "MirrorGeometry",
    "mixing_bound_check",
    "mixing_constants",
    "MixingSchedule",
    "noisy_subgradient",
    "phi_diameter",
    "ProblemInstance",
    "QuadraticObjective",
    "random_instance",
    "rate_fit",
    "run_dsmd",
    "run_dsps",
    "run_epoch_dsmd",
    "run_experiment",
    "sample_matrix",
    "step_bound_check",
    "StochasticOracle",
    "subgradient",
    "theorem1_bound",
    "theorem2_bound",
    "theorem_constants",
    "TheoremConstants",
    "transition_product",
    "verify_assumption1",
]

__version__ = "0.1.0"
