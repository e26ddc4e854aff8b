"""Finite-sample laboratory: data, training, experiments and attacks."""

from .attacks import (
    AttackReport,
    attack_global_threshold,
    attack_lrt_histogram,
    attack_sample_threshold,
    sample_threshold_from_matrix,
    tpr_at_fpr,
)
from .data import FiniteDataset, sample_dataset
from .experiments import (
    empirical_test_error,
    leave_one_out_experiment,
    make_setup,
    run_mi_experiment,
    run_shadow_experiment,
)
from .training import TrainedModel, gradient, objective, train

__all__ = [
    "AttackReport", "FiniteDataset", "TrainedModel",
    "attack_global_threshold", "attack_lrt_histogram", "attack_sample_threshold",
    "empirical_test_error",
    "gradient", "leave_one_out_experiment", "make_setup", "objective",
    "run_mi_experiment", "run_shadow_experiment", "sample_dataset",
    "sample_threshold_from_matrix", "tpr_at_fpr", "train",
]
