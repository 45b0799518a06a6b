"""Grouped feature extractor trained against a synthetic unknown-attack sample
generator, with domain-generalization evaluation protocols."""

from dgua_fas._core import (
    DguaError,
    auc,
    eer_threshold,
    evaluate_checkpoint,
    generate_dataset,
    hter,
    pairwise_auc,
    run_experiment,
    score_checkpoint,
    smooth_targets,
)

__version__ = "0.1.0"

__all__ = [
    "DguaError",
    "auc",
    "eer_threshold",
    "evaluate_checkpoint",
    "generate_dataset",
    "hter",
    "pairwise_auc",
    "run_experiment",
    "score_checkpoint",
    "smooth_targets",
]
