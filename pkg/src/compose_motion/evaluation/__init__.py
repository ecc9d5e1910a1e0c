"""Evaluation metrics, feature extractors and the ablation harness."""

from .ablation import ARM_SPECS, ArmSpec, run_ablation
from .features import HandcraftedExtractor, InvalidStateError, TrainedClassifier, accuracy, extract_features
from .metrics import (GaussianStats, MetricsReport, bootstrap_halfwidth, diversity, fid, gaussian_stats,
                      matrix_sqrt_psd, multimodality)

__all__ = [
    "ARM_SPECS", "ArmSpec", "run_ablation",
    "HandcraftedExtractor", "InvalidStateError", "TrainedClassifier", "accuracy", "extract_features",
    "GaussianStats", "MetricsReport", "bootstrap_halfwidth", "diversity", "fid", "gaussian_stats",
    "matrix_sqrt_psd", "multimodality",
]
