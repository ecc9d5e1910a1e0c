"""Compositional human-motion synthesis from single-action clips."""

from .coupling import (Beta, Fixed, Gaussian, PairingPolicy, PseudoComposite, Uniform, build_pseudo_dataset,
                       couple_arrays, couple_labels, couple_sequences, sample_lambda)
from .energy import PartEnergy, compute_part_energy
from .skeleton import DEFAULT_PARTITION, ActionLabel, BodyPartition, MixedLabel, MotionSequence, Pose

__version__ = "0.1.0"

__all__ = [
    "Beta", "Fixed", "Gaussian", "PairingPolicy", "PseudoComposite", "Uniform", "build_pseudo_dataset",
    "couple_arrays", "couple_labels", "couple_sequences", "sample_lambda",
    "PartEnergy", "compute_part_energy",
    "DEFAULT_PARTITION", "ActionLabel", "BodyPartition", "MixedLabel", "MotionSequence", "Pose",
]
