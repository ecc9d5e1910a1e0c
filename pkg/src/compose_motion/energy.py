"""Per-body-part motion energy and the attention values derived from it."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict

import numpy as np

from .skeleton import DEFAULT_PARTITION, BodyPartition, MotionSequence


@dataclass(frozen=True, eq=False)
class PartEnergy:
    """Energy per body part (m^2 per frame step) and its per-joint expansion."""

    per_part: Dict[str, float]
    per_joint: np.ndarray

    def __post_init__(self):
        pj = np.array(self.per_joint, dtype=np.float64, copy=True)
        if np.any(pj < 0) or any(v < 0 for v in self.per_part.values()):
            raise ValueError("energies must be non-negative")
        pj.setflags(write=False)
        object.__setattr__(self, "per_joint", pj)
        object.__setattr__(self, "per_part", dict(self.per_part))

    def dominant_part(self) -> str:
        return max(self.per_part, key=self.per_part.__getitem__)

    def as_dict(self) -> dict:
        return {"per_part": dict(self.per_part), "per_joint": self.per_joint.tolist()}


def energy_from_parts(per_part: Dict[str, float], partition: BodyPartition = DEFAULT_PARTITION) -> PartEnergy:
    """Build a :class:`PartEnergy` whose joints carry their part's value."""
    values = np.array([per_part[name] for name in partition.names], dtype=np.float64)
    return PartEnergy(dict(per_part), values[partition.joint_part_index()])


def joint_energy_array(joints: np.ndarray, partition: BodyPartition = DEFAULT_PARTITION) -> np.ndarray:
    """Per-part energy of a raw ``(T, N, 3)`` array, ordered as ``partition.names``."""
    joints = np.asarray(joints, dtype=np.float64)
    if joints.shape[0] < 2:
        raise ValueError("energy needs at least 2 frames")
    steps = np.diff(joints, axis=0)
    sq = np.einsum("tnk,tnk->n", steps, steps)  # summed over frames, per joint
    norm = joints.shape[0] - 1
    return np.array([sq[list(idx)].sum() / (len(idx) * norm) for _, idx in partition])


def compute_part_energy(seq: MotionSequence, partition: BodyPartition = DEFAULT_PARTITION) -> PartEnergy:
    values = joint_energy_array(seq.joints, partition)
    return PartEnergy(dict(zip(partition.names, values.tolist())), values[partition.joint_part_index()])


def attention_from_energy(e: PartEnergy) -> np.ndarray:
    # Attention is the energy itself; kept as a function so other laws can be swapped in.
    return e.per_joint.copy()
