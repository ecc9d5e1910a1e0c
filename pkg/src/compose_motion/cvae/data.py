"""Tensor views of pseudo-composite datasets for training."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Sequence, Tuple

import numpy as np
import torch

from ..coupling import PseudoComposite, resample, unit_energy
from ..energy import compute_part_energy
from ..render import CameraConfig, frontal_transform
from ..skeleton import DEFAULT_PARTITION, BodyPartition, MotionSequence
from ..smooth import project_torch, splat_render

DTYPE = torch.float64


@dataclass
class SourceBank:
    """Frontal source sequences and energies, plus cached smoothed renders."""

    joints: torch.Tensor  # (S, T, N, 3)
    energy: np.ndarray  # (S, N)
    _renders: Dict[Tuple, torch.Tensor] = field(default_factory=dict, repr=False)

    def renders(self, cam: CameraConfig, sigma: float) -> torch.Tensor:
        key = (cam, sigma)
        if key not in self._renders:
            S, T = self.joints.shape[:2]
            flat = self.joints.reshape(S * T, *self.joints.shape[2:])
            with torch.no_grad():
                imgs = torch.cat([splat_render(project_torch(chunk, cam), cam, sigma) for chunk in flat.split(64)])
            self._renders[key] = imgs.reshape(S, T, *cam.shape)
        return self._renders[key]


@dataclass
class Batch:
    joints: torch.Tensor  # (B, T, N, 3)
    labels: torch.Tensor  # (B, C) mixed-label weights
    # Refinement inputs; None when sources are unavailable.
    bank: Optional[SourceBank] = None
    source_i: Optional[torch.Tensor] = None  # (B,) indices into the bank
    source_j: Optional[torch.Tensor] = None
    rotation: Optional[torch.Tensor] = None  # (B, 3, 3) frontal transform of the target
    origin: Optional[torch.Tensor] = None  # (B, 3)

    @property
    def has_sources(self) -> bool:
        return self.bank is not None

    def __len__(self) -> int:
        return self.joints.shape[0]

    def select(self, idx) -> "Batch":
        idx = torch.as_tensor(idx)
        if not self.has_sources:
            return Batch(self.joints[idx], self.labels[idx])
        return Batch(
            self.joints[idx], self.labels[idx], self.bank,
            self.source_i[idx], self.source_j[idx], self.rotation[idx], self.origin[idx],
        )


def _frontal(joints: np.ndarray) -> np.ndarray:
    R, origin, _ = frontal_transform(joints)
    return (joints - origin) @ R.T


def make_batch(
    composites: Sequence[PseudoComposite],
    sources: Optional[Mapping[str, MotionSequence]] = None,
    partition: BodyPartition = DEFAULT_PARTITION,
    use_energy: bool = True,
) -> Batch:
    """Stack composites (equal length) into a :class:`Batch`.

    When ``sources`` maps every composite's source ids to sequences, the
    refinement inputs are filled in as well.  ``use_energy=False`` gives
    unit attention to every joint for decoupling.
    """
    if not composites:
        raise ValueError("no composites to batch")
    lengths = {c.sequence.num_frames for c in composites}
    if len(lengths) != 1:
        raise ValueError(f"composites have differing lengths {sorted(lengths)}")
    joints = torch.tensor(np.stack([c.sequence.joints for c in composites]), dtype=DTYPE)
    labels = torch.tensor(np.stack([c.mixed_label.weights for c in composites]), dtype=DTYPE)
    if sources is None or not all(sid in sources for c in composites for sid in c.source_ids):
        return Batch(joints, labels)

    T = joints.shape[1]
    ids = sorted({sid for c in composites for sid in c.source_ids})
    slot = {sid: k for k, sid in enumerate(ids)}
    ones = unit_energy(partition).per_joint
    bank_joints, bank_energy = [], []
    for sid in ids:
        j = sources[sid].joints
        bank_joints.append(_frontal(resample(j, T) if j.shape[0] != T else j))
        bank_energy.append(compute_part_energy(sources[sid], partition).per_joint if use_energy else ones)
    bank = SourceBank(torch.tensor(np.stack(bank_joints), dtype=DTYPE), np.stack(bank_energy))

    rots, origins = [], []
    for c in composites:
        R, origin, _ = frontal_transform(c.sequence.joints)
        rots.append(R)
        origins.append(origin)
    return Batch(
        joints, labels, bank,
        torch.tensor([slot[c.source_ids[0]] for c in composites]),
        torch.tensor([slot[c.source_ids[1]] for c in composites]),
        torch.tensor(np.stack(rots), dtype=DTYPE), torch.tensor(np.stack(origins), dtype=DTYPE),
    )


def pose_statistics(joints: torch.Tensor, floor: float = 1e-3):
    """Per-coordinate mean and spread over all frames, spread floored at ``floor``."""
    flat = joints.reshape(-1, joints.shape[-2], joints.shape[-1])
    return flat.mean(dim=0), flat.std(dim=0).clamp_min(floor)
