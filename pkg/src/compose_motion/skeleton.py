"""Core motion value types: poses, sequences, labels and the body partition.

Joint order follows the 24-joint SMPL layout (index table in ``JOINT_NAMES``).
Coordinates are meters with +y up; the neutral skeleton faces +z and has its
left side on +x.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

NUM_JOINTS = 24

JOINT_NAMES: Tuple[str, ...] = (
    "pelvis",
    "left_hip",
    "right_hip",
    "spine1",
    "left_knee",
    "right_knee",
    "spine2",
    "left_ankle",
    "right_ankle",
    "spine3",
    "left_foot",
    "right_foot",
    "neck",
    "left_collar",
    "right_collar",
    "head",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hand",
    "right_hand",
)

# SMPL kinematic tree; PARENTS[n] is the parent of joint n (-1 for the root).
PARENTS: Tuple[int, ...] = (
    -1, 0, 0, 0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 9, 9, 12, 13, 14, 16, 17, 18, 19, 20, 21,
)

BONES: Tuple[Tuple[int, int], ...] = tuple((PARENTS[n], n) for n in range(1, NUM_JOINTS))

ROOT = 0
LEFT_HIP = 1
RIGHT_HIP = 2

NEUTRAL_POSE = np.array(
    [
        [0.00, 0.95, 0.00],  # pelvis
        [0.09, 0.87, 0.00],  # left_hip
        [-0.09, 0.87, 0.00],  # right_hip
        [0.00, 1.05, 0.00],  # spine1
        [0.10, 0.50, 0.00],  # left_knee
        [-0.10, 0.50, 0.00],  # right_knee
        [0.00, 1.18, 0.00],  # spine2
        [0.10, 0.08, 0.00],  # left_ankle
        [-0.10, 0.08, 0.00],  # right_ankle
        [0.00, 1.25, 0.00],  # spine3
        [0.10, 0.02, 0.10],  # left_foot
        [-0.10, 0.02, 0.10],  # right_foot
        [0.00, 1.45, 0.00],  # neck
        [0.07, 1.38, 0.00],  # left_collar
        [-0.07, 1.38, 0.00],  # right_collar
        [0.00, 1.62, 0.00],  # head
        [0.18, 1.40, 0.00],  # left_shoulder
        [-0.18, 1.40, 0.00],  # right_shoulder
        [0.45, 1.40, 0.00],  # left_elbow
        [-0.45, 1.40, 0.00],  # right_elbow
        [0.70, 1.40, 0.00],  # left_wrist
        [-0.70, 1.40, 0.00],  # right_wrist
        [0.78, 1.40, 0.00],  # left_hand
        [-0.78, 1.40, 0.00],  # right_hand
    ],
    dtype=np.float64,
)
NEUTRAL_POSE.setflags(write=False)


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Pose:
    joints: np.ndarray

    def __post_init__(self):
        joints = _frozen(self.joints)
        if joints.shape != (NUM_JOINTS, 3):
            raise ValueError(f"pose must have shape ({NUM_JOINTS}, 3), got {joints.shape}")
        if not np.all(np.isfinite(joints)):
            raise ValueError("pose coordinates must be finite")
        object.__setattr__(self, "joints", joints)

    def __eq__(self, other):
        return isinstance(other, Pose) and np.array_equal(self.joints, other.joints)


@dataclass(frozen=True)
class ActionLabel:
    class_id: int
    num_classes: int

    def __post_init__(self):
        if self.num_classes <= 0:
            raise ValueError("num_classes must be positive")
        if not 0 <= self.class_id < self.num_classes:
            raise ValueError(f"class_id {self.class_id} outside [0, {self.num_classes})")

    @property
    def one_hot(self) -> np.ndarray:
        v = np.zeros(self.num_classes)
        v[self.class_id] = 1.0
        return v

    @property
    def weights(self) -> np.ndarray:
        return self.one_hot


@dataclass(frozen=True, eq=False)
class MixedLabel:
    """Convex combination of two class labels."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("mixed label weights must be a non-empty vector")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("mixed label weights must be non-negative and sum to 1")
        if np.count_nonzero(w) > 2:
            raise ValueError("mixed label may mix at most two classes")
        object.__setattr__(self, "weights", w)

    @property
    def num_classes(self) -> int:
        return self.weights.size

    @property
    def classes(self) -> Tuple[int, ...]:
        return tuple(int(i) for i in np.flatnonzero(self.weights))

    def __eq__(self, other):
        return isinstance(other, MixedLabel) and np.array_equal(self.weights, other.weights)


Label = Union[ActionLabel, MixedLabel]


@dataclass(frozen=True, eq=False)
class MotionSequence:
    """T frames of 24 joints, stored as a read-only ``(T, 24, 3)`` array."""

    joints: np.ndarray
    label: Label
    fps: float = 20.0
    id: str = ""

    def __post_init__(self):
        joints = _frozen(self.joints)
        if joints.ndim != 3 or joints.shape[1:] != (NUM_JOINTS, 3):
            raise ValueError(f"sequence must have shape (T, {NUM_JOINTS}, 3), got {joints.shape}")
        if joints.shape[0] < 2:
            raise ValueError(f"sequence needs at least 2 frames, got {joints.shape[0]}")
        if not np.all(np.isfinite(joints)):
            raise ValueError("sequence coordinates must be finite")
        if not self.fps > 0:
            raise ValueError("fps must be positive")
        object.__setattr__(self, "joints", joints)

    @property
    def num_frames(self) -> int:
        return self.joints.shape[0]

    @property
    def frames(self) -> List[Pose]:
        return [Pose(j) for j in self.joints]

    @property
    def class_id(self) -> Optional[int]:
        return self.label.class_id if isinstance(self.label, ActionLabel) else None

    def with_joints(self, joints: np.ndarray) -> "MotionSequence":
        return MotionSequence(joints, self.label, self.fps, self.id)

    def __eq__(self, other):
        return (
            isinstance(other, MotionSequence)
            and self.id == other.id
            and self.fps == other.fps
            and self.label == other.label
            and np.array_equal(self.joints, other.joints)
        )


@dataclass(frozen=True)
class BodyPartition:
    """Named, disjoint joint-index sets covering every joint."""

    parts: Mapping[str, Tuple[int, ...]]
    num_joints: int = NUM_JOINTS
    _joint_part: Tuple[int, ...] = field(init=False, repr=False)

    def __post_init__(self):
        parts = {name: tuple(int(i) for i in idx) for name, idx in self.parts.items()}
        owner = [-1] * self.num_joints
        for k, (name, idx) in enumerate(parts.items()):
            if not idx:
                raise ValueError(f"body part {name!r} is empty")
            for i in idx:
                if not 0 <= i < self.num_joints:
                    raise ValueError(f"joint {i} of part {name!r} out of range")
                if owner[i] != -1:
                    raise ValueError(f"joint {i} assigned to more than one part")
                owner[i] = k
        missing = [i for i, o in enumerate(owner) if o == -1]
        if missing:
            raise ValueError(f"joints {missing} not covered by any part")
        object.__setattr__(self, "parts", parts)
        object.__setattr__(self, "_joint_part", tuple(owner))

    @property
    def names(self) -> Tuple[str, ...]:
        return tuple(self.parts)

    def part_of(self, joint: int) -> str:
        return self.names[self._joint_part[joint]]

    def joint_part_index(self) -> np.ndarray:
        """Part index (into ``names``) of every joint."""
        return np.asarray(self._joint_part)

    def __iter__(self) -> Iterator[Tuple[str, Tuple[int, ...]]]:
        return iter(self.parts.items())

    def __len__(self) -> int:
        return len(self.parts)


DEFAULT_PARTITION = BodyPartition(
    {
        "torso": (0, 3, 6, 9, 12, 13, 14, 15),
        "left_arm": (16, 18, 20, 22),
        "right_arm": (17, 19, 21, 23),
        "left_leg": (1, 4, 7, 10),
        "right_leg": (2, 5, 8, 11),
    }
)


def stack_frames(frames: Sequence[Pose]) -> np.ndarray:
    return np.stack([p.joints for p in frames])


def partition_from_dict(d: Dict[str, Sequence[int]]) -> BodyPartition:
    return BodyPartition({k: tuple(v) for k, v in d.items()})
