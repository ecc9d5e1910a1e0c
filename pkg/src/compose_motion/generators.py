"""Procedural sub-action generators.

Each kind drives the joints of one body part along a parametric rotation
about a pivot joint; every other joint holds the neutral pose plus Gaussian
jitter.  Time is measured in clip fractions, so ``frequency`` counts cycles
per clip.  Default frequencies are non-integer so that even a 2-frame clip
moves.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .skeleton import NEUTRAL_POSE, ActionLabel, MixedLabel, MotionSequence

JITTER_STD = 0.001  # meters


@dataclass(frozen=True)
class _Limb:
    joints: Tuple[int, ...]
    pivot: int
    axis: Tuple[float, float, float]
    gain: float = 1.0


@dataclass(frozen=True)
class KindSpec:
    dominant_part: str
    limbs: Tuple[_Limb, ...]
    amplitude: float  # radians
    frequency: float  # cycles per clip
    profile: str  # "sine" swings both ways, "raise" goes out and back


_X = (1.0, 0.0, 0.0)
_Y = (0.0, 1.0, 0.0)
_Z = (0.0, 0.0, 1.0)


class SubActionKind(enum.Enum):
    ARM_WAVE_LEFT = "arm_wave_left"
    ARM_WAVE_RIGHT = "arm_wave_right"
    ARM_RAISE = "arm_raise"
    LEG_MARCH = "leg_march"
    LEG_KICK = "leg_kick"
    TORSO_TWIST = "torso_twist"

    @property
    def spec(self) -> KindSpec:
        return _SPECS[self]

    @property
    def dominant_part(self) -> str:
        return _SPECS[self].dominant_part

    @classmethod
    def parse(cls, name: str) -> "SubActionKind":
        try:
            return cls(name.replace("-", "_"))
        except ValueError:
            raise ValueError(f"unknown sub-action kind {name!r}; choose from {[k.value for k in cls]}") from None


_SPECS = {
    SubActionKind.ARM_WAVE_LEFT: KindSpec(
        "left_arm",
        (_Limb((18, 20, 22), 16, _Z), _Limb((20, 22), 18, _Z, 1.0)),
        amplitude=0.6, frequency=1.6, profile="sine",
    ),
    SubActionKind.ARM_WAVE_RIGHT: KindSpec(
        "right_arm",
        (_Limb((19, 21, 23), 17, _Z, -1.0), _Limb((21, 23), 19, _Z, -1.0)),
        amplitude=0.6, frequency=1.6, profile="sine",
    ),
    SubActionKind.ARM_RAISE: KindSpec(
        "right_arm",
        (_Limb((19, 21, 23), 17, _Z, -1.0),),
        amplitude=1.2, frequency=1.0, profile="raise",
    ),
    # The lead (left) leg swings wider so the dominant part is unique.
    SubActionKind.LEG_MARCH: KindSpec(
        "left_leg",
        (_Limb((4, 7, 10), 1, _X, -1.0), _Limb((5, 8, 11), 2, _X, 0.75)),
        amplitude=0.5, frequency=1.4, profile="sine",
    ),
    SubActionKind.LEG_KICK: KindSpec(
        "right_leg",
        (_Limb((5, 8, 11), 2, _X, -1.0),),
        amplitude=0.9, frequency=1.0, profile="raise",
    ),
    SubActionKind.TORSO_TWIST: KindSpec(
        "torso",
        (_Limb((3, 6, 9, 12, 13, 14, 15), 0, _Y), _Limb((3, 6, 9, 12, 13, 14, 15), 0, _X, 1.0)),
        amplitude=0.5, frequency=0.7, profile="sine",
    ),
}


def _rotation(axis: Sequence[float], angle: float) -> np.ndarray:
    k = np.asarray(axis, dtype=np.float64)
    kx = np.array([[0.0, -k[2], k[1]], [k[2], 0.0, -k[0]], [-k[1], k[0], 0.0]])
    return np.eye(3) + np.sin(angle) * kx + (1.0 - np.cos(angle)) * (kx @ kx)


def _profile(kind: str, phase_arg: np.ndarray) -> np.ndarray:
    if kind == "sine":
        return np.sin(phase_arg)
    return 0.5 * (1.0 - np.cos(phase_arg))


def _animate(motions, T: int) -> np.ndarray:
    """Neutral pose driven by every ``(spec, amplitude, frequency, phase)`` in turn."""
    tau = np.arange(T) / T
    joints = np.broadcast_to(NEUTRAL_POSE, (T,) + NEUTRAL_POSE.shape).copy()
    for spec, amp, freq, phase in motions:
        angles = amp * _profile(spec.profile, 2.0 * np.pi * freq * tau + phase)
        for t in range(T):
            frame = joints[t]
            # Limbs are applied distal-last so a child rotation rides on its parent's.
            for limb in spec.limbs:
                R = _rotation(limb.axis, limb.gain * angles[t])
                idx = list(limb.joints)
                pivot = frame[limb.pivot].copy()
                frame[idx] = (frame[idx] - pivot) @ R.T + pivot
    return joints


def generate_sub_action(
    kind: SubActionKind,
    T: int,
    rng: np.random.Generator,
    *,
    amplitude: Optional[float] = None,
    frequency: Optional[float] = None,
    phase: float = 0.0,
    jitter: float = JITTER_STD,
    label: Optional[ActionLabel] = None,
    fps: float = 20.0,
    seq_id: str = "",
) -> MotionSequence:
    """Synthesize a ``T``-frame sequence of ``kind``.

    ``label`` defaults to the kind's index among all kinds.  A zero
    ``amplitude`` with ``jitter=0`` yields a static neutral pose.
    """
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    spec = kind.spec
    amp = spec.amplitude if amplitude is None else float(amplitude)
    freq = spec.frequency if frequency is None else float(frequency)
    if label is None:
        kinds = list(SubActionKind)
        label = ActionLabel(kinds.index(kind), len(kinds))

    joints = _animate([(spec, amp, freq, phase)], T)
    if jitter > 0:
        joints += rng.normal(0.0, jitter, size=joints.shape)
    return MotionSequence(joints, label, fps, seq_id)


def generate_corpus(
    kinds: Sequence[SubActionKind],
    per_class: int,
    T: int,
    rng: np.random.Generator,
    *,
    amplitude_spread: float = 0.0,
    frequency_spread: float = 0.0,
    phase_spread: float = 0.0,
    jitter: float = JITTER_STD,
    fps: float = 20.0,
) -> List[MotionSequence]:
    """Generate ``per_class`` sequences of every kind, class ids in ``kinds`` order.

    Spreads are relative (amplitude, frequency) or absolute radians (phase)
    half-widths of uniform perturbations around each kind's defaults.
    """
    out = []
    for c, kind in enumerate(kinds):
        spec = kind.spec
        for k in range(per_class):
            amp = spec.amplitude * (1.0 + rng.uniform(-amplitude_spread, amplitude_spread))
            freq = spec.frequency * (1.0 + rng.uniform(-frequency_spread, frequency_spread))
            phase = rng.uniform(-phase_spread, phase_spread)
            out.append(
                generate_sub_action(
                    kind, T, rng,
                    amplitude=amp, frequency=freq, phase=phase, jitter=jitter,
                    label=ActionLabel(c, len(kinds)), fps=fps, seq_id=f"{kind.value}-{k:04d}",
                )
            )
    return out


def generate_composite(
    kind_a: SubActionKind,
    kind_b: SubActionKind,
    T: int,
    rng: np.random.Generator,
    *,
    class_a: int,
    class_b: int,
    num_classes: int,
    params_a: Tuple[Optional[float], Optional[float], float] = (None, None, 0.0),
    params_b: Tuple[Optional[float], Optional[float], float] = (None, None, 0.0),
    jitter: float = JITTER_STD,
    fps: float = 20.0,
    seq_id: str = "",
) -> MotionSequence:
    """Both kinds performed at once, each by its own limbs.

    This is the ground-truth compositional motion that pseudo-composites
    approximate.  ``params_*`` are ``(amplitude, frequency, phase)`` with
    ``None`` meaning the kind default.  The label is the even mix of the
    two classes.
    """
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    motions = []
    for kind, (amp, freq, phase) in ((kind_a, params_a), (kind_b, params_b)):
        spec = kind.spec
        motions.append((spec, spec.amplitude if amp is None else amp, spec.frequency if freq is None else freq, phase))
    joints = _animate(motions, T)
    if jitter > 0:
        joints += rng.normal(0.0, jitter, size=joints.shape)
    w = np.zeros(num_classes)
    w[class_a] += 0.5
    w[class_b] += 0.5
    return MotionSequence(joints, MixedLabel(w), fps, seq_id)


def generate_composite_corpus(
    kinds: Sequence[SubActionKind],
    pairs: Sequence[Tuple[int, int]],
    per_pair: int,
    T: int,
    rng: np.random.Generator,
    *,
    amplitude_spread: float = 0.0,
    frequency_spread: float = 0.0,
    phase_spread: float = 0.0,
    jitter: float = JITTER_STD,
) -> List[MotionSequence]:
    """Ground-truth composites for each class pair (indices into ``kinds``)."""
    out = []
    for a, b in pairs:
        for k in range(per_pair):
            params = []
            for kind in (kinds[a], kinds[b]):
                spec = kind.spec
                params.append((
                    spec.amplitude * (1.0 + rng.uniform(-amplitude_spread, amplitude_spread)),
                    spec.frequency * (1.0 + rng.uniform(-frequency_spread, frequency_spread)),
                    rng.uniform(-phase_spread, phase_spread),
                ))
            out.append(generate_composite(
                kinds[a], kinds[b], T, rng, class_a=a, class_b=b, num_classes=len(kinds),
                params_a=params[0], params_b=params[1], jitter=jitter,
                seq_id=f"real-{a}-{b}-{k:04d}",
            ))
    return out
