"""Energy-weighted coupling of sub-action pairs into pseudo-composites."""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from .energy import PartEnergy, compute_part_energy, energy_from_parts
from .skeleton import DEFAULT_PARTITION, ActionLabel, BodyPartition, MixedLabel, MotionSequence

DENOM_EPS = 1e-12


# -- mixing-rate distributions ---------------------------------------------------


@dataclass(frozen=True)
class Gaussian:
    std: float = 0.1
    mean: float = 0.5

    def __post_init__(self):
        if not self.std > 0:
            raise ValueError("Gaussian std must be positive")


@dataclass(frozen=True)
class Beta:
    alpha: float

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("Beta alpha must be positive")


@dataclass(frozen=True)
class Uniform:
    pass


@dataclass(frozen=True)
class Fixed:
    value: float

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise ValueError("fixed mixing rate must lie in [0, 1]")


MixingRateDist = Union[Gaussian, Beta, Uniform, Fixed]


def parse_dist(text: str) -> MixingRateDist:
    """Parse ``gaussian:0.1``, ``beta:A``, ``uniform`` or ``fixed:L``."""
    name, _, arg = text.partition(":")
    name = name.strip().lower()
    try:
        if name == "gaussian":
            return Gaussian(float(arg) if arg else 0.1)
        if name == "beta":
            return Beta(float(arg))
        if name == "uniform" and not arg:
            return Uniform()
        if name == "fixed":
            return Fixed(float(arg))
    except ValueError as exc:
        raise ValueError(f"bad mixing-rate distribution {text!r}: {exc}") from None
    raise ValueError(f"bad mixing-rate distribution {text!r}")


def format_dist(dist: MixingRateDist) -> str:
    if isinstance(dist, Gaussian):
        return f"gaussian:{dist.std!r}"
    if isinstance(dist, Beta):
        return f"beta:{dist.alpha!r}"
    if isinstance(dist, Fixed):
        return f"fixed:{dist.value!r}"
    return "uniform"


def sample_lambda(dist: MixingRateDist, rng: np.random.Generator) -> float:
    if isinstance(dist, Fixed):
        return dist.value
    if isinstance(dist, Uniform):
        return float(rng.uniform(0.0, 1.0))
    if isinstance(dist, Beta):
        return float(rng.beta(dist.alpha, dist.alpha))
    # Rejection keeps the bell shape near the mean instead of piling mass on 0 and 1.
    while True:
        lam = rng.normal(dist.mean, dist.std)
        if 0.0 <= lam <= 1.0:
            return float(lam)


# -- labels and sequences ---------------------------------------------------------


def couple_labels(x_i: ActionLabel, x_j: ActionLabel, lam: float) -> MixedLabel:
    if x_i.class_id == x_j.class_id:
        raise ValueError("cannot couple a class with itself")
    if x_i.num_classes != x_j.num_classes:
        raise ValueError("labels come from different class sets")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing rate {lam} outside [0, 1]")
    w = np.zeros(x_i.num_classes)
    w[x_i.class_id] = lam
    w[x_j.class_id] = 1.0 - lam
    return MixedLabel(w)


def couple_arrays(
    y_i: np.ndarray,
    y_j: np.ndarray,
    e_i: np.ndarray,
    e_j: np.ndarray,
    lam: float,
    eps: float = DENOM_EPS,
) -> np.ndarray:
    """Energy-weighted blend of two ``(T, N, 3)`` arrays with per-joint energies."""
    y_i = np.asarray(y_i, dtype=np.float64)
    y_j = np.asarray(y_j, dtype=np.float64)
    if y_i.shape != y_j.shape:
        raise ValueError(f"sequence shapes differ: {y_i.shape} vs {y_j.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"mixing rate {lam} outside [0, 1]")
    wi = lam * np.asarray(e_i, dtype=np.float64)
    wj = (1.0 - lam) * np.asarray(e_j, dtype=np.float64)
    den = wi + wj
    static = den < eps
    # Both sources (near) static on this joint: fall back to the plain mix.
    a = np.where(static, lam, wi / np.where(static, 1.0, den))
    b = np.where(static, 1.0 - lam, wj / np.where(static, 1.0, den))
    return a[None, :, None] * y_i + b[None, :, None] * y_j


def couple_sequences(
    y_i: MotionSequence,
    y_j: MotionSequence,
    e_i: PartEnergy,
    e_j: PartEnergy,
    lam: float,
    eps: float = DENOM_EPS,
) -> np.ndarray:
    if y_i.num_frames != y_j.num_frames:
        raise ValueError(f"sequence lengths differ: {y_i.num_frames} vs {y_j.num_frames}")
    return couple_arrays(y_i.joints, y_j.joints, e_i.per_joint, e_j.per_joint, lam, eps)


def resample(joints: np.ndarray, T: int) -> np.ndarray:
    """Uniform temporal resampling with linear interpolation to ``T`` frames."""
    src = joints.shape[0]
    if src == T:
        return np.array(joints, copy=True)
    pos = np.linspace(0.0, src - 1, T)
    lo = np.floor(pos).astype(int)
    hi = np.minimum(lo + 1, src - 1)
    frac = (pos - lo)[:, None, None]
    return (1.0 - frac) * joints[lo] + frac * joints[hi]


# -- pairing and dataset construction ----------------------------------------------


@dataclass(frozen=True)
class PairingPolicy:
    """Either an explicit allowlist of unordered class pairs or every pair."""

    pairs: FrozenSet[Tuple[int, int]] = frozenset()
    full_class: bool = False

    def __post_init__(self):
        norm = set()
        for a, b in self.pairs:
            if a == b:
                raise ValueError(f"pair ({a}, {b}) repeats a class")
            norm.add((min(a, b), max(a, b)))
        object.__setattr__(self, "pairs", frozenset(norm))

    @classmethod
    def allow(cls, pairs: Iterable[Sequence[int]]) -> "PairingPolicy":
        return cls(frozenset((int(a), int(b)) for a, b in pairs))

    def allowed_pairs(self, classes: Iterable[int]) -> List[Tuple[int, int]]:
        present = sorted(set(classes))
        if self.full_class:
            return list(itertools.combinations(present, 2))
        have = set(present)
        return sorted(p for p in self.pairs if p[0] in have and p[1] in have)

    def to_dict(self) -> dict:
        return {"full_class": self.full_class, "pairs": [list(p) for p in sorted(self.pairs)]}

    @classmethod
    def from_dict(cls, d: dict) -> "PairingPolicy":
        unknown = set(d) - {"full_class", "pairs"}
        if unknown:
            raise ValueError(f"unknown pairing policy keys: {sorted(unknown)}")
        return cls(frozenset(tuple(int(v) for v in p) for p in d.get("pairs", [])), bool(d.get("full_class", False)))

    @classmethod
    def load(cls, path: Union[str, Path]) -> "PairingPolicy":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True, eq=False)
class PseudoComposite:
    sequence: MotionSequence
    lam: float
    source_ids: Tuple[str, str]
    source_classes: Tuple[int, int]

    def __post_init__(self):
        if self.source_classes[0] == self.source_classes[1]:
            raise ValueError("composite sources must come from different classes")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("mixing rate outside [0, 1]")
        if not isinstance(self.sequence.label, MixedLabel):
            raise ValueError("composite sequence must carry a mixed label")

    @property
    def mixed_label(self) -> MixedLabel:
        return self.sequence.label

    @property
    def pair(self) -> Tuple[int, int]:
        a, b = self.source_classes
        return (min(a, b), max(a, b))

    def __eq__(self, other):
        return (
            isinstance(other, PseudoComposite)
            and self.sequence == other.sequence
            and self.lam == other.lam
            and self.source_ids == other.source_ids
            and self.source_classes == other.source_classes
        )


def unit_energy(partition: BodyPartition = DEFAULT_PARTITION) -> PartEnergy:
    """Constant unit attention on every part (disables energy weighting)."""
    return energy_from_parts({name: 1.0 for name in partition.names}, partition)


def build_pseudo_dataset(
    data: Sequence[MotionSequence],
    policy: PairingPolicy,
    count: int,
    dist: MixingRateDist,
    partition: BodyPartition,
    rng: np.random.Generator,
    *,
    use_energy: bool = True,
) -> List[PseudoComposite]:
    """Draw ``count`` composites: a uniform allowed pair, then one sequence per class.

    With ``use_energy=False`` every joint gets unit attention, which reduces
    the coupling to a plain ``lam``-weighted mix.
    """
    by_class: Dict[int, List[MotionSequence]] = {}
    for seq in data:
        if seq.class_id is None:
            raise ValueError(f"sequence {seq.id!r} has no single class label")
        by_class.setdefault(seq.class_id, []).append(seq)
    if len(by_class) < 2:
        raise ValueError("at least two classes are needed to build composites")
    pairs = policy.allowed_pairs(by_class)
    if not pairs:
        raise ValueError("pairing policy admits no class pairs for this data")
    if count < 0:
        raise ValueError("count must be non-negative")

    cache: Dict[int, PartEnergy] = {}
    ones = unit_energy(partition)

    def energy(seq: MotionSequence, original: MotionSequence) -> PartEnergy:
        if not use_energy:
            return ones
        if seq is not original:
            return compute_part_energy(seq, partition)
        key = id(original)  # originals stay alive in `data`, so ids are stable
        if key not in cache:
            cache[key] = compute_part_energy(seq, partition)
        return cache[key]

    out = []
    for k in range(count):
        ca, cb = pairs[int(rng.integers(len(pairs)))]
        si = by_class[ca][int(rng.integers(len(by_class[ca])))]
        sj = by_class[cb][int(rng.integers(len(by_class[cb])))]
        lam = sample_lambda(dist, rng)
        T = min(si.num_frames, sj.num_frames)
        yi = si if si.num_frames == T else si.with_joints(resample(si.joints, T))
        yj = sj if sj.num_frames == T else sj.with_joints(resample(sj.joints, T))
        joints = couple_sequences(yi, yj, energy(yi, si), energy(yj, sj), lam)
        label = couple_labels(si.label, sj.label, lam)
        seq = MotionSequence(joints, label, si.fps, f"comp-{k:05d}")
        out.append(PseudoComposite(seq, lam, (si.id, sj.id), (ca, cb)))
    return out


def composite_pairs(composites: Sequence[PseudoComposite]) -> List[Tuple[int, int]]:
    return sorted({c.pair for c in composites})

