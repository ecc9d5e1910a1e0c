"""Fixed-length motion descriptors and a small recognition network."""

from __future__ import annotations

from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch
from torch import nn

from ..energy import compute_part_energy
from ..skeleton import DEFAULT_PARTITION, BodyPartition, MotionSequence


class InvalidStateError(RuntimeError):
    pass


class HandcraftedExtractor:
    """Per-joint mean/std of positions and of frame differences, then per-part energies.

    Layout: ``[pos_mean (N*3), pos_std (N*3), vel_mean (N*3), vel_std (N*3), energies (P)]``,
    so the dimension is ``12 N + P`` (293 for the default skeleton).
    """

    name = "handcrafted"

    def __init__(self, partition: BodyPartition = DEFAULT_PARTITION, num_joints: int = 24):
        self.partition = partition
        self.num_joints = num_joints

    @property
    def dim(self) -> int:
        return 12 * self.num_joints + len(self.partition.names)

    def __call__(self, seq: MotionSequence) -> np.ndarray:
        y = seq.joints
        v = np.diff(y, axis=0)
        energy = compute_part_energy(seq, self.partition)
        return np.concatenate([
            y.mean(axis=0).ravel(), y.std(axis=0).ravel(),
            v.mean(axis=0).ravel(), v.std(axis=0).ravel(),
            np.array([energy.per_part[name] for name in self.partition.names]),
        ])

    def batch(self, seqs: Sequence[MotionSequence]) -> np.ndarray:
        return np.stack([self(s) for s in seqs]) if seqs else np.zeros((0, self.dim))


Pair = Tuple[int, int]


class TrainedClassifier:
    """MLP over standardized handcrafted features predicting a class pair.

    ``features`` returns the penultimate activations (``hidden`` wide).
    """

    name = "classifier"

    def __init__(self, hidden: int = 32, epochs: int = 200, lr: float = 1e-2, seed: int = 0,
                 base: Optional[HandcraftedExtractor] = None):
        self.hidden = hidden
        self.epochs = epochs
        self.lr = lr
        self.seed = seed
        self.base = base or HandcraftedExtractor()
        self.pairs: List[Pair] = []
        self._net: Optional[nn.Module] = None

    @property
    def dim(self) -> int:
        return self.hidden

    @property
    def trained(self) -> bool:
        return self._net is not None

    def _standardize(self, x: np.ndarray) -> torch.Tensor:
        return torch.from_numpy((x - self._mu) / self._sd)

    def fit(self, seqs: Sequence[MotionSequence], pairs: Sequence[Pair]) -> "TrainedClassifier":
        if len(seqs) != len(pairs) or not seqs:
            raise ValueError("need equal, non-zero numbers of sequences and pair labels")
        self.pairs = sorted({tuple(sorted(p)) for p in pairs})
        index = {p: k for k, p in enumerate(self.pairs)}
        x = self.base.batch(seqs)
        self._mu = x.mean(axis=0)
        self._sd = np.maximum(x.std(axis=0), 1e-8)
        y = torch.tensor([index[tuple(sorted(p))] for p in pairs])
        torch.manual_seed(self.seed)
        body = nn.Sequential(nn.Linear(x.shape[1], 64), nn.GELU(), nn.Linear(64, self.hidden), nn.GELU())
        net = nn.Sequential(body, nn.Linear(self.hidden, len(self.pairs))).to(torch.float64)
        opt = torch.optim.Adam(net.parameters(), lr=self.lr)
        xt = self._standardize(x)
        for _ in range(self.epochs):
            opt.zero_grad()
            nn.functional.cross_entropy(net(xt), y).backward()
            opt.step()
        net.eval()
        self._net = net
        return self

    def _check(self):
        if self._net is None:
            raise InvalidStateError("classifier has not been trained")

    def logits(self, seqs: Sequence[MotionSequence]) -> np.ndarray:
        self._check()
        with torch.no_grad():
            return self._net(self._standardize(self.base.batch(seqs))).numpy()

    def predict(self, seqs: Sequence[MotionSequence]) -> List[Pair]:
        return [self.pairs[k] for k in self.logits(seqs).argmax(axis=1)]

    def __call__(self, seq: MotionSequence) -> np.ndarray:
        return self.batch([seq])[0]

    def batch(self, seqs: Sequence[MotionSequence]) -> np.ndarray:
        self._check()
        with torch.no_grad():
            return self._net[0](self._standardize(self.base.batch(seqs))).numpy()


def extract_features(seq: MotionSequence, extractor) -> np.ndarray:
    return extractor(seq)


def accuracy(classifier: TrainedClassifier, generated: Sequence[Tuple[MotionSequence, Pair]]) -> float:
    """Fraction of sequences whose predicted pair equals the intended one."""
    if not generated:
        raise ValueError("no generated sequences to score")
    classifier._check()
    predicted = classifier.predict([s for s, _ in generated])
    hits = sum(p == tuple(sorted(want)) for p, (_, want) in zip(predicted, generated))
    return hits / len(generated)
