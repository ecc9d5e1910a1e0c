"""Moment statistics, Frechet distance, diversity and bootstrap intervals."""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Mapping, Optional, Sequence

import numpy as np

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GaussianStats:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


def gaussian_stats(features) -> GaussianStats:
    """Sample mean and unbiased, symmetrized covariance of row features."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError(f"need at least 2 feature vectors, got shape {x.shape}")
    mu = x.mean(axis=0)
    d = x - mu
    cov = d.T @ d / (x.shape[0] - 1)
    return GaussianStats(mu, 0.5 * (cov + cov.T))


def matrix_sqrt_psd(m: np.ndarray) -> np.ndarray:
    """Principal square root of a symmetric PSD matrix (negative eigenvalues clamped)."""
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    scale = max(1.0, float(np.abs(m).max(initial=0.0)))
    if np.abs(m - m.T).max(initial=0.0) > 1e-8 * scale:
        raise ValueError("matrix is not symmetric")
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    worst = float(-w.min(initial=0.0))
    if worst > 1e-6 * max(float(np.abs(w).max(initial=0.0)), 1e-300):
        log.warning("clamping eigenvalue %.3g to 0 in matrix square root", -worst)
    root = np.sqrt(np.clip(w, 0.0, None))
    return (v * root) @ v.T


def fid(t: GaussianStats, g: GaussianStats) -> float:
    """Frechet distance between two Gaussians, trace term in the symmetric form."""
    if t.dim != g.dim:
        raise ValueError(f"feature dims differ: {t.dim} vs {g.dim}")
    diff = t.mean - g.mean
    s = matrix_sqrt_psd(t.cov)
    inner = s @ g.cov @ s
    cross = matrix_sqrt_psd(0.5 * (inner + inner.T))
    value = float(diff @ diff + np.trace(t.cov) + np.trace(g.cov) - 2.0 * np.trace(cross))
    return max(value, 0.0)


def _pair_indices(n: int, n_pairs: int, rng: np.random.Generator):
    i = rng.integers(0, n, size=n_pairs)
    # Draw j from the other n-1 points so a point is never paired with itself.
    j = rng.integers(0, n - 1, size=n_pairs)
    j = j + (j >= i)
    return i, j


def diversity(features, n_pairs: int, rng: np.random.Generator) -> float:
    """Mean Euclidean distance over ``n_pairs`` random pairs of distinct samples."""
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("diversity needs at least 2 feature vectors")
    if n_pairs < 1:
        raise ValueError("n_pairs must be positive")
    i, j = _pair_indices(x.shape[0], n_pairs, rng)
    return float(np.linalg.norm(x[i] - x[j], axis=1).mean())


def multimodality(groups: Mapping, n_pairs: int, rng: np.random.Generator) -> float:
    """Within-group diversity averaged over groups (in sorted key order)."""
    if not groups:
        raise ValueError("multimodality needs at least one group")
    values = []
    for key in sorted(groups):
        x = np.asarray(groups[key], dtype=np.float64)
        if x.ndim != 2 or x.shape[0] < 2:
            raise ValueError(f"group {key!r} has fewer than 2 feature vectors")
        values.append(diversity(x, n_pairs, rng))
    return float(np.mean(values))


def bootstrap_halfwidth(statistic: Callable[[np.ndarray], float], n: int, rounds: int,
                        rng: np.random.Generator) -> float:
    """Half the width of the central 95% percentile interval over ``rounds`` resamples.

    ``statistic`` receives an index array of length ``n`` drawn with replacement.
    Zero rounds give 0.
    """
    if rounds <= 0:
        return 0.0
    vals = np.array([statistic(rng.integers(0, n, size=n)) for _ in range(rounds)])
    lo, hi = np.percentile(vals, [2.5, 97.5])
    return float(0.5 * (hi - lo))


@dataclass
class MetricsReport:
    fid: float
    accuracy: float
    diversity: float
    multimodality: float
    fid_pm: float = 0.0
    accuracy_pm: float = 0.0
    diversity_pm: float = 0.0
    multimodality_pm: float = 0.0
    fingerprint: str = ""
    seeds: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        for name in ("fid", "accuracy", "diversity", "multimodality"):
            v = getattr(self, name)
            pm = getattr(self, name + "_pm")
            if not (math.isfinite(v) and math.isfinite(pm)):
                raise ValueError(f"{name} is not finite")
            if pm < 0:
                raise ValueError(f"{name}_pm must be non-negative")
        if not 0.0 <= self.accuracy <= 1.0:
            raise ValueError("accuracy must lie in [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)
