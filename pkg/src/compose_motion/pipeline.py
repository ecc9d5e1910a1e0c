"""Seeded pipeline stages shared by the command line and the ablation harness."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import torch

from .config import RunConfig
from .coupling import MixingRateDist, PairingPolicy, PseudoComposite, build_pseudo_dataset, parse_dist
from .cvae.train import TrainState, generate_from_label, train
from .evaluation.features import HandcraftedExtractor, TrainedClassifier
from .evaluation.metrics import (MetricsReport, bootstrap_halfwidth, diversity, fid, gaussian_stats,
                                 multimodality)
from .generators import generate_composite_corpus, generate_corpus
from .refine import Inpainter, PatchRegressor, make_inpainter, regressor_corpus
from .skeleton import DEFAULT_PARTITION, MixedLabel, MotionSequence


def stage_seed(seed: int, stage: str) -> List[int]:
    """Seed material for an independent stream per pipeline stage."""
    return [seed & 0xFFFFFFFF, seed >> 32, zlib.crc32(stage.encode())]


def stage_rng(seed: int, stage: str) -> np.random.Generator:
    return np.random.default_rng(stage_seed(seed, stage))


def stage_torch(seed: int, stage: str) -> torch.Generator:
    return torch.Generator().manual_seed(int(np.random.SeedSequence(stage_seed(seed, stage)).generate_state(1)[0]))


def make_sources(cfg: RunConfig, seed: int) -> List[MotionSequence]:
    d = cfg.data
    return generate_corpus(
        cfg.kinds(), d.per_class, d.T, stage_rng(seed, "data"),
        amplitude_spread=d.amplitude_spread, frequency_spread=d.frequency_spread,
        phase_spread=d.phase_spread, jitter=d.jitter, fps=d.fps,
    )


def make_composites(
    cfg: RunConfig,
    sources: Sequence[MotionSequence],
    seed: int,
    *,
    policy: Optional[PairingPolicy] = None,
    dist: Optional[MixingRateDist] = None,
    use_energy: bool = True,
) -> List[PseudoComposite]:
    return build_pseudo_dataset(
        sources,
        cfg.policy() if policy is None else policy,
        cfg.coupling.count,
        parse_dist(cfg.coupling.dist) if dist is None else dist,
        DEFAULT_PARTITION,
        stage_rng(seed, "couple"),
        use_energy=use_energy,
    )


def test_pairs(cfg: RunConfig) -> List[Tuple[int, int]]:
    return cfg.policy().allowed_pairs(range(len(cfg.data.kinds)))


def make_real_composites(cfg: RunConfig, seed: int, per_pair: int, stage: str) -> List[MotionSequence]:
    d = cfg.data
    return generate_composite_corpus(
        cfg.kinds(), test_pairs(cfg), per_pair, d.T, stage_rng(seed, stage),
        amplitude_spread=d.amplitude_spread, frequency_spread=d.frequency_spread,
        phase_spread=d.phase_spread, jitter=d.jitter,
    )


def build_inpainter(cfg: RunConfig, sources: Sequence[MotionSequence], seed: int) -> Inpainter:
    """The configured inpainter, fitted on source renders when it is learned."""
    inpainter = make_inpainter(cfg.refine.inpainter)
    if isinstance(inpainter, PatchRegressor):
        inpainter.fit(*regressor_corpus(sources, cfg.render.camera(), cfg.render.rho, stage_rng(seed, "regressor"),
                                        cfg.refine.stride, cfg.render.eps_pix))
    return inpainter


def fit_model(
    cfg: RunConfig,
    composites: Sequence[PseudoComposite],
    sources: Sequence[MotionSequence],
    seed: int,
    *,
    with_dr: Optional[bool] = None,
    use_energy: bool = True,
    **kwargs,
) -> TrainState:
    with_dr = cfg.refine.enabled if with_dr is None else with_dr
    extra = {}
    if with_dr:
        extra = dict(sources={s.id: s for s in sources}, inpainter=build_inpainter(cfg, sources, seed),
                     dr=cfg.render.dr_settings(), use_energy=use_energy)
    return train(composites, cfg.model, seed, **extra, **kwargs)


def even_label(pair: Tuple[int, int], num_classes: int) -> np.ndarray:
    w = np.zeros(num_classes)
    w[pair[0]] += 0.5
    w[pair[1]] += 0.5
    return w


def sample_pairs(state: TrainState, pairs: Sequence[Tuple[int, int]], per_pair: int,
                 generator: torch.Generator) -> List[Tuple[MotionSequence, Tuple[int, int]]]:
    """``per_pair`` generations for each pair, conditioned on the even mixed label."""
    out = []
    C = state.config.num_classes
    for pair in pairs:
        w = even_label(pair, C)
        joints = generate_from_label(w, state, generator, per_pair)
        for k in range(per_pair):
            out.append((MotionSequence(joints[k], MixedLabel(w), id=f"gen-{pair[0]}-{pair[1]}-{k:04d}"), pair))
    return out


@dataclass
class EvalContext:
    """Held-out references shared by every model evaluated under one config and seed."""

    pairs: List[Tuple[int, int]]
    real: List[MotionSequence]
    real_features: np.ndarray
    classifier: TrainedClassifier
    extractor: object


def _pair_of(seq: MotionSequence) -> Tuple[int, int]:
    return tuple(seq.label.classes)


def eval_context(cfg: RunConfig, seed: int) -> EvalContext:
    e = cfg.eval
    pairs = test_pairs(cfg)
    train_set = make_real_composites(cfg, seed, e.classifier_per_pair, "classifier-data")
    clf = TrainedClassifier(epochs=e.classifier_epochs, seed=seed).fit(train_set, [_pair_of(s) for s in train_set])
    extractor = clf if e.extractor == "classifier" else HandcraftedExtractor()
    real = make_real_composites(cfg, seed, e.test_per_pair, "test-data")
    return EvalContext(pairs, real, extractor.batch(real), clf, extractor)


def evaluate_state(cfg: RunConfig, state: TrainState, ctx: EvalContext, seed: int) -> MetricsReport:
    e = cfg.eval
    gen = sample_pairs(state, ctx.pairs, e.samples_per_pair, stage_torch(seed, "sample"))
    feats = ctx.extractor.batch([s for s, _ in gen])
    labels = [p for _, p in gen]
    hits = np.array([p == want for p, want in zip(ctx.classifier.predict([s for s, _ in gen]), labels)], dtype=float)
    real_stats = gaussian_stats(ctx.real_features)

    def groups(idx):
        out: Dict[Tuple[int, int], list] = {}
        for k in idx:
            out.setdefault(labels[k], []).append(feats[k])
        # A resample can leave a pair with a single draw; it has no spread to measure.
        return {key: v for key, v in out.items() if len(v) >= 2}

    n = len(gen)
    full = np.arange(n)
    fid_of = lambda idx: fid(real_stats, gaussian_stats(feats[idx]))
    div_of = lambda idx: diversity(feats[idx], e.n_pairs, stage_rng(seed, "diversity"))
    mm_of = lambda idx: multimodality(groups(idx), e.n_pairs, stage_rng(seed, "multimodality"))
    rounds = e.bootstrap
    return MetricsReport(
        fid=fid_of(full),
        accuracy=float(hits.mean()),
        diversity=div_of(full),
        multimodality=mm_of(full),
        fid_pm=bootstrap_halfwidth(fid_of, n, rounds, stage_rng(seed, "bootstrap-fid")),
        accuracy_pm=bootstrap_halfwidth(lambda idx: float(hits[idx].mean()), n, rounds,
                                        stage_rng(seed, "bootstrap-acc")),
        diversity_pm=bootstrap_halfwidth(div_of, n, rounds, stage_rng(seed, "bootstrap-div")),
        multimodality_pm=bootstrap_halfwidth(mm_of, n, rounds, stage_rng(seed, "bootstrap-mm")),
        fingerprint=cfg.fingerprint(),
        seeds={"run": seed},
    )
