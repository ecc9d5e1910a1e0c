"""Small datasets and model configs shared by the model-level tests."""

import numpy as np

from compose_motion.coupling import PairingPolicy, build_pseudo_dataset, parse_dist
from compose_motion.cvae.model import ModelConfig
from compose_motion.generators import SubActionKind, generate_corpus
from compose_motion.skeleton import DEFAULT_PARTITION

KINDS = [SubActionKind.ARM_RAISE, SubActionKind.LEG_KICK]


def tiny_config(**overrides):
    base = dict(latent_dim=4, embed_dim=8, width=8, depth=1, heads=2, ff_dim=16, num_frames=8,
                num_classes=2, batch_size=16, epochs=1, lr=3e-3)
    base.update(overrides)
    return ModelConfig(**base)


def tiny_data(count=20, T=8, seed=0, per_class=4):
    rng = np.random.default_rng(seed)
    sources = generate_corpus(KINDS, per_class, T, rng)
    comps = build_pseudo_dataset(sources, PairingPolicy(full_class=True), count, parse_dist("gaussian:0.1"),
                                 DEFAULT_PARTITION, rng)
    return sources, comps
