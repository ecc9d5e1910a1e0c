"""Transformer conditional VAE over joint-position sequences.

The encoder reads a sequence plus two learned distribution tokens (shifted
by the label embedding) and returns the posterior from those tokens.  The
decoder queries sinusoidal time encodings against a single memory token
built from ``z`` and the label.  Outputs are offsets around the training
mean pose, scaled by the per-coordinate training spread.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from typing import NamedTuple, Optional

import torch
from torch import nn


@dataclass
class ModelConfig:
    latent_dim: int = 16
    embed_dim: int = 32
    width: int = 32
    depth: int = 2
    heads: int = 2
    ff_dim: int = 64
    dropout: float = 0.0
    num_frames: int = 60
    num_joints: int = 24
    num_classes: int = 4
    # Loss balance (reconstruction : KL : refinement).
    w_recon: float = 1.0
    w_kl: float = 1e-5
    w_dr: float = 1e-2
    lr: float = 1e-4
    weight_decay: float = 0.01
    batch_size: int = 32
    epochs: int = 100
    dr_every: int = 4
    checkpoint_every: int = 0

    def __post_init__(self):
        for f in ("latent_dim", "embed_dim", "width", "depth", "heads", "ff_dim", "num_frames", "num_joints",
                  "num_classes", "batch_size", "dr_every"):
            if getattr(self, f) <= 0:
                raise ValueError(f"model.{f} must be positive")
        if self.width % self.heads:
            raise ValueError("model.width must be divisible by model.heads")
        for f in ("w_recon", "w_kl", "w_dr", "lr", "weight_decay", "dropout", "epochs", "checkpoint_every"):
            if getattr(self, f) < 0:
                raise ValueError(f"model.{f} must be non-negative")

    @classmethod
    def full_scale(cls, **overrides) -> "ModelConfig":
        base = dict(latent_dim=256, embed_dim=256, width=256, depth=8, heads=4, ff_dim=1024, dropout=0.1,
                    num_frames=60, batch_size=800, epochs=1500, dr_every=1)
        base.update(overrides)
        return cls(**base)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


class DiagonalGaussian(NamedTuple):
    mean: torch.Tensor
    log_std: torch.Tensor

    @property
    def std(self) -> torch.Tensor:
        return torch.exp(self.log_std)


def sinusoidal_encoding(length: int, width: int, dtype=torch.float64) -> torch.Tensor:
    pos = torch.arange(length, dtype=dtype)[:, None]
    div = torch.exp(torch.arange(0, width, 2, dtype=dtype) * (-math.log(10000.0) / width))
    pe = torch.zeros(length, width, dtype=dtype)
    pe[:, 0::2] = torch.sin(pos * div)
    pe[:, 1::2] = torch.cos(pos * div[: width // 2])
    return pe


class Attention(nn.Module):
    def __init__(self, width: int, heads: int, dropout: float = 0.0):
        super().__init__()
        self.heads = heads
        self.q = nn.Linear(width, width)
        # No key bias: softmax is invariant to it, so it would never receive gradient.
        self.k = nn.Linear(width, width, bias=False)
        self.v = nn.Linear(width, width)
        self.out = nn.Linear(width, width)
        self.drop = nn.Dropout(dropout)

    def forward(self, x: torch.Tensor, memory: torch.Tensor) -> torch.Tensor:
        B, L, W = x.shape
        h = self.heads
        q = self.q(x).view(B, L, h, -1).transpose(1, 2)
        k = self.k(memory).view(B, memory.shape[1], h, -1).transpose(1, 2)
        v = self.v(memory).view(B, memory.shape[1], h, -1).transpose(1, 2)
        att = torch.softmax(q @ k.transpose(-1, -2) / math.sqrt(q.shape[-1]), dim=-1)
        y = (self.drop(att) @ v).transpose(1, 2).reshape(B, L, W)
        return self.out(y)


class FeedForward(nn.Sequential):
    def __init__(self, width: int, hidden: int, dropout: float = 0.0):
        super().__init__(nn.Linear(width, hidden), nn.GELU(), nn.Dropout(dropout), nn.Linear(hidden, width))


class EncoderBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.width)
        self.attn = Attention(cfg.width, cfg.heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.width)
        self.ff = FeedForward(cfg.width, cfg.ff_dim, cfg.dropout)

    def forward(self, x):
        h = self.norm1(x)
        x = x + self.attn(h, h)
        return x + self.ff(self.norm2(x))


class DecoderBlock(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.norm1 = nn.LayerNorm(cfg.width)
        self.self_attn = Attention(cfg.width, cfg.heads, cfg.dropout)
        self.norm2 = nn.LayerNorm(cfg.width)
        self.cross_attn = Attention(cfg.width, cfg.heads, cfg.dropout)
        self.norm3 = nn.LayerNorm(cfg.width)
        self.ff = FeedForward(cfg.width, cfg.ff_dim, cfg.dropout)

    def forward(self, x, memory):
        h = self.norm1(x)
        x = x + self.self_attn(h, h)
        x = x + self.cross_attn(self.norm2(x), memory)
        return x + self.ff(self.norm3(x))


class CVAE(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.cfg = cfg
        dim = cfg.num_joints * 3
        self.label_embedding = nn.Parameter(torch.randn(cfg.num_classes, cfg.embed_dim) * 0.5)
        self.cond = nn.Linear(cfg.embed_dim, cfg.width)

        self.input_proj = nn.Linear(dim, cfg.width)
        self.input_norm = nn.LayerNorm(cfg.width)
        self.dist_tokens = nn.Parameter(torch.randn(2, cfg.width) * 0.1)
        self.encoder = nn.ModuleList(EncoderBlock(cfg) for _ in range(cfg.depth))
        self.enc_norm = nn.LayerNorm(cfg.width)
        self.to_mean = nn.Linear(cfg.width, cfg.latent_dim)
        self.to_log_std = nn.Linear(cfg.width, cfg.latent_dim)

        hidden = max(cfg.embed_dim, cfg.latent_dim)
        self.prior_net = nn.Sequential(nn.Linear(cfg.embed_dim, hidden), nn.GELU(), nn.Linear(hidden, 2 * cfg.latent_dim))

        self.z_proj = nn.Linear(cfg.latent_dim, cfg.width)
        self.decoder = nn.ModuleList(DecoderBlock(cfg) for _ in range(cfg.depth))
        self.dec_norm = nn.LayerNorm(cfg.width)
        self.output_proj = nn.Linear(cfg.width, dim)

        self.register_buffer("pose_mean", torch.zeros(cfg.num_joints, 3))
        self.register_buffer("pose_scale", torch.ones(cfg.num_joints, 3))

    def set_normalization(self, mean: torch.Tensor, scale: torch.Tensor) -> None:
        with torch.no_grad():
            self.pose_mean.copy_(mean)
            self.pose_scale.copy_(scale)

    def embed(self, label_weights: torch.Tensor) -> torch.Tensor:
        """Mixed-label embedding: the label-weighted sum of class rows."""
        return label_weights @ self.label_embedding

    def encode(self, label_weights: torch.Tensor, joints: torch.Tensor) -> DiagonalGaussian:
        if joints.ndim != 4 or joints.shape[2:] != (self.cfg.num_joints, 3):
            raise ValueError(f"expected joints of shape (B, T, {self.cfg.num_joints}, 3), got {tuple(joints.shape)}")
        if label_weights.shape != (joints.shape[0], self.cfg.num_classes):
            raise ValueError(f"expected labels of shape ({joints.shape[0]}, {self.cfg.num_classes}), "
                             f"got {tuple(label_weights.shape)}")
        B, T = joints.shape[:2]
        x = ((joints - self.pose_mean) / self.pose_scale).reshape(B, T, -1)
        x = self.input_norm(self.input_proj(x)) + sinusoidal_encoding(T, self.cfg.width, x.dtype)
        cond = self.cond(self.embed(label_weights))[:, None, :]
        tokens = torch.cat([self.dist_tokens.expand(B, -1, -1) + cond, x], dim=1)
        for block in self.encoder:
            tokens = block(tokens)
        tokens = self.enc_norm(tokens)
        return DiagonalGaussian(self.to_mean(tokens[:, 0]), self.to_log_std(tokens[:, 1]))

    def prior(self, label_weights: torch.Tensor) -> DiagonalGaussian:
        mean, log_std = self.prior_net(self.embed(label_weights)).chunk(2, dim=-1)
        return DiagonalGaussian(mean, log_std)

    def decode(self, label_weights: torch.Tensor, z: torch.Tensor, T: Optional[int] = None) -> torch.Tensor:
        T = T or self.cfg.num_frames
        B = z.shape[0]
        memory = (self.z_proj(z) + self.cond(self.embed(label_weights)))[:, None, :]
        x = sinusoidal_encoding(T, self.cfg.width, z.dtype).expand(B, -1, -1)
        for block in self.decoder:
            x = block(x, memory)
        out = self.output_proj(self.dec_norm(x)).view(B, T, self.cfg.num_joints, 3)
        return out * self.pose_scale + self.pose_mean


def reparameterize(g: DiagonalGaussian, generator: Optional[torch.Generator] = None) -> torch.Tensor:
    eps = torch.randn(g.mean.shape, generator=generator, dtype=g.mean.dtype)
    return g.mean + torch.exp(g.log_std) * eps


def count_parameters(model: nn.Module) -> int:
    return sum(p.numel() for p in model.parameters())
