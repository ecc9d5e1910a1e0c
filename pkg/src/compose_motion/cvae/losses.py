"""Loss terms for the conditional VAE."""

from __future__ import annotations

from typing import Dict, Optional, Tuple

import torch

from ..smooth import DRSettings, dr_surrogate
from .data import Batch
from .model import CVAE, DiagonalGaussian, reparameterize


def kl_divergence(q: DiagonalGaussian, p: DiagonalGaussian) -> torch.Tensor:
    """KL(q || p) for diagonal Gaussians, summed over the last dimension."""
    if q.mean.shape[-1] != p.mean.shape[-1]:
        raise ValueError(f"latent dims differ: {q.mean.shape[-1]} vs {p.mean.shape[-1]}")
    var_ratio = torch.exp(2.0 * (q.log_std - p.log_std))
    mahal = ((q.mean - p.mean) * torch.exp(-p.log_std)) ** 2
    return 0.5 * (var_ratio + mahal - 1.0).sum(-1) + (p.log_std - q.log_std).sum(-1)


def recon_loss(pred: torch.Tensor, target: torch.Tensor) -> torch.Tensor:
    """Mean squared coordinate error per sequence (over T * N * 3 values)."""
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(target.shape)}")
    return ((pred - target) ** 2).flatten(1).mean(dim=1)


def total_loss(
    batch: Batch,
    model: CVAE,
    generator: Optional[torch.Generator] = None,
    *,
    inpainter=None,
    dr: Optional[DRSettings] = None,
    with_dr: bool = True,
    frame_index: Optional[torch.Tensor] = None,
) -> Tuple[torch.Tensor, Dict[str, torch.Tensor]]:
    """Weighted reconstruction + KL + refinement loss, averaged over the batch.

    The refinement term needs source sequences on the batch, an inpainter and
    render settings; it is skipped (reported as 0) otherwise or when the
    refinement weight is 0.  One frame per row is scored; ``frame_index``
    fixes it, otherwise it is drawn from ``generator``.
    """
    cfg = model.cfg
    q = model.encode(batch.labels, batch.joints)
    p = model.prior(batch.labels)
    z = reparameterize(q, generator)
    pred = model.decode(batch.labels, z, batch.joints.shape[1])
    recon = recon_loss(pred, batch.joints).mean()
    kl = kl_divergence(q, p).mean()
    dr_term = torch.zeros((), dtype=recon.dtype)
    use_dr = with_dr and cfg.w_dr > 0 and inpainter is not None and dr is not None and batch.has_sources
    if use_dr:
        B, T = batch.joints.shape[:2]
        if frame_index is None:
            frame_index = torch.randint(T, (B,), generator=generator)
        rows = torch.arange(B)
        gen = pred[rows, frame_index]
        gen = torch.einsum("bnk,bjk->bnj", gen - batch.origin[:, None, :], batch.rotation)
        renders = batch.bank.renders(dr.cam, dr.sigma)
        si, sj = batch.source_i, batch.source_j
        per_row = dr_surrogate(
            gen,
            renders[si, frame_index],
            renders[sj, frame_index],
            batch.bank.energy[si.numpy()],
            batch.bank.energy[sj.numpy()],
            inpainter,
            dr,
        )
        # Per-pixel mean keeps the loss balance independent of image size.
        dr_term = per_row.mean() / (dr.cam.height * dr.cam.width)
    total = cfg.w_recon * recon + cfg.w_kl * kl + cfg.w_dr * dr_term
    return total, {"recon": recon, "kl": kl, "dr": dr_term, "total": total}
