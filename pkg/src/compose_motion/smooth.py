"""Differentiable (smoothed) rendering path used to train with the refinement loss.

The crisp rasterizer in :mod:`render` is piecewise constant in the joint
positions, so gradients cannot flow through it.  Here every bone is a
Gaussian tube: a pixel at squared distance ``d2`` from the bone segment gets
``exp(-d2 / (2 sigma^2))`` and bones combine as ``1 - exp(-sum)``.  Masks
are still chosen with the crisp attention rules and treated as constants.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np
import torch

from .decouple import FILL_VALUE, attention_map, region_average, top_fraction_mask
from .render import CameraConfig
from .skeleton import BONES


@dataclass(frozen=True)
class DRSettings:
    cam: CameraConfig = field(default_factory=CameraConfig)
    rho: float = 1.0 / 3.0
    eps_pix: float = 1.0
    sigma: float = 1.0  # Gaussian tube width in pixels
    fill: float = FILL_VALUE


def project_torch(joints: torch.Tensor, cam: CameraConfig) -> torch.Tensor:
    col = cam.cx + cam.scale * joints[..., 0]
    row = cam.cy - cam.scale * joints[..., 1]
    return torch.stack([col, row], dim=-1)


def splat_render(
    joint_pixels: torch.Tensor,
    cam: CameraConfig,
    sigma: float = 1.0,
    bones: Sequence[Tuple[int, int]] = BONES,
) -> torch.Tensor:
    """Render ``(B, N, 2)`` joint pixels to ``(B, H, W)`` smooth stick figures."""
    dtype = joint_pixels.dtype
    rows = torch.arange(cam.height, dtype=dtype).view(1, 1, -1, 1)
    cols = torch.arange(cam.width, dtype=dtype).view(1, 1, 1, -1)
    parent = torch.tensor([a for a, _ in bones])
    child = torch.tensor([b for _, b in bones])
    a = joint_pixels[:, parent]  # (B, K, 2)
    d = joint_pixels[:, child] - a
    ac = a[..., 0, None, None]
    ar = a[..., 1, None, None]
    dc = d[..., 0, None, None]
    dr = d[..., 1, None, None]
    pc = cols - ac
    pr = rows - ar
    L2 = dc * dc + dr * dr + 1e-12
    t = ((pc * dc + pr * dr) / L2).clamp(0.0, 1.0)
    ec = pc - t * dc
    er = pr - t * dr
    dens = torch.exp(-(ec * ec + er * er) / (2.0 * sigma * sigma)).sum(dim=1)
    return 1.0 - torch.exp(-dens)


def attention_keep_masks(joint_pixels: np.ndarray, energies: np.ndarray, settings: DRSettings) -> np.ndarray:
    """Pixel keep-masks ``(B, H, W)`` from crisp attention for each batch row."""
    cam = settings.cam
    out = np.zeros((joint_pixels.shape[0],) + cam.shape, dtype=bool)
    for b in range(joint_pixels.shape[0]):
        grid = region_average(attention_map(joint_pixels[b], energies[b], cam, settings.eps_pix), cam.patch)
        out[b] = top_fraction_mask(grid, settings.rho).pixel_mask()
    return out


def dr_surrogate(
    generated: torch.Tensor,
    target_i: torch.Tensor,
    target_j: torch.Tensor,
    e_i: np.ndarray,
    e_j: np.ndarray,
    inpainter,
    settings: DRSettings,
) -> torch.Tensor:
    """Per-row refinement loss for one frame per row.

    ``generated`` holds frontal ``(B, N, 3)`` joints; the targets are smoothed
    ``(B, H, W)`` renders of the matching source frames.  Returns the summed
    squared pixel error of both inpainted views, shape ``(B,)``.
    """
    cam = settings.cam
    gen_px = project_torch(generated, cam)
    composite = splat_render(gen_px, cam, settings.sigma)
    jp = gen_px.detach().cpu().numpy()
    total = 0.0
    for energies, target in ((e_i, target_i), (e_j, target_j)):
        keep = torch.from_numpy(attention_keep_masks(jp, energies, settings))
        masked = torch.where(keep, composite, torch.full_like(composite, settings.fill))
        filled = inpainter.inpaint_torch(masked, keep)
        total = total + ((filled - target) ** 2).sum(dim=(1, 2))
    return total
