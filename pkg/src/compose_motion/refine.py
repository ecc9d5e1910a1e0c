"""Inpainting back-ends and the decoupling-refinement loss."""

from __future__ import annotations

import abc
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import torch

from .decouple import (
    FILL_VALUE,
    MaskedImage,
    RegionGrid,
    RegionMask,
    apply_mask,
    attention_map,
    decouple_composite,
    region_average,
    top_fraction_mask,
)
from .energy import PartEnergy, compute_part_energy
from .render import CameraConfig, RenderedFrame, frame_indices, normalize_frontal, render_frame
from .skeleton import MotionSequence


class Inpainter(abc.ABC):
    """Fills the dropped regions of a :class:`MaskedImage`.

    Implementations are deterministic and read-only after construction (or
    fitting), so one instance may serve concurrent callers.
    """

    preserves_kept: bool = True

    @abc.abstractmethod
    def inpaint(self, masked: MaskedImage) -> np.ndarray:
        ...

    @abc.abstractmethod
    def inpaint_torch(self, pixels: torch.Tensor, keep: torch.Tensor) -> torch.Tensor:
        """Differentiable batch version: ``pixels`` ``(B, H, W)``, ``keep`` bool ``(B, H, W)``."""


class MeanFill(Inpainter):
    """Dropped regions take the mean intensity of the kept pixels."""

    def inpaint(self, masked: MaskedImage) -> np.ndarray:
        keep = masked.mask.pixel_mask()
        if keep.all():
            return masked.pixels.copy()
        return np.where(keep, masked.pixels, masked.pixels[keep].mean())

    def inpaint_torch(self, pixels, keep):
        k = keep.to(pixels.dtype)
        mean = (pixels * k).sum(dim=(1, 2)) / k.sum(dim=(1, 2))
        return torch.where(keep, pixels, mean[:, None, None])


class PatchRegressor(Inpainter):
    """Linear map from kept-patch means (and the keep pattern) to every pixel.

    Features per image are the region means of kept patches (zero where
    dropped), the region keep bits and a bias.  The map is fit by ridge
    least squares; kept pixels pass through unchanged and predictions are
    clipped to [0, 1].
    """

    def __init__(self, ridge: float = 1e-6):
        self.ridge = ridge
        self.weights: Optional[np.ndarray] = None
        self.shape: Optional[Tuple[int, int]] = None
        self.patch: Optional[int] = None
        self.residual_bound: Optional[float] = None
        self._torch_weights: Optional[torch.Tensor] = None

    @staticmethod
    def _features(pixels: np.ndarray, keep: np.ndarray, p: int) -> np.ndarray:
        h, w = pixels.shape
        means = pixels.reshape(h // p, p, w // p, p).mean(axis=(1, 3)).ravel()
        bits = keep.ravel().astype(np.float64)
        return np.concatenate([means * bits, bits, [1.0]])

    def fit(self, images: Sequence[np.ndarray], masks: Sequence[RegionMask]) -> "PatchRegressor":
        if not images or len(images) != len(masks):
            raise ValueError("need matching, non-empty image and mask lists")
        p = masks[0].patch
        X = np.stack([self._features(np.asarray(img), m.keep, p) for img, m in zip(images, masks)])
        Y = np.stack([np.asarray(img).ravel() for img in images])
        A = X.T @ X + self.ridge * np.eye(X.shape[1])
        self.weights = np.linalg.solve(A, X.T @ Y)
        self.shape = np.asarray(images[0]).shape
        self.patch = p
        self._torch_weights = None
        bound = 0.0
        for img, m in zip(images, masks):
            out = self.inpaint(MaskedImage(apply_mask(img, m).pixels, m))
            bound = max(bound, float(np.abs(out - img).max()))
        self.residual_bound = bound
        return self

    def inpaint(self, masked: MaskedImage) -> np.ndarray:
        if self.weights is None:
            raise RuntimeError("PatchRegressor must be fit before use")
        if masked.pixels.shape != self.shape:
            raise ValueError(f"image shape {masked.pixels.shape} differs from fitted {self.shape}")
        keep = masked.mask.pixel_mask()
        pred = np.clip(self._features(masked.pixels, masked.mask.keep, self.patch) @ self.weights, 0.0, 1.0)
        return np.where(keep, masked.pixels, pred.reshape(self.shape))

    def inpaint_torch(self, pixels, keep):
        if self.weights is None:
            raise RuntimeError("PatchRegressor must be fit before use")
        if self._torch_weights is None or self._torch_weights.dtype != pixels.dtype:
            self._torch_weights = torch.as_tensor(self.weights, dtype=pixels.dtype)
        B, h, w = pixels.shape
        p = self.patch
        bits = keep[:, ::p, ::p].reshape(B, -1).to(pixels.dtype)
        means = pixels.reshape(B, h // p, p, w // p, p).mean(dim=(2, 4)).reshape(B, -1)
        feats = torch.cat([means * bits, bits, torch.ones(B, 1, dtype=pixels.dtype)], dim=1)
        pred = (feats @ self._torch_weights).clamp(0.0, 1.0).reshape(B, h, w)
        return torch.where(keep, pixels, pred)


def make_inpainter(name: str) -> Inpainter:
    if name == "mean_fill":
        return MeanFill()
    if name == "patch_regressor":
        return PatchRegressor()
    raise ValueError(f"unknown inpainter {name!r}")


def inpaint(model: Inpainter, masked: MaskedImage) -> np.ndarray:
    grid = masked.mask.keep.shape
    if masked.pixels.shape != (grid[0] * masked.mask.patch, grid[1] * masked.mask.patch):
        raise ValueError("masked image and mask grid disagree in shape")
    out = model.inpaint(masked)
    if out.shape != masked.pixels.shape:
        raise ValueError("inpainter changed the image shape")
    return out


def dr_loss(inp_i: np.ndarray, v_i: np.ndarray, inp_j: np.ndarray, v_j: np.ndarray) -> float:
    """Summed squared pixel error of both inpainted views against their source renders."""
    shapes = {np.shape(inp_i), np.shape(v_i), np.shape(inp_j), np.shape(v_j)}
    if len(shapes) != 1:
        raise ValueError(f"image shapes differ: {sorted(shapes)}")
    ri = np.asarray(inp_i, dtype=np.float64) - np.asarray(v_i, dtype=np.float64)
    rj = np.asarray(inp_j, dtype=np.float64) - np.asarray(v_j, dtype=np.float64)
    return float(np.sum(ri * ri) + np.sum(rj * rj))


@dataclass(frozen=True)
class RefinementResult:
    loss: float  # mean over sampled frames of the per-pair loss
    branch_i: float
    branch_j: float
    frames: Tuple[int, ...]


def _per_joint(e: Union[PartEnergy, np.ndarray]) -> np.ndarray:
    return e.per_joint if isinstance(e, PartEnergy) else np.asarray(e, dtype=np.float64)


def refinement_pass(
    composite: Union[MotionSequence, np.ndarray],
    source_i: MotionSequence,
    source_j: MotionSequence,
    e_i: Union[PartEnergy, np.ndarray],
    e_j: Union[PartEnergy, np.ndarray],
    cam: CameraConfig,
    rho: float,
    inpainter: Inpainter,
    stride: int = 1,
    eps_pix: float = 1.0,
    fill: float = FILL_VALUE,
) -> RefinementResult:
    """Decouple, inpaint and score a generated composite against its sources.

    Sources are expected frontal-normalized already; the composite is
    normalized here.  Composite frame ``t`` is compared with the source frame
    at the same relative time.
    """
    joints = composite.joints if isinstance(composite, MotionSequence) else np.asarray(composite, dtype=np.float64)
    comp = normalize_frontal(MotionSequence(joints, source_i.label, source_i.fps))
    idx = frame_indices(comp.num_frames, stride)
    if not idx:
        raise ValueError("no frames selected for refinement")
    ei, ej = _per_joint(e_i), _per_joint(e_j)
    total_i = total_j = 0.0
    for t in idx:
        frame = render_frame(comp.joints[t], cam)
        mi, mj = decouple_composite(frame, ei, ej, rho, cam.patch, eps_pix, fill)
        ti = _matching_index(t, comp.num_frames, source_i.num_frames)
        tj = _matching_index(t, comp.num_frames, source_j.num_frames)
        vi = render_frame(source_i.joints[ti], cam).pixels
        vj = render_frame(source_j.joints[tj], cam).pixels
        ii, ij = inpaint(inpainter, mi), inpaint(inpainter, mj)
        total_i += float(np.sum((ii - vi) ** 2))
        total_j += float(np.sum((ij - vj) ** 2))
    n = len(idx)
    return RefinementResult((total_i + total_j) / n, total_i / n, total_j / n, tuple(idx))


def _matching_index(t: int, T_from: int, T_to: int) -> int:
    if T_from == T_to or T_from == 1:
        return min(t, T_to - 1)
    return int(round(t * (T_to - 1) / (T_from - 1)))


def regressor_corpus(
    sequences: Sequence[MotionSequence],
    cam: CameraConfig,
    rho: float,
    rng: np.random.Generator,
    stride: int = 4,
    eps_pix: float = 1.0,
) -> Tuple[List[np.ndarray], List[RegionMask]]:
    """Rendered frames paired with masks for fitting a :class:`PatchRegressor`.

    Each frame is paired once with its own energy-attention mask and once
    with a random mask of the same cardinality.
    """
    images, masks = [], []
    for seq in sequences:
        seq = normalize_frontal(seq)
        e = compute_part_energy(seq).per_joint
        for t in frame_indices(seq.num_frames, stride):
            frame = render_frame(seq.joints[t], cam)
            grid = region_average(attention_map(frame.joint_pixels, e, cam, eps_pix), cam.patch)
            images.append(frame.pixels)
            masks.append(top_fraction_mask(grid, rho))
            images.append(frame.pixels)
            masks.append(top_fraction_mask(RegionGrid(rng.random(grid.values.shape), cam.patch), rho))
    return images, masks
