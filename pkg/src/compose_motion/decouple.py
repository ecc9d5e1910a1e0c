"""Energy-driven 2-D attention, patch pooling and region masking of rendered frames."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Tuple, Union

import numpy as np

from .render import CameraConfig, RenderedFrame

FILL_VALUE = 0.5

Shape = Union[CameraConfig, Tuple[int, int]]


def _hw(shape: Shape) -> Tuple[int, int]:
    return shape.shape if isinstance(shape, CameraConfig) else (int(shape[0]), int(shape[1]))


@dataclass(frozen=True, eq=False)
class AttentionMap:
    values: np.ndarray

    def __post_init__(self):
        if not np.all(np.isfinite(self.values)) or np.any(self.values < 0):
            raise ValueError("attention values must be finite and non-negative")


@dataclass(frozen=True, eq=False)
class RegionGrid:
    values: np.ndarray
    patch: int


@dataclass(frozen=True, eq=False)
class RegionMask:
    keep: np.ndarray  # bool, (H/p, W/p)
    rho: float
    patch: int

    @property
    def kept_indices(self) -> list:
        """Row-major indices of kept regions."""
        return [int(i) for i in np.flatnonzero(self.keep.ravel())]

    def pixel_mask(self) -> np.ndarray:
        return np.repeat(np.repeat(self.keep, self.patch, axis=0), self.patch, axis=1)


@dataclass(frozen=True, eq=False)
class MaskedImage:
    pixels: np.ndarray
    mask: RegionMask
    fill: float = FILL_VALUE


def attention_map(joint_pixels: np.ndarray, per_joint_energy: np.ndarray, cam: Shape, eps_pix: float = 1.0) -> AttentionMap:
    """Sum of per-joint energies decayed by inverse squared pixel distance.

    Squared distances are floored at ``eps_pix**2`` so a pixel sitting on a
    joint gets a bounded score.
    """
    if not eps_pix > 0:
        raise ValueError("eps_pix must be positive")
    energy = np.asarray(per_joint_energy, dtype=np.float64)
    if np.any(energy < 0):
        raise ValueError("energies must be non-negative")
    jp = np.asarray(joint_pixels, dtype=np.float64)
    if jp.shape != (energy.size, 2):
        raise ValueError(f"{jp.shape[0]} joint pixels for {energy.size} energies")
    h, w = _hw(cam)
    rows = np.arange(h, dtype=np.float64)[:, None]
    cols = np.arange(w, dtype=np.float64)[None, :]
    out = np.zeros((h, w))
    floor = eps_pix * eps_pix
    for (pc, pr), e in zip(jp, energy):
        d2 = (cols - pc) ** 2 + (rows - pr) ** 2
        out += e / np.maximum(d2, floor)
    return AttentionMap(out)


def region_average(a: AttentionMap, p: int) -> RegionGrid:
    h, w = a.values.shape
    if p <= 0 or h % p or w % p:
        raise ValueError(f"map {h}x{w} is not divisible into {p}x{p} regions")
    blocks = a.values.reshape(h // p, p, w // p, p)
    return RegionGrid(blocks.mean(axis=(1, 3)), p)


def top_fraction_mask(g: RegionGrid, rho: float) -> RegionMask:
    """Keep the ``ceil(rho * R)`` highest regions; ties go to the lower row-major index."""
    if not 0.0 < rho <= 1.0:
        raise ValueError(f"retained fraction {rho} outside (0, 1]")
    flat = g.values.ravel()
    k = math.ceil(rho * flat.size)
    order = np.argsort(-flat, kind="stable")
    keep = np.zeros(flat.size, dtype=bool)
    keep[order[:k]] = True
    return RegionMask(keep.reshape(g.values.shape), rho, g.patch)


def apply_mask(img: Union[RenderedFrame, np.ndarray], m: RegionMask, fill: float = FILL_VALUE) -> MaskedImage:
    pixels = img.pixels if isinstance(img, RenderedFrame) else np.asarray(img, dtype=np.float64)
    expected = (m.keep.shape[0] * m.patch, m.keep.shape[1] * m.patch)
    if pixels.shape != expected:
        raise ValueError(f"image shape {pixels.shape} does not match mask grid {expected}")
    return MaskedImage(np.where(m.pixel_mask(), pixels, fill), m, fill)


def decouple_composite(
    composite_frame: RenderedFrame,
    e_i: np.ndarray,
    e_j: np.ndarray,
    rho: float = 1.0 / 3.0,
    p: int = 8,
    eps_pix: float = 1.0,
    fill: float = FILL_VALUE,
) -> Tuple[MaskedImage, MaskedImage]:
    """Split one composite frame into two masked views, one per source energy.

    Both attention maps use the composite's own joint pixels.
    """
    shape = composite_frame.shape
    out = []
    for e in (e_i, e_j):
        grid = region_average(attention_map(composite_frame.joint_pixels, e, shape, eps_pix), p)
        out.append(apply_mask(composite_frame, top_fraction_mask(grid, rho), fill))
    return out[0], out[1]
