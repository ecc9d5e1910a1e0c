"""Frontal normalization and stick-figure rasterization of skeletons.

Projection is orthographic along the depth (z) axis.  Pixel ``(col, row)``
has its center at integer coordinates; rows grow downward, so a point at
height ``y`` lands on row ``cy - scale * y``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .skeleton import BONES, LEFT_HIP, NUM_JOINTS, RIGHT_HIP, ROOT, MotionSequence, Pose

HIP_EPS = 1e-9


@dataclass(frozen=True)
class CameraConfig:
    height: int = 64
    width: int = 64
    scale: float = 32.0  # pixels per meter
    cx: float = 32.0
    cy: float = 30.0
    patch: int = 8
    thickness: float = 2.0

    def __post_init__(self):
        if self.height <= 0 or self.width <= 0:
            raise ValueError("image dimensions must be positive")
        if self.patch <= 0 or self.height % self.patch or self.width % self.patch:
            raise ValueError(f"image {self.height}x{self.width} is not a multiple of patch size {self.patch}")
        if not self.scale > 0:
            raise ValueError("camera scale must be positive")
        if not self.thickness > 0:
            raise ValueError("stroke thickness must be positive")

    @property
    def shape(self) -> Tuple[int, int]:
        return (self.height, self.width)

    @classmethod
    def mae_standard(cls) -> "CameraConfig":
        return cls(height=224, width=224, scale=112.0, cx=112.0, cy=105.0, patch=16, thickness=4.0)


@dataclass(frozen=True, eq=False)
class RenderedFrame:
    pixels: np.ndarray  # (H, W) in [0, 1]
    joint_pixels: np.ndarray  # (N, 2) as (col, row)

    def __post_init__(self):
        px = np.array(self.pixels, dtype=np.float64, copy=True)
        jp = np.array(self.joint_pixels, dtype=np.float64, copy=True)
        if px.ndim != 2:
            raise ValueError("pixels must be a 2-D array")
        if np.any(px < 0) or np.any(px > 1):
            raise ValueError("pixel intensities must lie in [0, 1]")
        if jp.ndim != 2 or jp.shape[1] != 2 or not np.all(np.isfinite(jp)):
            raise ValueError("joint pixels must be a finite (N, 2) array")
        px.setflags(write=False)
        jp.setflags(write=False)
        object.__setattr__(self, "pixels", px)
        object.__setattr__(self, "joint_pixels", jp)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.pixels.shape


# -- frontal normalization ---------------------------------------------------------


def yaw_matrix(angle: float) -> np.ndarray:
    """Rotation about +y by ``angle`` radians."""
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def frontal_transform(joints: np.ndarray) -> Tuple[np.ndarray, np.ndarray, bool]:
    """Rotation ``R`` and origin such that ``(p - origin) @ R.T`` is frontal.

    The first frame's root goes to the origin and its right-to-left hip axis
    is turned onto +x.  The third value is True when the hip axis has no
    horizontal extent and the rotation fell back to identity.
    """
    first = np.asarray(joints)[0]
    origin = first[ROOT].copy()
    hip = first[LEFT_HIP] - first[RIGHT_HIP]
    if math.hypot(hip[0], hip[2]) < HIP_EPS:
        return np.eye(3), origin, True
    return yaw_matrix(math.atan2(hip[2], hip[0])), origin, False


def normalize_frontal(seq: MotionSequence) -> MotionSequence:
    R, origin, degenerate = frontal_transform(seq.joints)
    if degenerate:
        warnings.warn(f"sequence {seq.id!r}: degenerate hip axis, rotation left as identity", RuntimeWarning)
    return seq.with_joints((seq.joints - origin) @ R.T)


# -- projection and rasterization ----------------------------------------------------


def project_points(points: np.ndarray, cam: CameraConfig) -> np.ndarray:
    points = np.asarray(points, dtype=np.float64)
    col = cam.cx + cam.scale * points[..., 0]
    row = cam.cy - cam.scale * points[..., 1]
    return np.stack([col, row], axis=-1)


def project_joint(point: Sequence[float], cam: CameraConfig) -> np.ndarray:
    return project_points(np.asarray(point, dtype=np.float64), cam)


def _pixel_grid(cam: CameraConfig) -> Tuple[np.ndarray, np.ndarray]:
    rows, cols = np.meshgrid(np.arange(cam.height, dtype=np.float64), np.arange(cam.width, dtype=np.float64), indexing="ij")
    return cols, rows


def segment_distance(cols: np.ndarray, rows: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from each pixel center to the segment ``a``-``b`` (both ``(col, row)``)."""
    d = b - a
    L2 = float(d @ d)
    pc = cols - a[0]
    pr = rows - a[1]
    if L2 == 0.0:
        t = np.zeros_like(pc)
    else:
        t = np.clip((pc * d[0] + pr * d[1]) / L2, 0.0, 1.0)
    return np.hypot(pc - t * d[0], pr - t * d[1])


def rasterize(joint_pixels: np.ndarray, cam: CameraConfig, bones: Sequence[Tuple[int, int]] = BONES) -> np.ndarray:
    """Anti-aliased strokes: intensity falls linearly from 1 to 0 across the last pixel."""
    cols, rows = _pixel_grid(cam)
    img = np.zeros(cam.shape)
    reach = cam.thickness / 2.0 + 0.5
    for a, b in bones:
        pa, pb = joint_pixels[a], joint_pixels[b]
        lo = np.floor(np.minimum(pa, pb) - reach).astype(int)
        hi = np.ceil(np.maximum(pa, pb) + reach).astype(int) + 1
        c0, c1 = max(lo[0], 0), min(hi[0], cam.width)
        r0, r1 = max(lo[1], 0), min(hi[1], cam.height)
        if c0 >= c1 or r0 >= r1:
            continue
        dist = segment_distance(cols[r0:r1, c0:c1], rows[r0:r1, c0:c1], pa, pb)
        np.maximum(img[r0:r1, c0:c1], np.clip(reach - dist, 0.0, 1.0), out=img[r0:r1, c0:c1])
    return img


def render_frame(pose: Union[Pose, np.ndarray], cam: CameraConfig, bones: Sequence[Tuple[int, int]] = BONES) -> RenderedFrame:
    joints = pose.joints if isinstance(pose, Pose) else np.asarray(pose, dtype=np.float64)
    if joints.shape != (NUM_JOINTS, 3):
        raise ValueError(f"pose must have shape ({NUM_JOINTS}, 3)")
    jp = project_points(joints, cam)
    return RenderedFrame(rasterize(jp, cam, bones), jp)


def frame_indices(T: int, stride: int) -> List[int]:
    if stride <= 0:
        raise ValueError(f"stride must be positive, got {stride}")
    return list(range(0, T, stride))


def render_sequence(seq: MotionSequence, cam: CameraConfig, stride: int = 1, bones=BONES) -> List[RenderedFrame]:
    return [render_frame(seq.joints[t], cam, bones) for t in frame_indices(seq.num_frames, stride)]


# -- image output ------------------------------------------------------------------


def to_bytes(pixels: np.ndarray) -> np.ndarray:
    return np.round(np.clip(pixels, 0.0, 1.0) * 255.0).astype(np.uint8)


def to_rgb(pixels: np.ndarray) -> np.ndarray:
    """Replicate a grayscale ``(H, W)`` image into ``(H, W, 3)`` for three-channel consumers."""
    pixels = np.asarray(pixels)
    if pixels.ndim != 2:
        raise ValueError(f"expected a 2-D grayscale image, got shape {pixels.shape}")
    return np.repeat(pixels[:, :, None], 3, axis=2)


def write_pgm(pixels: np.ndarray, path: Union[str, Path]) -> None:
    """Binary PPM family P5 (grayscale, maxval 255)."""
    data = to_bytes(pixels)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pgm(path: Union[str, Path]) -> np.ndarray:
    raw = Path(path).read_bytes()
    tokens: List[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while raw[pos:pos + 1].isspace():
            pos += 1
        if raw[pos:pos + 1] == b"#":
            pos = raw.index(b"\n", pos) + 1
            continue
        end = pos
        while not raw[end:end + 1].isspace():
            end += 1
        tokens.append(raw[pos:end])
        pos = end
    if tokens[0] != b"P5":
        raise ValueError(f"{path}: not a P5 image")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    data = np.frombuffer(raw[pos + 1:pos + 1 + w * h], dtype=np.uint8).reshape(h, w)
    return data.astype(np.float64) / maxval


def contact_sheet(images: Sequence[np.ndarray], columns: Optional[int] = None, gap: int = 1) -> np.ndarray:
    if not images:
        raise ValueError("no images for contact sheet")
    h, w = images[0].shape
    n = len(images)
    columns = columns or math.ceil(math.sqrt(n))
    rows = math.ceil(n / columns)
    sheet = np.ones((rows * (h + gap) - gap, columns * (w + gap) - gap))
    for k, img in enumerate(images):
        r, c = divmod(k, columns)
        sheet[r * (h + gap):r * (h + gap) + h, c * (w + gap):c * (w + gap) + w] = img
    return sheet
