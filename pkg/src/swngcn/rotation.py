"""Image rotation by arbitrary angles with bilinear interpolation.

Rotation is an inverse mapping about the geometric center of the pixel grid
((W-1)/2, (H-1)/2 in 0-based coordinates): each output pixel pulls its value
from the back-rotated source position; source samples outside the image
contribute zero. Multiples of 90 degrees on square images take a lossless
permutation fast path shared with the grid module.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .grid import quarter_turn_indices


@dataclass(frozen=True)
class RotationSpec:
    """Angle in degrees (normalized to [0, 360)) plus an optional circular mask.

    Interpolation is bilinear and padding is zero by construction.
    """

    angle_degrees: float
    mask: bool = False

    def __post_init__(self):
        object.__setattr__(self, "angle_degrees", float(self.angle_degrees) % 360.0)


def rotate(image: np.ndarray, spec: RotationSpec | float) -> np.ndarray:
    """Rotate `image` ((H, W) or (H, W, C), values in [0, 1]) about its center."""
    if not isinstance(spec, RotationSpec):
        spec = RotationSpec(angle_degrees=spec)
    image = np.asarray(image)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    height, width = image.shape[:2]

    angle = spec.angle_degrees
    if angle % 90.0 == 0.0 and width == height:
        perm = quarter_turn_indices(height, int(angle // 90))
        out = image.reshape(height * width, -1)[perm].reshape(image.shape)
    else:
        out = _rotate_bilinear(image, angle)
    if spec.mask:
        out = circular_mask(out)
    return out[:, :, 0] if squeeze else out


def _rotate_bilinear(image: np.ndarray, angle_degrees: float) -> np.ndarray:
    height, width = image.shape[:2]
    cy = (height - 1) / 2.0
    cx = (width - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    ux = cols - cx
    uy = rows - cy
    theta = np.deg2rad(angle_degrees)
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    # inverse map: source = R(-theta) @ output offset
    src_col = cos_t * ux + sin_t * uy + cx
    src_row = -sin_t * ux + cos_t * uy + cy

    c0 = np.floor(src_col).astype(np.int64)
    r0 = np.floor(src_row).astype(np.int64)
    fc = src_col - c0
    fr = src_row - r0

    out = np.zeros_like(image, dtype=np.float64)
    for dr, dc, weight in (
        (0, 0, (1 - fr) * (1 - fc)),
        (0, 1, (1 - fr) * fc),
        (1, 0, fr * (1 - fc)),
        (1, 1, fr * fc),
    ):
        r = r0 + dr
        c = c0 + dc
        inside = (r >= 0) & (r < height) & (c >= 0) & (c < width)
        values = image[np.clip(r, 0, height - 1), np.clip(c, 0, width - 1)]
        out += (weight * inside)[:, :, None] * values
    return out.astype(image.dtype)


def circular_mask(image: np.ndarray) -> np.ndarray:
    """Zero out pixels beyond radius min(W, H)/2 from the image center."""
    image = np.asarray(image)
    squeeze = image.ndim == 2
    if squeeze:
        image = image[:, :, None]
    height, width = image.shape[:2]
    cy = (height - 1) / 2.0
    cx = (width - 1) / 2.0
    rows, cols = np.meshgrid(np.arange(height), np.arange(width), indexing="ij")
    radius = np.sqrt((rows - cy) ** 2 + (cols - cx) ** 2)
    keep = radius <= min(width, height) / 2.0
    out = image * keep[:, :, None]
    return out[:, :, 0] if squeeze else out
