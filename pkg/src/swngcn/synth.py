"""Synthetic upright digit images for self-contained runs.

Renders ten stroke-based digit glyphs with per-sample jitter (shift, scale,
stroke width, intensity) at any square size, and writes them through the
same binary codecs the real datasets use. Glyph shapes are chosen so that
no class is a rigid rotation of another; rotation only ever appears at
evaluation time.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from PIL import Image, ImageDraw

from .data import LabeledImageSet, write_cifar10, write_idx_images, write_idx_labels

_SUPERSAMPLE = 4


def _draw_glyph(draw: ImageDraw.ImageDraw, digit: int, box: tuple[float, float, float, float],
                width: int) -> None:
    x0, y0, x1, y1 = box

    def pt(u, v):
        return (x0 + u * (x1 - x0), y0 + v * (y1 - y0))

    def line(*uv):
        draw.line([pt(u, v) for u, v in uv], fill=255, width=width, joint="curve")

    def ellipse(u0, v0, u1, v1):
        draw.ellipse([pt(u0, v0), pt(u1, v1)], outline=255, width=width)

    def arc(u0, v0, u1, v1, start, end):
        draw.arc([pt(u0, v0), pt(u1, v1)], start, end, fill=255, width=width)

    if digit == 0:
        ellipse(0.18, 0.08, 0.82, 0.92)
    elif digit == 1:
        line((0.32, 0.28), (0.56, 0.10), (0.56, 0.90))
    elif digit == 2:
        arc(0.18, 0.08, 0.82, 0.56, 140, 40)
        line((0.78, 0.40), (0.20, 0.90), (0.82, 0.90))
    elif digit == 3:
        arc(0.20, 0.08, 0.80, 0.50, 250, 110)
        arc(0.20, 0.50, 0.80, 0.92, 250, 110)
    elif digit == 4:
        line((0.62, 0.08), (0.20, 0.62), (0.85, 0.62))
        line((0.66, 0.34), (0.66, 0.92))
    elif digit == 5:
        line((0.78, 0.10), (0.26, 0.10), (0.26, 0.48))
        arc(0.20, 0.40, 0.80, 0.92, 200, 120)
    elif digit == 6:
        line((0.64, 0.08), (0.36, 0.46))
        ellipse(0.22, 0.44, 0.74, 0.92)
    elif digit == 7:
        line((0.18, 0.10), (0.82, 0.10), (0.42, 0.92))
    elif digit == 8:
        ellipse(0.28, 0.08, 0.72, 0.50)
        ellipse(0.24, 0.48, 0.76, 0.92)
    elif digit == 9:
        ellipse(0.26, 0.08, 0.78, 0.56)
        line((0.78, 0.34), (0.78, 0.92))
    else:
        raise ValueError(f"digit must be in 0..9, got {digit}")


def render_digit(digit: int, size: int = 28, *, shift=(0.0, 0.0), scale: float = 1.0,
                 stroke: float = 2.2, intensity: float = 1.0) -> np.ndarray:
    """Rasterize one digit to a (size, size) float array in [0, 1]."""
    s = _SUPERSAMPLE
    canvas = Image.new("L", (size * s, size * s), 0)
    draw = ImageDraw.Draw(canvas)
    half = 0.40 * size * s * scale
    cx = (size / 2.0 + shift[0]) * s
    cy = (size / 2.0 + shift[1]) * s
    box = (cx - half, cy - half, cx + half, cy + half)
    width = max(1, int(round(stroke * s * size / 28.0)))
    _draw_glyph(draw, digit, box, width)
    small = canvas.resize((size, size), Image.BILINEAR)
    return np.asarray(small, dtype=np.float32) / 255.0 * intensity


def make_digit_set(count: int, seed: int = 0, *, size: int = 28, channels: int = 1,
                   name: str = "synth") -> LabeledImageSet:
    """Jittered glyph dataset with labels cycling through the ten classes."""
    rng = np.random.default_rng(seed)
    images = np.zeros((count, size, size, channels), dtype=np.float32)
    labels = np.arange(count, dtype=np.int64) % 10
    rng.shuffle(labels)
    for i in range(count):
        img = render_digit(
            int(labels[i]),
            size=size,
            shift=tuple(rng.uniform(-0.07 * size, 0.07 * size, size=2)),
            scale=float(rng.uniform(0.85, 1.1)),
            stroke=float(rng.uniform(1.8, 2.8)),
            intensity=float(rng.uniform(0.75, 1.0)),
        )
        if channels == 1:
            images[i, :, :, 0] = img
        else:
            tint = rng.uniform(0.6, 1.0, size=channels).astype(np.float32)
            images[i] = img[:, :, None] * tint
    return LabeledImageSet(images, labels, name, class_count=10)


def write_digit_idx(out_dir, prefix: str, count: int, seed: int,
                    size: int = 28) -> tuple[Path, Path]:
    """Render a digit set and write it as an IDX image/label file pair."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    dataset = make_digit_set(count, seed, size=size)
    images_path = out_dir / f"{prefix}-images-idx3-ubyte"
    labels_path = out_dir / f"{prefix}-labels-idx1-ubyte"
    pixels = np.round(dataset.images[:, :, :, 0] * 255.0).astype(np.uint8)
    write_idx_images(images_path, pixels)
    write_idx_labels(labels_path, dataset.labels)
    return images_path, labels_path


def write_digit_cifar(out_path, count: int, seed: int) -> Path:
    """Render a 32x32 RGB digit set as one CIFAR-10-format binary batch."""
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    dataset = make_digit_set(count, seed, size=32, channels=3)
    pixels = np.round(dataset.images * 255.0).astype(np.uint8)
    write_cifar10(out_path, pixels, dataset.labels)
    return out_path
