"""Float image buffers and 8/16-bit PNG I/O.

Images are float32 in [0, 1], shape (height, width, channels). PNG color
writes apply gamma 2.2; reads apply the exact inverse, so write-read round
trips up to 8-bit quantization.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

GAMMA = 2.2


@dataclass(frozen=True)
class ImageBuffer:
    pixels: np.ndarray  # (H, W, C) float32 in [0, 1]

    def __post_init__(self):
        p = np.asarray(self.pixels, dtype=np.float32)
        if p.ndim == 2:
            p = p[:, :, None]
        if p.ndim != 3 or p.shape[2] not in (1, 3, 4):
            raise ValueError(f"bad image shape {p.shape}")
        if not np.isfinite(p).all():
            raise ValueError("non-finite pixel values")
        if p.min() < 0.0 or p.max() > 1.0:
            raise ValueError("pixel values outside [0, 1]")
        p.flags.writeable = False
        object.__setattr__(self, "pixels", p)

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def channels(self) -> int:
        return self.pixels.shape[2]

    @staticmethod
    def full(height: int, width: int, value, channels: int = 3) -> "ImageBuffer":
        p = np.empty((height, width, channels), dtype=np.float32)
        p[:] = value
        return ImageBuffer(p)


def linear_to_srgb(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0) ** (1.0 / GAMMA)


def srgb_to_linear(x: np.ndarray) -> np.ndarray:
    return np.clip(x, 0.0, 1.0) ** GAMMA


def write_png_color(path, img: ImageBuffer, gamma: bool = True) -> None:
    p = img.pixels[:, :, :3]
    if gamma:
        p = linear_to_srgb(p)
    arr = np.clip(np.rint(p * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(Path(path))


def read_png_color(path, gamma: bool = True) -> ImageBuffer:
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    if gamma:
        arr = srgb_to_linear(arr)
    return ImageBuffer(arr)


def write_png_gray(path, img: ImageBuffer) -> None:
    arr = np.clip(np.rint(img.pixels[:, :, 0] * 255.0), 0, 255).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(Path(path))


def read_png_gray(path) -> ImageBuffer:
    with Image.open(Path(path)) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float32) / 255.0
    return ImageBuffer(arr[:, :, None])


def write_png_depth_mm(path, depth_m: np.ndarray) -> None:
    """Depth in meters to 16-bit millimeter PNG (0 = no hit)."""
    mm = np.clip(np.rint(depth_m * 1000.0), 0, 65535).astype(np.uint16)
    Image.fromarray(mm).save(Path(path))


def read_png_depth_mm(path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        arr = np.asarray(im, dtype=np.float64)
    return arr / 1000.0


def write_png_ids(path, ids: np.ndarray) -> None:
    Image.fromarray(ids.astype(np.uint8), mode="L").save(Path(path))


def read_png_ids(path) -> np.ndarray:
    with Image.open(Path(path)) as im:
        return np.asarray(im.convert("L"), dtype=np.int64)
