"""Image-quality metrics (PSNR, SSIM) and per-run evaluation summaries."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import convolve

from .core import ImageBuffer
from .errors import DimensionMismatch

PSNR_CAP_DB = 99.0
_SSIM_WINDOW = 11
_SSIM_SIGMA = 1.5
_K1, _K2 = 0.01, 0.03
_LUMA = np.array([0.299, 0.587, 0.114])  # Rec. 601


def _check_pair(a: ImageBuffer, b: ImageBuffer) -> None:
    if a.pixels.shape != b.pixels.shape:
        raise DimensionMismatch(
            f"image shapes differ: {a.pixels.shape} vs {b.pixels.shape}")
    if a.pixels.shape[2] != 3:
        raise DimensionMismatch("metrics expect 3-channel images")


def psnr(a: ImageBuffer, b: ImageBuffer) -> float:
    """10·log10(1/MSE) in dB over all channels, capped at 99 dB."""
    _check_pair(a, b)
    mse = float(np.mean((a.pixels.astype(np.float64)
                         - b.pixels.astype(np.float64)) ** 2))
    if mse <= 10.0 ** (-PSNR_CAP_DB / 10.0):
        return PSNR_CAP_DB
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    r = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(r ** 2) / (2.0 * sigma ** 2))
    k = np.outer(g, g)
    return k / k.sum()


def ssim(a: ImageBuffer, b: ImageBuffer) -> float:
    """Mean local SSIM on luma; 11x11 Gaussian window, sigma 1.5, L = 1."""
    _check_pair(a, b)
    x = a.pixels.astype(np.float64) @ _LUMA
    y = b.pixels.astype(np.float64) @ _LUMA
    win = _gaussian_window(_SSIM_WINDOW, _SSIM_SIGMA)

    def f(img):
        return convolve(img, win, mode="reflect")

    c1 = (_K1 * 1.0) ** 2
    c2 = (_K2 * 1.0) ** 2
    mu_x, mu_y = f(x), f(y)
    var_x = f(x * x) - mu_x ** 2
    var_y = f(y * y) - mu_y ** 2
    cov = f(x * y) - mu_x * mu_y
    num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
    return float(np.mean(num / den))


@dataclass
class EvalReport:
    """Per-view image metrics plus geometry and timing summaries."""
    view_psnr: list[float] = field(default_factory=list)
    view_ssim: list[float] = field(default_factory=list)
    chamfer: float | None = None
    stage_seconds: dict[str, float] = field(default_factory=dict)

    def add_view(self, a: ImageBuffer, b: ImageBuffer) -> None:
        self.view_psnr.append(psnr(a, b))
        self.view_ssim.append(ssim(a, b))

    @property
    def mean_psnr(self) -> float:
        return float(np.mean(self.view_psnr)) if self.view_psnr else 0.0

    @property
    def mean_ssim(self) -> float:
        return float(np.mean(self.view_ssim)) if self.view_ssim else 0.0

    def to_json(self) -> dict:
        return {
            "view_psnr": [float(v) for v in self.view_psnr],
            "view_ssim": [float(v) for v in self.view_ssim],
            "mean_psnr": self.mean_psnr,
            "mean_ssim": self.mean_ssim,
            "chamfer": self.chamfer,
            "stage_seconds": dict(self.stage_seconds),
        }
