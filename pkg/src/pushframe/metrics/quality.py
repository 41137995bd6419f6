"""PSNR and Gaussian-window SSIM.

SSIM uses an 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03 and a dynamic
range of 1. Local statistics use population (not sample) covariance and the
mean is taken over pixels at least 5 away from the border.
"""

from __future__ import annotations

import numpy as np
from scipy.ndimage import gaussian_filter

from pushframe.capture_sim.model import Image, ShapeMismatchError

from .model import QualityReport

WINDOW = 11
SIGMA = 1.5
K1 = 0.01
K2 = 0.03
DATA_RANGE = 1.0
# truncate * sigma = 5 gives the 11-tap kernel.
_TRUNCATE = ((WINDOW - 1) / 2) / SIGMA


class WindowSizeError(ValueError):
    """Raised when an image is smaller than the SSIM window."""


def _as_array(image: Image | np.ndarray) -> np.ndarray:
    return image.pixels if isinstance(image, Image) else np.asarray(image, dtype=np.float64)


def _paired(a: Image | np.ndarray, b: Image | np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    first, second = _as_array(a), _as_array(b)
    if first.shape != second.shape:
        raise ShapeMismatchError(f"Cannot compare images of shapes {first.shape} and {second.shape}")
    return first, second


def psnr(a: Image | np.ndarray, b: Image | np.ndarray, peak: float = 1.0) -> float:
    first, second = _paired(a, b)
    mse = float(np.mean((first - second) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak**2 / mse))


def _ssim_plane(x: np.ndarray, y: np.ndarray) -> float:
    def smooth(values: np.ndarray) -> np.ndarray:
        return gaussian_filter(values, sigma=SIGMA, truncate=_TRUNCATE, mode="reflect")

    mu_x, mu_y = smooth(x), smooth(y)
    var_x = smooth(x * x) - mu_x * mu_x
    var_y = smooth(y * y) - mu_y * mu_y
    cov = smooth(x * y) - mu_x * mu_y

    c1 = (K1 * DATA_RANGE) ** 2
    c2 = (K2 * DATA_RANGE) ** 2
    numerator = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
    denominator = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    local = numerator / denominator

    pad = (WINDOW - 1) // 2
    return float(local[pad:-pad, pad:-pad].mean())


def ssim(a: Image | np.ndarray, b: Image | np.ndarray) -> float:
    """Mean structural similarity; colour images average the per-band values."""
    first, second = _paired(a, b)
    if first.shape[0] < WINDOW or first.shape[1] < WINDOW:
        raise WindowSizeError(f"SSIM needs images of at least {WINDOW}x{WINDOW}, got {first.shape[:2]}")
    if first.ndim == 2:
        return _ssim_plane(first, second)
    return float(np.mean([_ssim_plane(first[..., k], second[..., k]) for k in range(first.shape[2])]))


def assess(a: Image | np.ndarray, b: Image | np.ndarray, peak: float = 1.0) -> QualityReport:
    value = ssim(a, b)
    return QualityReport(psnr_db=psnr(a, b, peak), ssim=float(np.clip(value, -1.0, 1.0)))
