"""
Image Quality Metrics

PSNR with a fixed peak and single-scale SSIM (11x11 Gaussian window,
sigma 1.5, K1 = 0.01, K2 = 0.03) averaged over window positions that
lie fully inside the image.
"""

from __future__ import annotations

import math

import numpy as np
from skimage.metrics import mean_squared_error, peak_signal_noise_ratio, structural_similarity

from core.errors import ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
# MSE at or below this is float round-off of an exact reconstruction (PSNR > 200 dB).
EXACT_MSE = 1e-20


def _pair(xhat: np.ndarray, x: np.ndarray) -> tuple:
    a = np.asarray(xhat, dtype=np.float64)
    b = np.asarray(x, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError("images must share a shape", {"xhat": list(a.shape), "x": list(b.shape)})
    return a, b


def psnr(xhat: np.ndarray, x: np.ndarray, peak: float = 1.0) -> float:
    """10 log10(peak^2 / MSE) in dB; exact reconstructions give +inf."""
    a, b = _pair(xhat, x)
    if mean_squared_error(b, a) <= EXACT_MSE:
        return math.inf
    return float(peak_signal_noise_ratio(b, a, data_range=peak))


def ssim(xhat: np.ndarray, x: np.ndarray, data_range: float = 1.0) -> float:
    a, b = _pair(xhat, x)
    if a.ndim != 2:
        raise ShapeError("ssim expects grayscale H x W images", {"shape": list(a.shape)})
    if min(a.shape) < SSIM_WINDOW:
        raise ShapeError("image is smaller than the SSIM window", {"shape": list(a.shape), "window": SSIM_WINDOW})

    # skimage truncates sigma 1.5 to an 11-tap window and crops its half-width
    # from every border before averaging.
    return float(structural_similarity(
        a,
        b,
        data_range=data_range,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
    ))
