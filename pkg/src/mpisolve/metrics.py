"""Image quality metrics: PSNR and single-scale SSIM.

SSIM uses the standard 11x11 Gaussian window (sigma 1.5), stability
constants K1 = 0.01 and K2 = 0.03 on a unit dynamic range, and averages
the per-pixel index over fully valid windows only (no padding), per
channel, then over channels.
"""
from __future__ import annotations

import numpy as np
from scipy.ndimage import correlate1d

from .errors import ValidationError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(image: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; +inf for identical images."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise ValidationError("psnr operands must have the same shape")
    mse = np.mean((image - reference) ** 2)
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak * peak / mse))


def _gaussian_kernel(size: int, sigma: float) -> np.ndarray:
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2.0
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _filter_valid(img: np.ndarray, kernel: np.ndarray) -> np.ndarray:
    """Separable filtering, cropped to windows fully inside the image."""
    r = len(kernel) // 2
    out = correlate1d(img, kernel, axis=0, mode="constant")
    out = correlate1d(out, kernel, axis=1, mode="constant")
    return out[r:img.shape[0] - r, r:img.shape[1] - r]


def ssim(image: np.ndarray, reference: np.ndarray, peak: float = 1.0) -> float:
    """Mean structural similarity over valid windows, averaged over channels."""
    image = np.asarray(image, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if image.shape != reference.shape:
        raise ValidationError("ssim operands must have the same shape")
    if image.ndim == 2:
        image = image[..., None]
        reference = reference[..., None]
    if image.shape[0] < SSIM_WINDOW or image.shape[1] < SSIM_WINDOW:
        raise ValidationError(
            f"images must be at least {SSIM_WINDOW}x{SSIM_WINDOW} for ssim")

    kernel = _gaussian_kernel(SSIM_WINDOW, SSIM_SIGMA)
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2

    vals = []
    for c in range(image.shape[2]):
        x = image[..., c]
        y = reference[..., c]
        mu_x = _filter_valid(x, kernel)
        mu_y = _filter_valid(y, kernel)
        var_x = _filter_valid(x * x, kernel) - mu_x * mu_x
        var_y = _filter_valid(y * y, kernel) - mu_y * mu_y
        cov = _filter_valid(x * y, kernel) - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * cov + c2)
        den = (mu_x ** 2 + mu_y ** 2 + c1) * (var_x + var_y + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))
