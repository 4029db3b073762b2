"""Full-reference quality metrics: PSNR and SSIM."""
from __future__ import annotations

import numpy as np
from scipy.ndimage import convolve

from ..errors import ShapeMismatch, TooSmall
from ..imgio import max_value

# SSIM constants: standard stabilizers and window.
SSIM_K1 = 0.01
SSIM_K2 = 0.03
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5


def _check_pair(ref: np.ndarray, test: np.ndarray) -> None:
    if ref.shape != test.shape:
        raise ShapeMismatch(f"shape {ref.shape} vs {test.shape}")
    if ref.dtype != test.dtype:
        raise ShapeMismatch(f"dtype {ref.dtype} vs {test.dtype}")


def psnr(ref: np.ndarray, test: np.ndarray) -> float:
    """Peak signal-to-noise ratio in dB; inf for identical images.

    10*log10(L^2 / MSE) with L the nominal full scale of the dtype and the
    MSE taken over every sample of every channel.
    """
    _check_pair(ref, test)
    diff = np.asarray(ref, dtype=np.float64) - np.asarray(test, dtype=np.float64)
    mse = float(np.mean(diff * diff))
    if mse == 0.0:
        return float("inf")
    peak = max_value(ref)
    return float(10.0 * np.log10(peak * peak / mse))


def gaussian_kernel(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    """Normalized 2-D Gaussian window."""
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords ** 2) / (2.0 * sigma ** 2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def _ssim_plane(ref: np.ndarray, test: np.ndarray, peak: float) -> float:
    kernel = gaussian_kernel()
    c1 = (SSIM_K1 * peak) ** 2
    c2 = (SSIM_K2 * peak) ** 2
    half = SSIM_WINDOW // 2

    def wfilter(arr: np.ndarray) -> np.ndarray:
        # 'valid' region only: crop after a constant-mode convolve.
        out = convolve(arr, kernel, mode="constant", cval=0.0)
        return out[half:-half, half:-half]

    mu1 = wfilter(ref)
    mu2 = wfilter(test)
    mu1_sq = mu1 * mu1
    mu2_sq = mu2 * mu2
    mu12 = mu1 * mu2
    sigma1_sq = wfilter(ref * ref) - mu1_sq
    sigma2_sq = wfilter(test * test) - mu2_sq
    sigma12 = wfilter(ref * test) - mu12

    num = (2.0 * mu12 + c1) * (2.0 * sigma12 + c2)
    den = (mu1_sq + mu2_sq + c1) * (sigma1_sq + sigma2_sq + c2)
    return float(np.mean(num / den))


def ssim(ref: np.ndarray, test: np.ndarray) -> float:
    """Mean structural similarity over 11x11 Gaussian windows.

    Channels are scored independently and averaged.  Windows are evaluated
    only where they fit entirely inside the image, so both dimensions must
    be at least the window size.
    """
    _check_pair(ref, test)
    if min(ref.shape[0], ref.shape[1]) < SSIM_WINDOW:
        raise TooSmall(
            f"SSIM needs both dimensions >= {SSIM_WINDOW}, got {ref.shape[:2]}"
        )
    peak = max_value(ref)
    a = np.asarray(ref, dtype=np.float64)
    b = np.asarray(test, dtype=np.float64)
    if a.ndim == 2:
        return _ssim_plane(a, b, peak)
    values = [_ssim_plane(a[:, :, c], b[:, :, c], peak)
              for c in range(a.shape[2])]
    return float(np.mean(values))
