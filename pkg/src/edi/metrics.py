"""Grayscale image quality metrics: PSNR and single-scale SSIM.

Definitions are pinned here rather than delegated so reported numbers are
reproducible: PSNR caps at 100 dB for identical images, SSIM uses the
classic 11x11 Gaussian window (sigma 1.5, k1 0.01, k2 0.03, range 1.0) and
averages over valid window positions only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionMismatchError

__all__ = ["PSNR_CAP_DB", "QualityReport", "psnr", "ssim", "compare_images"]

PSNR_CAP_DB = 100.0

_SSIM_WIN = 11
_SSIM_SIGMA = 1.5
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03


@dataclass(frozen=True)
class QualityReport:
    psnr_db: float
    ssim: float


def _paired(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"image shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2:
        raise ValueError(f"expected 2-D grayscale grids, got {a.ndim}-D")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """10 * log10(peak^2 / MSE), capped at 100 dB when the MSE is zero."""
    a, b = _paired(a, b)
    if peak <= 0:
        raise ValueError(f"peak must be positive, got {peak}")
    mse = float(np.mean(np.square(a - b)))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(10.0 * np.log10(peak * peak / mse), PSNR_CAP_DB)


def _gaussian_window(n: int, sigma: float) -> np.ndarray:
    r = np.arange(n) - (n - 1) / 2.0
    g = np.exp(-(r * r) / (2.0 * sigma * sigma))
    w = np.outer(g, g)
    return w / w.sum()


def ssim(a, b) -> float:
    """Mean local structural similarity over all fully valid 11x11 windows."""
    a, b = _paired(a, b)
    if min(a.shape) < _SSIM_WIN:
        raise ValueError(f"images must be at least {_SSIM_WIN}x{_SSIM_WIN}, got {a.shape}")
    w = _gaussian_window(_SSIM_WIN, _SSIM_SIGMA)
    c1 = (_SSIM_K1 * 1.0) ** 2
    c2 = (_SSIM_K2 * 1.0) ** 2

    wa = sliding_window_view(a, (_SSIM_WIN, _SSIM_WIN))
    wb = sliding_window_view(b, (_SSIM_WIN, _SSIM_WIN))
    mu_a = np.einsum("ijkl,kl->ij", wa, w)
    mu_b = np.einsum("ijkl,kl->ij", wb, w)
    e_aa = np.einsum("ijkl,ijkl,kl->ij", wa, wa, w)
    e_bb = np.einsum("ijkl,ijkl,kl->ij", wb, wb, w)
    e_ab = np.einsum("ijkl,ijkl,kl->ij", wa, wb, w)
    var_a = e_aa - mu_a * mu_a
    var_b = e_bb - mu_b * mu_b
    cov = e_ab - mu_a * mu_b

    num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2)
    den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))


def compare_images(a, b) -> QualityReport:
    return QualityReport(psnr_db=psnr(a, b), ssim=ssim(a, b))
