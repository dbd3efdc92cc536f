"""Reconstruction quality metrics: NMSE and mean local SSIM.

The SSIM variant is fixed for reproducibility: 8x8 uniform window, stride 1,
valid windows only (no padding), biased moment estimates, stabilizing
constants (0.01*L)^2 and (0.03*L)^2 for dynamic range L = 1.0.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MetricReport", "nmse", "ssim", "ssim_masked"]

_C1 = 0.01 ** 2
_C2 = 0.03 ** 2


def _as_array(img):
    return np.asarray(getattr(img, "data", img), dtype=np.float64)


@dataclass(frozen=True)
class MetricReport:
    nmse: float
    ssim: float

    def to_dict(self):
        return {"nmse": self.nmse, "ssim": self.ssim}


def nmse(estimate, reference):
    """||estimate - reference||^2 / ||reference||^2."""
    e = _as_array(estimate)
    r = _as_array(reference)
    if e.shape != r.shape:
        raise ValueError(f"shape mismatch {e.shape} vs {r.shape}")
    denom = float(np.sum(r * r))
    if denom == 0.0:
        raise ValueError("reference image is identically zero")
    return float(np.sum((e - r) ** 2)) / denom


def _ssim_map(e, r, window):
    view = np.lib.stride_tricks.sliding_window_view
    we = view(e, (window, window))
    wr = view(r, (window, window))
    mu_e = we.mean(axis=(-2, -1))
    mu_r = wr.mean(axis=(-2, -1))
    # biased (divide-by-n) second moments
    var_e = (we * we).mean(axis=(-2, -1)) - mu_e * mu_e
    var_r = (wr * wr).mean(axis=(-2, -1)) - mu_r * mu_r
    cov = (we * wr).mean(axis=(-2, -1)) - mu_e * mu_r
    num = (2 * mu_e * mu_r + _C1) * (2 * cov + _C2)
    den = (mu_e * mu_e + mu_r * mu_r + _C1) * (var_e + var_r + _C2)
    return num / den


def ssim(estimate, reference, window=8):
    """Mean local SSIM over all fully-inside sliding windows."""
    e = _as_array(estimate)
    r = _as_array(reference)
    if e.shape != r.shape:
        raise ValueError(f"shape mismatch {e.shape} vs {r.shape}")
    if e.shape[0] < window or e.shape[1] < window:
        raise ValueError(f"image {e.shape} smaller than the {window}x{window} window")
    return float(_ssim_map(e, r, window).mean())


def ssim_masked(estimate, reference, mask, window=8):
    """Mean local SSIM over windows lying fully inside the boolean mask.

    Used for background quality: pass the complement of the RoI windows.
    """
    e = _as_array(estimate)
    r = _as_array(reference)
    m = np.asarray(mask, dtype=bool)
    if e.shape != r.shape or e.shape != m.shape:
        raise ValueError("estimate, reference and mask must share a shape")
    if e.shape[0] < window or e.shape[1] < window:
        raise ValueError(f"image {e.shape} smaller than the {window}x{window} window")
    view = np.lib.stride_tricks.sliding_window_view
    inside = view(m, (window, window)).all(axis=(-2, -1))
    if not inside.any():
        raise ValueError("mask admits no full window")
    return float(_ssim_map(e, r, window)[inside].mean())
