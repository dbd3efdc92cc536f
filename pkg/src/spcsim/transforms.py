"""Orthogonal sparsifying transforms and the isotropic TV functional.

All three transform pairs are orthonormal, so for each of them the adjoint
equals the inverse and Parseval holds; solver step sizes then depend only on
the measurement operator norm. The Walsh pair is sequency ordered (rows
sorted by sign-change count) so that "low frequency" means the top-left
corner of the coefficient grid. The wavelet pair uses periodic boundary
extension, which keeps orthonormality exact for any even length, down to the
2x2 grids that show up when solving on coarse macro grids.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

from .kernels import fwht_inplace

__all__ = [
    "TransformSpec",
    "walsh2d",
    "iwalsh2d",
    "dct2d",
    "idct2d",
    "dwt2d_db8",
    "idwt2d_db8",
    "dwt1d_db8",
    "tv_value",
    "sequency_permutation",
    "DB8_LOWPASS",
]

KIND_WALSH = "Walsh2D"
KIND_DCT = "DCT2D"
KIND_DWT = "DWT_DB8"
_KINDS = (KIND_WALSH, KIND_DCT, KIND_DWT)

# Daubechies length-16 orthonormal scaling filter (8 vanishing moments),
# from spectral factorization of the half-band polynomial carried out in
# 60-digit arithmetic and rounded once to float64. The test suite re-derives
# these values independently.
DB8_LOWPASS = np.array([
    0.05441584224310401,
    0.31287159091429995,
    0.6756307362972898,
    0.5853546836542067,
    -0.015829105256349306,
    -0.2840155429615469,
    0.0004724845739132828,
    0.12874742662047847,
    -0.017369301001807547,
    -0.044088253930794755,
    0.013981027917398282,
    0.008746094047405777,
    -0.004870352993451574,
    -0.00039174037337694705,
    0.0006754494064505693,
    -0.00011747678412476953,
])

# quadrature-mirror highpass: h1[n] = (-1)^n h0[L-1-n]
DB8_HIGHPASS = (DB8_LOWPASS[::-1] * np.where(np.arange(16) % 2 == 0, 1.0, -1.0))


def _as_array(img):
    a = np.asarray(getattr(img, "data", img), dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2D array, got shape {a.shape}")
    return a


def _is_pow2(n):
    return n >= 1 and (n & (n - 1)) == 0


# --- Walsh-Hadamard --------------------------------------------------------

def sequency_permutation(n):
    """perm[s] = natural-order Hadamard row index of the sequency-s row."""
    if not _is_pow2(n):
        raise ValueError(f"length must be a power of two, got {n}")
    bits = n.bit_length() - 1
    s = np.arange(n)
    gray = s ^ (s >> 1)
    perm = np.zeros(n, dtype=np.int64)
    for i in range(bits):
        perm |= ((gray >> i) & 1) << (bits - 1 - i)
    return perm


def _fwht2(a):
    # unnormalized natural-order transform along both axes
    a = np.ascontiguousarray(a)
    fwht_inplace(a)
    a = np.ascontiguousarray(a.T)
    fwht_inplace(a)
    return a.T


def walsh2d(img):
    """Orthonormal sequency-ordered 2D Walsh-Hadamard coefficients."""
    a = _as_array(img)
    side = a.shape[0]
    if a.shape[0] != a.shape[1] or not _is_pow2(side):
        raise ValueError(f"walsh2d needs a square power-of-two side, got {a.shape}")
    nat = _fwht2(a.copy()) / side
    perm = sequency_permutation(side)
    return np.ascontiguousarray(nat[np.ix_(perm, perm)])


def iwalsh2d(coeffs):
    """Inverse of walsh2d (equal to its adjoint)."""
    c = _as_array(coeffs)
    side = c.shape[0]
    if c.shape[0] != c.shape[1] or not _is_pow2(side):
        raise ValueError(f"iwalsh2d needs a square power-of-two side, got {c.shape}")
    perm = sequency_permutation(side)
    nat = np.empty_like(c)
    nat[np.ix_(perm, perm)] = c
    return _fwht2(nat) / side


# --- DCT -------------------------------------------------------------------

def _check_even(a, name):
    if a.shape[0] % 2 or a.shape[1] % 2:
        raise ValueError(f"{name} requires even side lengths, got {a.shape}")


def dct2d(img):
    a = _as_array(img)
    _check_even(a, "dct2d")
    return scipy.fft.dctn(a, norm="ortho")


def idct2d(coeffs):
    c = _as_array(coeffs)
    _check_even(c, "idct2d")
    return scipy.fft.idctn(c, norm="ortho")


# --- Daubechies-8 wavelets (periodic) --------------------------------------

_synth_cache = {}


def _analysis_step(a):
    """One periodic filter-bank split along the last axis: returns (lo, hi)."""
    length = a.shape[-1]
    k = np.arange(length // 2)
    idx = (2 * k[:, None] + np.arange(16)[None, :]) % length
    windows = a[..., idx]
    return windows @ DB8_LOWPASS, windows @ DB8_HIGHPASS


def _synthesis_arrays(length):
    """Index/weight tables for the adjoint of _analysis_step."""
    if length in _synth_cache:
        return _synth_cache[length]
    j = np.arange(length)[:, None]
    t = np.arange(8)[None, :]
    n = 2 * t + (j % 2)              # filter taps sharing j's parity
    k = ((j - n) % length) // 2      # which output sample they landed in
    wlo = DB8_LOWPASS[n]
    whi = DB8_HIGHPASS[n]
    _synth_cache[length] = (k, wlo, whi)
    return _synth_cache[length]


def _synthesis_step(lo, hi):
    """Adjoint (= inverse) of _analysis_step along the last axis."""
    length = 2 * lo.shape[-1]
    k, wlo, whi = _synthesis_arrays(length)
    return (lo[..., k] * wlo + hi[..., k] * whi).sum(axis=-1)


def dwt1d_db8(x):
    """Single-level periodic split of a 1D signal: (approx, detail)."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] % 2:
        raise ValueError("dwt1d_db8 needs an even-length 1D signal")
    return _analysis_step(x)


def _dwt2_level(a):
    lo, hi = _analysis_step(a)                    # columns split
    ll, lh = _analysis_step(lo.T)                 # rows split of lo
    hl, hh = _analysis_step(hi.T)
    h = a.shape[0] // 2
    out = np.empty_like(a)
    out[:h, :h] = ll.T
    out[:h, h:] = lh.T
    out[h:, :h] = hl.T
    out[h:, h:] = hh.T
    return out


def _idwt2_level(c):
    h = c.shape[0] // 2
    lo = _synthesis_step(c[:h, :h].T, c[:h, h:].T).T
    hi = _synthesis_step(c[h:, :h].T, c[h:, h:].T).T
    return _synthesis_step(lo, hi)


def _check_dwt(side, shape, levels):
    if shape[0] != shape[1]:
        raise ValueError(f"wavelet transform needs a square image, got {shape}")
    if levels < 1:
        raise ValueError(f"levels must be >= 1, got {levels}")
    if side % (1 << levels):
        raise ValueError(f"side {side} not divisible by 2^{levels}")


def dwt2d_db8(img, levels):
    """Orthonormal 2D periodic db8 decomposition, Mallat quadrant layout."""
    a = _as_array(img).copy()
    _check_dwt(a.shape[0], a.shape, levels)
    side = a.shape[0]
    for lev in range(levels):
        s = side >> lev
        a[:s, :s] = _dwt2_level(a[:s, :s])
    return a


def idwt2d_db8(coeffs, levels):
    c = _as_array(coeffs).copy()
    _check_dwt(c.shape[0], c.shape, levels)
    side = c.shape[0]
    for lev in reversed(range(levels)):
        s = side >> lev
        c[:s, :s] = _idwt2_level(c[:s, :s])
    return c


# --- total variation -------------------------------------------------------

def tv_value(img):
    """Isotropic TV with replicate boundary (no differences off the far edges)."""
    a = _as_array(img)
    dv = np.zeros_like(a)
    dh = np.zeros_like(a)
    dv[:-1, :] = a[1:, :] - a[:-1, :]
    dh[:, :-1] = a[:, 1:] - a[:, :-1]
    return float(np.sqrt(dv * dv + dh * dh).sum())


# --- dispatch spec ---------------------------------------------------------

@dataclass(frozen=True)
class TransformSpec:
    """Which sparsifying transform a solver should analyze with.

    levels is meaningful for DWT_DB8 only and must then satisfy the
    divisibility constraint against the image side.
    """

    kind: str
    levels: int = 1
    normalization: str = "orthonormal"

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError(f"unknown transform kind {self.kind!r}")
        if self.normalization != "orthonormal":
            raise ValueError("only orthonormal transforms are supported")
        if self.kind == KIND_DWT and self.levels < 1:
            raise ValueError("wavelet levels must be >= 1")

    def forward(self, img):
        if self.kind == KIND_WALSH:
            return walsh2d(img)
        if self.kind == KIND_DCT:
            return dct2d(img)
        return dwt2d_db8(img, self.levels)

    def inverse(self, coeffs):
        if self.kind == KIND_WALSH:
            return iwalsh2d(coeffs)
        if self.kind == KIND_DCT:
            return idct2d(coeffs)
        return idwt2d_db8(coeffs, self.levels)
