"""Discrete Fourier transforms along the detector axis and in 2-D.

Convention: the forward transform is unnormalized,
``X[k] = sum_n x[n] exp(-2j*pi*k*n/P)``, and the inverse divides by ``P``.

Power-of-two lengths use an iterative radix-2 decimation-in-time FFT that is
vectorized over all leading axes. Other lengths (only needed by the 2-D
magnitude spectrum, which must not be padded) go through Bluestein's chirp-z
identity on a power-of-two grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

IMAG_RESIDUE_TOL = 1e-4


class NonHermitianError(ArithmeticError):
    """Inverse of a half-spectrum produced a significant imaginary part."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def next_power_of_two(n: int) -> int:
    return 1 << max(0, int(n - 1).bit_length())


@lru_cache(maxsize=32)
def _bit_reversal(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=32)
def _twiddles(n: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(n // 2) / n)


def _fft_radix2(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    lead = x.shape[:-1]
    y = np.asarray(x, dtype=np.complex128)[..., _bit_reversal(n)]
    tw = _twiddles(n)
    m = 2
    while m <= n:
        half = m // 2
        y = y.reshape(*lead, n // m, m)
        w = tw[:: n // m]
        top = y[..., :half]
        bot = y[..., half:] * w
        y = np.concatenate([top + bot, top - bot], axis=-1)
        m *= 2
    return y.reshape(*lead, n)


@lru_cache(maxsize=16)
def _bluestein_plan(n: int):
    k = np.arange(n)
    chirp = np.exp(-1j * np.pi * (k * k % (2 * n)) / n)
    m = next_power_of_two(2 * n - 1)
    b = np.zeros(m, dtype=np.complex128)
    b[:n] = np.conj(chirp)
    b[m - n + 1 :] = np.conj(chirp[1:])[::-1]
    return chirp, m, _fft_radix2(b)


def _fft_bluestein(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    chirp, m, fb = _bluestein_plan(n)
    a = np.zeros(x.shape[:-1] + (m,), dtype=np.complex128)
    a[..., :n] = x * chirp
    conv = _ifft_pow2(_fft_radix2(a) * fb)
    return conv[..., :n] * chirp


def _ifft_pow2(x: np.ndarray) -> np.ndarray:
    n = x.shape[-1]
    return np.conj(_fft_radix2(np.conj(x))) / n


def fft(x, inverse: bool = False) -> np.ndarray:
    """Complex DFT along the last axis, any length >= 1."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[-1]
    if inverse:
        return np.conj(fft(np.conj(x))) / n
    if is_power_of_two(n):
        return _fft_radix2(x)
    return _fft_bluestein(x)


@lru_cache(maxsize=32)
def _real_split_twiddles(p: int) -> np.ndarray:
    return np.exp(-2j * np.pi * np.arange(p // 2 + 1) / p)


def rfft_half(x: np.ndarray) -> np.ndarray:
    """Half spectrum (bins 0..P/2) of real rows of power-of-two length P >= 2.

    Packs even/odd samples into one complex sequence of length P/2 and
    separates the two spectra afterwards.
    """
    x = np.asarray(x, dtype=np.float64)
    p = x.shape[-1]
    if p == 1:
        return x.astype(np.complex128)
    h = p // 2
    z = _fft_radix2(x[..., 0::2] + 1j * x[..., 1::2])
    z_ext = np.concatenate([z, z[..., :1]], axis=-1)  # Z[h] = Z[0]
    z_rev = np.conj(z_ext[..., ::-1])  # conj(Z[h - k])
    even = 0.5 * (z_ext + z_rev)
    odd = -0.5j * (z_ext - z_rev)
    return even + _real_split_twiddles(p) * odd


def hermitian_extend(half: np.ndarray, p: int) -> np.ndarray:
    """Full length-P spectrum implied by bins 0..P/2 of a real signal."""
    tail = np.conj(half[..., 1 : p - p // 2][..., ::-1])
    return np.concatenate([half, tail], axis=-1)


@dataclass(frozen=True)
class HalfSpectrum:
    """Bins ``0..P/2`` of the DFT of zero-padded real rows.

    ``bins`` has shape ``(rows, P/2 + 1)``; bin ``k`` sits at normalized
    frequency ``k / P`` cycles/sample.
    """

    bins: np.ndarray
    padded_len: int

    @property
    def omega(self) -> np.ndarray:
        return half_grid(self.padded_len)

    def __mul__(self, spectrum) -> "HalfSpectrum":
        return HalfSpectrum(self.bins * np.asarray(spectrum), self.padded_len)

    __rmul__ = __mul__


def half_grid(padded_len: int) -> np.ndarray:
    """Normalized frequencies ``k / P`` for ``k = 0..P/2``."""
    return np.arange(padded_len // 2 + 1) / padded_len


def rows_to_halfspectrum(rows, padded_len: int) -> HalfSpectrum:
    """Zero-pad every row to ``padded_len`` and transform it."""
    rows = np.atleast_2d(np.asarray(rows, dtype=np.float64))
    n = rows.shape[-1]
    if not is_power_of_two(padded_len):
        raise ValueError(f"padded_len must be a power of two, got {padded_len}")
    if padded_len < n:
        raise ValueError(f"padded_len {padded_len} is shorter than the rows ({n})")
    padded = np.zeros(rows.shape[:-1] + (padded_len,))
    padded[..., :n] = rows
    return HalfSpectrum(rfft_half(padded), padded_len)


def halfspectrum_to_rows(spectra: HalfSpectrum, original_len: int) -> np.ndarray:
    """Inverse transform each half-spectrum and keep the first ``original_len`` samples.

    Raises :class:`NonHermitianError` when the inverse has an imaginary part
    above ``1e-4 * max|Re|``; that only happens if the bins at 0 or P/2
    carry an imaginary component, i.e. the filter was not real.
    """
    p = spectra.padded_len
    full = hermitian_extend(spectra.bins, p)
    rows = fft(full, inverse=True)
    re, im = rows.real, rows.imag
    scale = np.max(np.abs(re)) if re.size else 0.0
    worst = np.max(np.abs(im)) if im.size else 0.0
    # absolute floor so a (numerically) all-zero output does not trip the relative test
    floor = 1e-12 * max(1.0, np.max(np.abs(spectra.bins)) if spectra.bins.size else 0.0)
    if worst > IMAG_RESIDUE_TOL * scale + floor:
        raise NonHermitianError(
            f"imaginary residue {worst:.3g} exceeds {IMAG_RESIDUE_TOL:g} x max|Re| ({scale:.3g})"
        )
    return np.ascontiguousarray(re[..., :original_len])


def fft2(image) -> np.ndarray:
    """Unnormalized, uncentered 2-D DFT."""
    a = np.asarray(image, dtype=np.float64)
    return fft(fft(a).swapaxes(-1, -2)).swapaxes(-1, -2)


def ifft2(spec) -> np.ndarray:
    a = np.asarray(spec, dtype=np.complex128)
    return fft(fft(a, inverse=True).swapaxes(-1, -2), inverse=True).swapaxes(-1, -2)


def center_shift(a: np.ndarray) -> np.ndarray:
    """Move the zero-frequency bin to index ``(h//2, w//2)``."""
    h, w = a.shape[-2:]
    return np.roll(a, (h // 2, w // 2), axis=(-2, -1))


def uncenter_shift(a: np.ndarray) -> np.ndarray:
    h, w = a.shape[-2:]
    return np.roll(a, (-(h // 2), -(w // 2)), axis=(-2, -1))


def dft2d_magnitude(image) -> np.ndarray:
    """Centered magnitude of the 2-D DFT, no padding."""
    a = np.asarray(image, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise ValueError("image contains NaN or Inf")
    return np.abs(center_shift(fft2(a)))


def centered_frequencies(n: int) -> np.ndarray:
    """``(k - n//2) / n`` for ``k = 0..n-1``: the centered DFT frequency axis."""
    return (np.arange(n) - n // 2) / n


@dataclass(frozen=True)
class FreqGrid2D:
    fx: np.ndarray
    fy: np.ndarray

    @property
    def radius(self) -> np.ndarray:
        return np.hypot(self.fx, self.fy)


def freq_grid(height: int, width: int) -> FreqGrid2D:
    if height < 1 or width < 1:
        raise ValueError(f"grid dims must be >= 1, got {height}x{width}")
    fy, fx = np.meshgrid(
        centered_frequencies(height), centered_frequencies(width), indexing="ij"
    )
    return FreqGrid2D(fx=fx, fy=fy)
