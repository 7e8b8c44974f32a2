import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourier_fbp import spectral
from fourier_fbp.filters import ram_lak
from fourier_fbp.spectral import (
    HalfSpectrum,
    NonHermitianError,
    dft2d_magnitude,
    fft,
    freq_grid,
    halfspectrum_to_rows,
    rows_to_halfspectrum,
)


def direct_dft(x):
    """O(n^2) oracle."""
    n = x.shape[-1]
    k = np.arange(n)
    return x @ np.exp(-2j * np.pi * np.outer(k, k) / n).T


@pytest.mark.parametrize("n", [1, 2, 4, 8, 32, 256, 3, 5, 12, 17, 100])
def test_fft_matches_direct_sum(n):
    rng = np.random.default_rng(n)
    x = rng.normal(size=(3, n)) + 1j * rng.normal(size=(3, n))
    np.testing.assert_allclose(fft(x), direct_dft(x), atol=1e-10 * n)
    np.testing.assert_allclose(fft(fft(x), inverse=True), x, atol=1e-12)


def test_fft_agrees_with_numpy_large():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(4, 1024))
    np.testing.assert_allclose(fft(x), np.fft.fft(x), atol=1e-9)
    np.testing.assert_allclose(spectral.rfft_half(x), np.fft.rfft(x), atol=1e-9)


def test_constant_row_dc_only():
    half = rows_to_halfspectrum(np.ones((1, 8)), 8)
    assert half.bins.shape == (1, 5)
    np.testing.assert_allclose(half.bins[0], [8, 0, 0, 0, 0], atol=1e-12)


def test_impulse_is_flat():
    x = np.zeros((1, 8))
    x[0, 0] = 1.0
    np.testing.assert_allclose(rows_to_halfspectrum(x, 16).bins, 1.0, atol=1e-12)


def test_padded_len_checks():
    with pytest.raises(ValueError):
        rows_to_halfspectrum(np.ones((2, 8)), 4)
    with pytest.raises(ValueError):
        rows_to_halfspectrum(np.ones((2, 8)), 12)


def test_halfspectrum_omega():
    assert np.allclose(HalfSpectrum(np.zeros((1, 5)), 8).omega, [0, 0.125, 0.25, 0.375, 0.5])


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.integers(0, 3), st.integers(0, 2**32 - 1))
def test_roundtrip_and_linearity(n, extra_pow, seed):
    rng = np.random.default_rng(seed)
    p = spectral.next_power_of_two(n) << extra_pow
    rows = rng.normal(size=(3, n))
    half = rows_to_halfspectrum(rows, p)
    back = halfspectrum_to_rows(half, n)
    np.testing.assert_allclose(back, rows, rtol=1e-5, atol=1e-9)
    np.testing.assert_allclose(halfspectrum_to_rows(half * 2.0, n), 2 * rows, rtol=1e-5, atol=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.integers(0, 2**32 - 1))
def test_real_filter_closure(log_p, seed):
    """Any real spectrum on the half grid keeps the inverse real."""
    rng = np.random.default_rng(seed)
    p = 1 << log_p
    rows = rng.normal(size=(2, p // 2))
    half = rows_to_halfspectrum(rows, p)
    out = halfspectrum_to_rows(half * rng.normal(size=p // 2 + 1), p // 2)
    assert np.all(np.isfinite(out))


def test_ramp_kills_constant_row():
    half = rows_to_halfspectrum(np.ones((2, 16)), 16)
    out = halfspectrum_to_rows(half * ram_lak(half.omega), 16)
    np.testing.assert_allclose(out, 0.0, atol=1e-12)


def test_non_hermitian_bins_detected():
    half = rows_to_halfspectrum(np.ones((1, 8)), 8)
    bad = HalfSpectrum(half.bins + 5j, 8)
    with pytest.raises(NonHermitianError):
        halfspectrum_to_rows(bad, 8)


# --- 2-D ---------------------------------------------------------------------


def test_constant_image_magnitude():
    mag = dft2d_magnitude(np.full((6, 6), 1.5))
    expected = np.zeros((6, 6))
    expected[3, 3] = 1.5 * 36
    np.testing.assert_allclose(mag, expected, atol=1e-9)


@pytest.mark.parametrize("shape", [(8, 8), (7, 9), (16, 12)])
def test_magnitude_translation_invariant(shape):
    rng = np.random.default_rng(1)
    img = rng.normal(size=shape)
    shifted = np.roll(img, (2, -3), axis=(0, 1))
    np.testing.assert_allclose(dft2d_magnitude(shifted), dft2d_magnitude(img), atol=1e-9)


@pytest.mark.parametrize("n", [8, 13, 32])
def test_parseval(n):
    rng = np.random.default_rng(n)
    img = rng.normal(size=(n, n))
    lhs = np.sum(dft2d_magnitude(img) ** 2)
    rhs = n * n * np.sum(img**2)
    assert abs(lhs - rhs) / rhs < 1e-4


def test_magnitude_matches_numpy_centered():
    rng = np.random.default_rng(5)
    img = rng.normal(size=(10, 7))
    ref = np.abs(np.fft.fftshift(np.fft.fft2(img)))
    np.testing.assert_allclose(dft2d_magnitude(img), ref, atol=1e-9)


def test_freq_grid_4x4():
    g = freq_grid(4, 4)
    np.testing.assert_allclose(g.fx[0], [-0.5, -0.25, 0.0, 0.25])
    np.testing.assert_allclose(g.fy[:, 0], [-0.5, -0.25, 0.0, 0.25])
    assert g.fx[2, 2] == 0 and g.fy[2, 2] == 0


@pytest.mark.parametrize("n", [5, 9])
def test_freq_grid_odd_symmetric(n):
    g = freq_grid(n, n)
    assert g.fx[n // 2, n // 2] == 0 and g.fy[n // 2, n // 2] == 0
    np.testing.assert_allclose(g.fx, -g.fx[::-1, ::-1])
    np.testing.assert_allclose(g.fy, -g.fy[::-1, ::-1])
