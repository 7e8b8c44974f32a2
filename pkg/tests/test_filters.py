import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourier_fbp.filters import (
    INIT_GRID_LEN,
    NUM_COEFFICIENTS,
    FilterError,
    FilterSpectrum,
    FourierSeriesFilter,
    analytic_filter,
    evaluate_series,
    even_extension,
    fit_series_to_spectrum,
    fit_spectrum,
    full_grid,
    hann_filter,
    initial_filter,
    ram_lak,
    read_filter_csv,
    series_basis,
    shepp_logan_filter,
    spectrum_of,
    write_filter_csv,
    write_spectrum_csv,
)
from fourier_fbp.spectral import half_grid


def unit(index):
    v = np.zeros(NUM_COEFFICIENTS)
    v[index] = 1.0
    return FourierSeriesFilter.from_vector(v)


def test_parameter_count():
    f = initial_filter("ram_lak")
    assert f.coefficients.size == 101 == NUM_COEFFICIENTS
    assert f.a.size == f.b.size == 50


def test_dc_only():
    w = half_grid(64)
    np.testing.assert_allclose(evaluate_series(unit(0), w), 1.0)


def test_single_cosine():
    out = evaluate_series(unit(1), np.array([0.0, 0.25]))
    np.testing.assert_allclose(out, [1.0, 0.0], atol=1e-15)


def test_single_sine_vanishes_at_zero():
    assert evaluate_series(unit(51), np.array([0.0]))[0] == 0.0


def test_wrong_sizes_rejected():
    with pytest.raises(FilterError):
        FourierSeriesFilter(0.0, np.zeros(49), np.zeros(50))
    with pytest.raises(FilterError):
        FourierSeriesFilter.from_vector(np.full(101, np.inf))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_series_linear_in_coefficients(seed):
    rng = np.random.default_rng(seed)
    c1, c2 = rng.normal(size=(2, NUM_COEFFICIENTS))
    w = half_grid(128)
    f = FourierSeriesFilter.from_vector
    np.testing.assert_allclose(
        evaluate_series(f(c1 + c2), w), evaluate_series(f(c1), w) + evaluate_series(f(c2), w), atol=1e-10
    )


def test_same_filter_on_any_grid():
    f = initial_filter("random", seed=3)
    small = evaluate_series(f, half_grid(64))
    big = evaluate_series(f, half_grid(1024))
    assert small.shape == (33,) and big.shape == (513,)
    np.testing.assert_allclose(small, big[::16], atol=1e-12)


# --- analytic filters ------------------------------------------------------------


def test_ram_lak_values():
    w = half_grid(256)
    r = ram_lak(w)
    assert r[0] == 0 and r[-1] == 1
    assert np.all(np.diff(r) >= 0)


def test_hann_values():
    w = half_grid(256)
    h = hann_filter(w)
    assert h[0] == 0 and abs(h[-1]) < 1e-15
    k = int(np.argmax(h))
    assert 0 < k < w.size - 1
    # continuous maximum of 2w(1+cos 2 pi w)/2 sits near w = 0.2104
    assert abs(w[k] - 0.2104) < 1 / 256


def test_shepp_logan_values():
    w = half_grid(256)
    s = shepp_logan_filter(w)
    assert s[0] == 0
    assert s[-1] == pytest.approx(2 / math.pi)
    assert np.all(s <= ram_lak(w) + 1e-15)


def test_unknown_filter_lists_names():
    with pytest.raises(FilterError, match="hann, ram_lak, shepp_logan"):
        analytic_filter("cosine")


# --- fitting -------------------------------------------------------------------


def test_fit_constant():
    f = fit_spectrum(FilterSpectrum(np.ones(513), 1024))
    assert f.a0 == pytest.approx(1.0, abs=1e-6)
    assert np.abs(f.a).max() < 1e-6 and np.abs(f.b).max() < 1e-6


@pytest.mark.parametrize("seed", range(5))
def test_fit_recovers_coefficients(seed):
    rng = np.random.default_rng(seed)
    truth = rng.normal(size=NUM_COEFFICIENTS)
    w = full_grid(1024)
    target = evaluate_series(FourierSeriesFilter.from_vector(truth), w)
    fit = fit_series_to_spectrum(w, target)
    np.testing.assert_allclose(fit.coefficients, truth, atol=1e-5)


def test_even_target_has_no_sine_part():
    f = fit_spectrum(FilterSpectrum(hann_filter(half_grid(512)), 512))
    assert np.abs(f.b).max() < 1e-12


def test_half_interval_is_not_identifiable():
    # the reason fits run over the full period
    s = np.linalg.svd(series_basis(half_grid(1024)), compute_uv=False)
    assert int(np.sum(s > 1e-6 * s[0])) < NUM_COEFFICIENTS
    s = np.linalg.svd(series_basis(full_grid(1024)), compute_uv=False)
    assert int(np.sum(s > 1e-6 * s[0])) == NUM_COEFFICIENTS


def test_even_extension():
    np.testing.assert_array_equal(even_extension([0, 1, 2, 3, 4]), [0, 1, 2, 3, 4, 3, 2, 1])


# frozen from one oracle run: measured 3.8e-4 of the spectrum max
RAMP_FIT_RMS_BOUND = 1e-2


def test_ramp_fit_residual():
    w = half_grid(INIT_GRID_LEN)
    fit = fit_spectrum(FilterSpectrum(ram_lak(w), INIT_GRID_LEN))
    rms = np.sqrt(np.mean((evaluate_series(fit, w) - ram_lak(w)) ** 2))
    assert rms < RAMP_FIT_RMS_BOUND * ram_lak(w).max()
    assert fit == initial_filter("ram_lak")
    # triangle-wave cosine series: a0 = 1/2, a1 = -4/pi^2
    assert fit.a0 == pytest.approx(0.5, abs=1e-9)
    assert fit.a[0] == pytest.approx(-4 / math.pi**2, rel=1e-3)


def test_fit_needs_enough_points():
    w = half_grid(256)  # 129 points
    with pytest.raises(FilterError):
        fit_series_to_spectrum(w, ram_lak(w))


def test_init_modes():
    assert initial_filter("zero") == FourierSeriesFilter.zeros()
    assert initial_filter("random", 1) == initial_filter("random", 1)
    assert initial_filter("random", 1) != initial_filter("random", 2)
    with pytest.raises(FilterError):
        initial_filter("ones")


def test_spectrum_of_sources():
    s = spectrum_of("hann", 32)
    assert s.values.shape == (17,)
    assert spectrum_of(s, 32) is s
    with pytest.raises(FilterError):
        spectrum_of(s, 64)
    with pytest.raises(FilterError):
        FilterSpectrum(np.zeros(10), 32)


# --- CSV -------------------------------------------------------------------------


def test_filter_csv_roundtrip(tmp_path):
    f = initial_filter("random", seed=9)
    path = tmp_path / "f.csv"
    write_filter_csv(path, f)
    lines = path.read_text().splitlines()
    assert lines[0] == "l,a,b" and lines[1].startswith("0,") and lines[1].endswith(",0.0")
    assert len(lines) == 52
    assert read_filter_csv(path) == f


def test_filter_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("l,a,b\n0,1.0,0\n")
    with pytest.raises(FilterError, match="l = 0..50"):
        read_filter_csv(path)
    path.write_text("x,y\n")
    with pytest.raises(FilterError, match="header"):
        read_filter_csv(path)
    with pytest.raises(FilterError, match="missing.csv"):
        read_filter_csv(tmp_path / "missing.csv")


def test_spectrum_csv(tmp_path):
    w = half_grid(8)
    path = tmp_path / "s.csv"
    write_spectrum_csv(path, w, ram_lak(w))
    rows = path.read_text().splitlines()
    assert rows[0] == "omega,value" and rows[-1] == "0.5,1.0"
