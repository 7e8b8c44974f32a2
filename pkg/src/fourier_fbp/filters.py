"""Analytic FBP filters and the trainable Fourier-series filter.

Every filter is a real function of the normalized frequency
``omega in [0, 1/2]`` (cycles per detector sample) and is sampled on the
half-spectrum grid ``omega_k = k / P``. Because the filter is applied to a
half spectrum, the implied full spectrum is Hermitian by construction.

The trainable filter is

    k(omega) = a0 + sum_{l=1}^{L} a_l cos(2 pi l omega) + b_l sin(2 pi l omega)

with L = 50, i.e. 101 coefficients regardless of detector count.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .spectral import half_grid, is_power_of_two

NUM_HARMONICS = 50
NUM_COEFFICIENTS = 2 * NUM_HARMONICS + 1
FIT_RIDGE = 1e-8


class FilterError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class FourierSeriesFilter:
    a0: float
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = np.array(self.a, dtype=np.float64).reshape(-1)
        b = np.array(self.b, dtype=np.float64).reshape(-1)
        if a.size != NUM_HARMONICS or b.size != NUM_HARMONICS:
            raise FilterError(
                f"expected {NUM_HARMONICS} cosine and sine coefficients, got {a.size} and {b.size}"
            )
        vec = np.concatenate([[self.a0], a, b])
        if not np.all(np.isfinite(vec)):
            raise FilterError("filter coefficients must be finite")
        a.setflags(write=False)
        b.setflags(write=False)
        object.__setattr__(self, "a0", float(self.a0))
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def coefficients(self) -> np.ndarray:
        """Flat vector ``[a0, a1..a50, b1..b50]``."""
        return np.concatenate([[self.a0], self.a, self.b])

    @classmethod
    def from_vector(cls, vec) -> "FourierSeriesFilter":
        vec = np.asarray(vec, dtype=np.float64).reshape(-1)
        if vec.size != NUM_COEFFICIENTS:
            raise FilterError(f"expected {NUM_COEFFICIENTS} coefficients, got {vec.size}")
        return cls(vec[0], vec[1 : NUM_HARMONICS + 1], vec[NUM_HARMONICS + 1 :])

    @classmethod
    def zeros(cls) -> "FourierSeriesFilter":
        return cls.from_vector(np.zeros(NUM_COEFFICIENTS))

    def __eq__(self, other):
        return isinstance(other, FourierSeriesFilter) and np.array_equal(
            self.coefficients, other.coefficients
        )

    def __call__(self, omega) -> np.ndarray:
        return evaluate_series(self, omega)


@dataclass(frozen=True)
class FilterSpectrum:
    """Real filter values on the half-spectrum grid of a padded length."""

    values: np.ndarray
    padded_len: int

    def __post_init__(self):
        if not is_power_of_two(self.padded_len):
            raise FilterError(f"padded_len must be a power of two, got {self.padded_len}")
        v = np.asarray(self.values, dtype=np.float64)
        if v.shape != (self.padded_len // 2 + 1,):
            raise FilterError(
                f"spectrum must have {self.padded_len // 2 + 1} values, got shape {v.shape}"
            )
        object.__setattr__(self, "values", v)

    @property
    def omega(self) -> np.ndarray:
        return half_grid(self.padded_len)


def series_basis(omega) -> np.ndarray:
    """Design matrix with columns ``[1, cos(2 pi l w)..., sin(2 pi l w)...]``."""
    w = np.asarray(omega, dtype=np.float64).reshape(-1)
    arg = 2 * np.pi * np.outer(w, np.arange(1, NUM_HARMONICS + 1))
    return np.hstack([np.ones((w.size, 1)), np.cos(arg), np.sin(arg)])


def evaluate_series(filt: FourierSeriesFilter, omega) -> np.ndarray:
    omega = np.asarray(omega, dtype=np.float64)
    return (series_basis(omega) @ filt.coefficients).reshape(omega.shape)


def ram_lak(omega) -> np.ndarray:
    """Ramp ``2|omega|``: 0 at DC, 1 at Nyquist."""
    return 2.0 * np.abs(np.asarray(omega, dtype=np.float64))


def hann_filter(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=np.float64)
    return ram_lak(w) * (0.5 + 0.5 * np.cos(2 * np.pi * w))


def shepp_logan_filter(omega) -> np.ndarray:
    w = np.asarray(omega, dtype=np.float64)
    return ram_lak(w) * np.sinc(w)


ANALYTIC_FILTERS = {
    "ram_lak": ram_lak,
    "hann": hann_filter,
    "shepp_logan": shepp_logan_filter,
}


def analytic_filter(name: str):
    try:
        return ANALYTIC_FILTERS[name]
    except KeyError:
        valid = ", ".join(sorted(ANALYTIC_FILTERS))
        raise FilterError(f"unknown filter {name!r}; valid names: {valid}") from None


def fit_series_to_spectrum(omega, target) -> FourierSeriesFilter:
    """Ridge-regularized least-squares fit of the 101 coefficients to ``target``.

    Solves ``(B^T B + 1e-8 I) c = B^T y`` on whatever grid ``omega`` is given.
    On a sub-interval of the period the cosine and sine families overlap and
    the ridge term picks the small-norm solution; see :func:`fit_spectrum`.
    """
    omega = np.asarray(omega, dtype=np.float64).reshape(-1)
    target = np.asarray(target, dtype=np.float64).reshape(-1)
    if omega.shape != target.shape:
        raise FilterError("omega and target must have the same length")
    if omega.size < 2 * NUM_COEFFICIENTS:
        raise FilterError(
            f"need at least {2 * NUM_COEFFICIENTS} grid points, got {omega.size}"
        )
    basis = series_basis(omega)
    gram = basis.T @ basis + FIT_RIDGE * np.eye(NUM_COEFFICIENTS)
    try:
        chol = np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        raise FilterError("normal equations are rank deficient even with ridge") from None
    rhs = basis.T @ target
    coef = np.linalg.solve(chol.T, np.linalg.solve(chol, rhs))
    if not np.all(np.isfinite(coef)):
        raise FilterError("least-squares fit produced non-finite coefficients")
    return FourierSeriesFilter.from_vector(coef)


def full_grid(padded_len: int) -> np.ndarray:
    """All ``P`` DFT frequencies ``k / P`` on one period ``[0, 1)``."""
    return np.arange(padded_len) / padded_len


def even_extension(values) -> np.ndarray:
    """Full-period filter implied by half-spectrum values: ``H[P - k] = H[k]``."""
    v = np.asarray(values, dtype=np.float64)
    return np.concatenate([v, v[-2:0:-1]])


def fit_spectrum(spectrum: FilterSpectrum) -> FourierSeriesFilter:
    """Fit the series to the full-period filter a half spectrum stands for.

    On a whole period the 101 basis columns are orthogonal, so the fit is
    unique: constants and series-generated targets are recovered exactly, and
    an even target yields ``b = 0``. Fitting only the half grid ``[0, 1/2]``
    would leave about 30 coefficient directions undetermined.
    """
    p = spectrum.padded_len
    return fit_series_to_spectrum(full_grid(p), even_extension(spectrum.values))


INIT_GRID_LEN = 1024


def initial_filter(mode: str = "ram_lak", seed: int = 0) -> FourierSeriesFilter:
    """Starting point for training: ``ram_lak`` (fit to the ramp), ``zero`` or ``random``."""
    if mode == "ram_lak":
        w = half_grid(INIT_GRID_LEN)
        return fit_spectrum(FilterSpectrum(ram_lak(w), INIT_GRID_LEN))
    if mode == "zero":
        return FourierSeriesFilter.zeros()
    if mode == "random":
        rng = np.random.Generator(np.random.PCG64(seed))
        return FourierSeriesFilter.from_vector(0.01 * rng.standard_normal(NUM_COEFFICIENTS))
    raise FilterError(f"unknown init mode {mode!r}; valid: ram_lak, random, zero")


def spectrum_of(source, padded_len: int) -> FilterSpectrum:
    """Sample a filter source (analytic name, series filter or spectrum) on a grid."""
    if isinstance(source, FilterSpectrum):
        if source.padded_len != padded_len:
            raise FilterError(
                f"spectrum has padded_len {source.padded_len}, expected {padded_len}"
            )
        return source
    w = half_grid(padded_len)
    if isinstance(source, FourierSeriesFilter):
        return FilterSpectrum(evaluate_series(source, w), padded_len)
    if isinstance(source, str):
        return FilterSpectrum(analytic_filter(source)(w), padded_len)
    raise FilterError(f"cannot build a spectrum from {type(source).__name__}")


def write_filter_csv(path, filt: FourierSeriesFilter) -> None:
    """Write the ``l,a,b`` coefficient table (row 0 is ``0,a0,0``)."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["l", "a", "b"])
        w.writerow([0, repr(filt.a0), repr(0.0)])
        for l, (a, b) in enumerate(zip(filt.a, filt.b), start=1):
            w.writerow([l, repr(float(a)), repr(float(b))])


def read_filter_csv(path) -> FourierSeriesFilter:
    path = Path(path)
    try:
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
    except OSError as e:
        raise FilterError(f"cannot read filter {path}: {e}") from e
    if not rows or [c.strip() for c in rows[0]] != ["l", "a", "b"]:
        raise FilterError(f"{path}: expected header 'l,a,b'")
    a0 = None
    a = np.full(NUM_HARMONICS, np.nan)
    b = np.full(NUM_HARMONICS, np.nan)
    for lineno, row in enumerate(rows[1:], start=2):
        if not row:
            continue
        try:
            l, av, bv = int(row[0]), float(row[1]), float(row[2])
        except (ValueError, IndexError):
            raise FilterError(f"{path}:{lineno}: malformed row {row!r}") from None
        if l == 0:
            a0 = av
        elif 1 <= l <= NUM_HARMONICS:
            a[l - 1], b[l - 1] = av, bv
        else:
            raise FilterError(f"{path}:{lineno}: harmonic index {l} out of range")
    if a0 is None or np.isnan(a).any() or np.isnan(b).any():
        raise FilterError(f"{path}: expected rows for l = 0..{NUM_HARMONICS}")
    return FourierSeriesFilter(a0, a, b)


def write_spectrum_csv(path, omega, values) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["omega", "value"])
        for om, v in zip(np.asarray(omega), np.asarray(values)):
            w.writerow([repr(float(om)), repr(float(v))])
