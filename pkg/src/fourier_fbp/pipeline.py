"""End-to-end FBP: filter rows in the Fourier domain, backproject, ReLU.

The filter spectrum is dimensionless (the ramp is ``2|omega|`` in cycles per
sample). Turning it into the physical ramp ``|nu|`` in cycles per unit length
divides by ``2 * detector_spacing``; :func:`reconstruct` applies that factor
so that a ramp-filtered reconstruction is on the same intensity scale as the
ground truth. :func:`filter_sinogram` itself applies the spectrum as given.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import spectral
from .filters import FilterError, FilterSpectrum, FourierSeriesFilter, analytic_filter, spectrum_of
from .geometry import Geometry
from .projector import back_project
from .raster import Image, Sinogram

FilterSource = Union[str, FourierSeriesFilter, FilterSpectrum]


def default_padded_len(num_detectors: int) -> int:
    return spectral.next_power_of_two(2 * num_detectors)


@dataclass(frozen=True)
class ReconstructionConfig:
    geometry: Geometry
    out_size: int
    filter: FilterSource = "ram_lak"
    padded_len: int = field(default=0)

    def __post_init__(self):
        if self.padded_len == 0:
            object.__setattr__(
                self, "padded_len", default_padded_len(self.geometry.num_detectors)
            )
        p = self.padded_len
        if not spectral.is_power_of_two(p) or p < 2 * self.geometry.num_detectors:
            raise ValueError(
                f"padded_len must be a power of two >= 2N = {2 * self.geometry.num_detectors}, got {p}"
            )
        if self.out_size < 1:
            raise ValueError(f"out_size must be positive, got {self.out_size}")

    def spectrum(self) -> FilterSpectrum:
        return spectrum_of(self.filter, self.padded_len)

    def with_filter(self, source: FilterSource) -> "ReconstructionConfig":
        return ReconstructionConfig(self.geometry, self.out_size, source, self.padded_len)

    @property
    def intensity_scale(self) -> float:
        return 1.0 / (2.0 * self.geometry.detector_spacing)


def filter_sinogram(sinogram, spectrum: FilterSpectrum) -> np.ndarray:
    """``P_f = F^-1{ F{P} * H }`` row by row, with zero padding to ``spectrum.padded_len``."""
    sino = np.asarray(sinogram, dtype=np.float64)
    n = sino.shape[-1]
    if spectrum.padded_len < n:
        raise ValueError(
            f"spectrum padded_len {spectrum.padded_len} is shorter than the {n} detectors"
        )
    half = spectral.rows_to_halfspectrum(sino, spectrum.padded_len)
    return spectral.halfspectrum_to_rows(half * spectrum.values, n)


def _sinogram_array(sinogram, geometry: Geometry) -> np.ndarray:
    if isinstance(sinogram, Sinogram) and sinogram.geometry != geometry:
        raise ValueError("sinogram geometry does not match the reconstruction config")
    return np.asarray(sinogram, dtype=np.float64)


def reconstruct_linear(sinogram, config: ReconstructionConfig) -> np.ndarray:
    """Reconstruction before the ReLU; linear in the sinogram and in the spectrum."""
    sino = _sinogram_array(sinogram, config.geometry)
    filtered = filter_sinogram(sino, config.spectrum())
    return config.intensity_scale * back_project(filtered, config.geometry, config.out_size)


def reconstruct_array(sinogram, config: ReconstructionConfig) -> np.ndarray:
    return np.maximum(reconstruct_linear(sinogram, config), 0.0)


def reconstruct(sinogram, config: ReconstructionConfig) -> Image:
    """``ReLU(backproject(filter_sinogram(P, H)))``."""
    return Image(reconstruct_array(sinogram, config))


def fbp_baseline(sinogram, config: ReconstructionConfig, filter_name: str) -> Image:
    analytic_filter(filter_name)
    return reconstruct(sinogram, config.with_filter(filter_name))


def load_filter_source(spec: str) -> FilterSource:
    """An analytic filter name, or a path to a coefficient CSV."""
    from .filters import ANALYTIC_FILTERS, read_filter_csv

    if spec in ANALYTIC_FILTERS:
        return spec
    if spec.endswith(".csv"):
        return read_filter_csv(spec)
    raise FilterError(
        f"unknown filter {spec!r}; use one of {', '.join(sorted(ANALYTIC_FILTERS))} or a .csv file"
    )
