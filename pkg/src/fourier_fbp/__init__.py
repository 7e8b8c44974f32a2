"""Filtered backprojection with a learnable Fourier-series filter.

The typical workflow is::

    fourier-fbp gen-data --out data
    fourier-fbp train --data data
    fourier-fbp eval --data data --filter data/train/filter.csv --filter hann
"""

from .filters import FourierSeriesFilter, initial_filter, read_filter_csv, write_filter_csv
from .geometry import Geometry
from .metrics import mse, psnr, ssim
from .phantom import shepp_logan
from .pipeline import ReconstructionConfig, reconstruct
from .projector import back_project, forward_project, project

__version__ = "0.1.0"

__all__ = [
    "FourierSeriesFilter",
    "Geometry",
    "ReconstructionConfig",
    "back_project",
    "forward_project",
    "initial_filter",
    "mse",
    "project",
    "psnr",
    "read_filter_csv",
    "reconstruct",
    "shepp_logan",
    "ssim",
    "write_filter_csv",
]
