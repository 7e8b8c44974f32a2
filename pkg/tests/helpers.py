"""Shared fixtures for gradient checks and small training runs."""

import math

import numpy as np

from fourier_fbp import losses, optim, spectral
from fourier_fbp.filters import FourierSeriesFilter, initial_filter
from fourier_fbp.geometry import Geometry
from fourier_fbp.phantom import random_ellipse_phantom
from fourier_fbp.pipeline import ReconstructionConfig, reconstruct_linear
from fourier_fbp.projector import apply_noise, forward_project

GRAD_SIZE = 16
GRAD_ANGLES = 24
FD_STEP = 1e-3


def grad_geometry() -> Geometry:
    # detector wide enough to cover the whole square, so no pixel is cut off
    n_det = 24
    return Geometry(GRAD_ANGLES, 0.0, math.pi / GRAD_ANGLES, n_det, 2 * math.sqrt(2) / (n_det - 1))


def grad_instance(seed: int):
    """A small problem whose loss is smooth within +-FD_STEP of ``coef``.

    The object sits on a positive pedestal and the filter stays near the ramp,
    so the reconstruction is positive everywhere (no ReLU kink) and the
    target is a rescaled copy, so no GEE bin difference is near zero.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    g = grad_geometry()
    obj = 1.0 + np.asarray(random_ellipse_phantom(GRAD_SIZE, 4, int(rng.integers(2**31))), dtype=np.float64)
    sino = apply_noise(forward_project(obj, g), 1e5, int(rng.integers(2**31)))
    gt = rng.uniform(3.0, 4.0) * obj
    coef = initial_filter("ram_lak").coefficients + 1e-3 * rng.standard_normal(coef_len())
    cfg = ReconstructionConfig(g, GRAD_SIZE)
    sample = optim.Sample(sino, gt, g, cfg.padded_len)
    return coef, sample, cfg


def coef_len() -> int:
    return 101


def kink_signature(coef, sample, cfg, settings: optim.LossSettings):
    z = reconstruct_linear(
        spectral.halfspectrum_to_rows(spectral.HalfSpectrum(sample.spectrum, sample.padded_len), cfg.geometry.num_detectors),
        cfg.with_filter(FourierSeriesFilter.from_vector(coef)),
    )
    w = losses.gaussian_highpass_weights(*z.shape, settings.gee)
    diff = w * (spectral.dft2d_magnitude(np.maximum(z, 0)) - spectral.dft2d_magnitude(sample.gt))
    return np.concatenate([(z > 0).ravel(), np.sign(diff).ravel()])


def gradient_check(seed: int, h: float = FD_STEP):
    """Return ``(normwise relative error, kink free?)`` for one instance."""
    coef, sample, cfg = grad_instance(seed)
    settings = optim.LossSettings()
    _, analytic, _ = optim.loss_and_gradient(FourierSeriesFilter.from_vector(coef), [sample], settings)
    ref = kink_signature(coef, sample, cfg, settings)
    fd = np.empty_like(coef)
    kink_free = True
    for i in range(coef.size):
        e = np.zeros_like(coef)
        e[i] = h
        for sgn in (1, -1):
            if not np.array_equal(kink_signature(coef + sgn * e, sample, cfg, settings), ref):
                kink_free = False
        fd[i] = (optim.loss_value(coef + e, [sample], settings) - optim.loss_value(coef - e, [sample], settings)) / (2 * h)
    err = float(np.abs(analytic - fd).max() / np.abs(fd).max())
    return err, kink_free
