"""Parallel-beam forward projection, backprojection, and Poisson noise.

The forward projector is ray driven: every ray is sampled at a fixed step
with bilinear interpolation. The backprojector is pixel driven with linear
interpolation along the detector. The two are adjoint only up to
discretization, and up to the geometric factor

    <A x, y> ~= (pixel_area / detector_spacing) / angle_step * <x, B y>

where ``A`` is :func:`forward_project` and ``B`` is :func:`back_project`.
:func:`back_project_adjoint` is the exact transpose of ``B`` and is what the
gradient code uses.
"""

from __future__ import annotations

import math

import numpy as np

from .geometry import Geometry, GeometryError, pixel_centers
from .raster import Image, Sinogram

# Work arrays are chunked over angles to keep peak memory near this many elements.
_CHUNK_ELEMENTS = 1 << 21

DEFAULT_RAY_STEP = 0.5  # in pixels


def _chunks(num_angles: int, per_angle: int):
    step = max(1, _CHUNK_ELEMENTS // max(per_angle, 1))
    for lo in range(0, num_angles, step):
        yield lo, min(num_angles, lo + step)


def _check_image(image) -> np.ndarray:
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or img.shape[0] != img.shape[1]:
        raise ValueError(f"image must be square, got shape {img.shape}")
    return img


def forward_project(image, geometry: Geometry, ray_step: float = DEFAULT_RAY_STEP) -> np.ndarray:
    """Line integrals of ``image`` for every (angle, detector) pair.

    ``ray_step`` is the sampling step along each ray in pixels. Returns an
    ``(num_angles, num_detectors)`` float64 array; wrap it in a
    :class:`Sinogram` with :func:`project` when a typed value is needed.
    """
    img = _check_image(image)
    if not ray_step > 0:
        raise GeometryError(f"ray_step must be positive, got {ray_step}")
    n = img.shape[0]
    pw = 2.0 / n
    dt = ray_step * pw
    # rays must cross the whole square, whose half-diagonal is sqrt(2)
    half_len = math.sqrt(2.0) + pw
    k = int(math.ceil(2 * half_len / dt)) + 1
    t = (np.arange(k) - (k - 1) / 2.0) * dt

    padded = np.zeros((n + 2, n + 2))
    padded[1:-1, 1:-1] = img
    flat = padded.ravel()
    stride = n + 2

    s = geometry.detector_positions
    theta = geometry.angles
    out = np.empty((geometry.num_angles, geometry.num_detectors))
    for lo, hi in _chunks(geometry.num_angles, s.size * k):
        c = np.cos(theta[lo:hi])[:, None, None]
        sn = np.sin(theta[lo:hi])[:, None, None]
        x = s[None, :, None] * c - t[None, None, :] * sn
        y = s[None, :, None] * sn + t[None, None, :] * c
        # continuous index in the zero-padded image
        col = (x + 1.0) / pw + 0.5
        row = (1.0 - y) / pw + 0.5
        c0 = np.floor(col)
        r0 = np.floor(row)
        fc = col - c0
        fr = row - r0
        inside = (c0 >= 0) & (c0 <= n) & (r0 >= 0) & (r0 <= n)
        c0 = np.where(inside, c0, 0).astype(np.intp)
        r0 = np.where(inside, r0, 0).astype(np.intp)
        base = r0 * stride + c0
        val = (
            (1 - fr) * ((1 - fc) * flat[base] + fc * flat[base + 1])
            + fr * ((1 - fc) * flat[base + stride] + fc * flat[base + stride + 1])
        )
        val = np.where(inside, val, 0.0)
        out[lo:hi] = val.sum(axis=-1) * dt
    return out


def project(image, geometry: Geometry, ray_step: float = DEFAULT_RAY_STEP) -> Sinogram:
    return Sinogram(forward_project(image, geometry, ray_step), geometry)


def _detector_weights(geometry: Geometry, size: int, lo: int, hi: int):
    """Linear-interpolation indices/weights of every pixel for angles lo..hi."""
    x, y = pixel_centers(size)
    theta = geometry.angles[lo:hi]
    n_det = geometry.num_detectors
    s = np.cos(theta)[:, None, None] * x + np.sin(theta)[:, None, None] * y
    u = s / geometry.detector_spacing + (n_det - 1) / 2.0
    valid = (u >= 0) & (u <= n_det - 1)
    j0 = np.clip(np.floor(u), 0, n_det - 2).astype(np.intp)
    f = np.where(valid, u - j0, 0.0)
    w0 = np.where(valid, 1.0 - f, 0.0)
    return j0, w0, f


def _check_sinogram(sinogram, geometry: Geometry) -> np.ndarray:
    if isinstance(sinogram, Sinogram) and sinogram.geometry != geometry:
        raise GeometryError("sinogram geometry does not match the requested geometry")
    sino = np.asarray(sinogram, dtype=np.float64)
    if sino.shape != (geometry.num_angles, geometry.num_detectors):
        raise GeometryError(
            f"sinogram shape {sino.shape} does not match geometry "
            f"({geometry.num_angles}, {geometry.num_detectors})"
        )
    return sino


def back_project(filtered_sinogram, geometry: Geometry, out_size: int) -> np.ndarray:
    """``f(x, y) = sum_i p(theta_i, x cos theta_i + y sin theta_i) * angle_step``.

    Detector coordinates outside ``[s_0, s_{N-1}]`` contribute zero.
    """
    sino = _check_sinogram(filtered_sinogram, geometry)
    n_det = geometry.num_detectors
    out = np.zeros((out_size, out_size))
    for lo, hi in _chunks(geometry.num_angles, out_size * out_size):
        j0, w0, w1 = _detector_weights(geometry, out_size, lo, hi)
        rows = sino[lo:hi].reshape(hi - lo, 1, 1, n_det)
        idx = j0[..., None]
        p0 = np.take_along_axis(rows, idx, axis=-1)[..., 0]
        p1 = np.take_along_axis(rows, idx + 1, axis=-1)[..., 0]
        out += (w0 * p0 + w1 * p1).sum(axis=0)
    return out * geometry.angle_step


def back_project_adjoint(image_grad, geometry: Geometry) -> np.ndarray:
    """Exact transpose of :func:`back_project` (maps image space to sinogram space)."""
    g = np.asarray(image_grad, dtype=np.float64)
    size = g.shape[0]
    n_det = geometry.num_detectors
    out = np.zeros((geometry.num_angles, n_det))
    for lo, hi in _chunks(geometry.num_angles, size * size):
        j0, w0, w1 = _detector_weights(geometry, size, lo, hi)
        m = hi - lo
        offs = (np.arange(m) * n_det)[:, None, None]
        flat = np.bincount(
            (offs + j0).ravel(), weights=(w0 * g).ravel(), minlength=m * n_det
        )
        flat += np.bincount(
            (offs + j0 + 1).ravel(), weights=(w1 * g).ravel(), minlength=m * n_det
        )
        out[lo:hi] = flat.reshape(m, n_det)
    return out * geometry.angle_step


def backproject_image(sinogram: Sinogram, out_size: int) -> Image:
    return Image(back_project(sinogram, sinogram.geometry, out_size))


def apply_noise(sinogram, photon_count: float, seed: int) -> np.ndarray:
    """Beer-Lambert Poisson noise: ``-ln(max(n, 1) / I0)`` with ``n ~ Poisson(I0 e^-p)``.

    ``photon_count = math.inf`` disables noise and returns the input unchanged.
    """
    p = np.asarray(sinogram, dtype=np.float64)
    if not photon_count > 0:
        raise ValueError(f"photon count must be positive, got {photon_count}")
    if np.any(p < 0):
        raise ValueError("sinogram has negative line integrals; cannot simulate photon counts")
    if math.isinf(photon_count):
        return p.copy()
    rng = np.random.Generator(np.random.PCG64(seed))
    counts = rng.poisson(photon_count * np.exp(-p))
    return -np.log(np.maximum(counts, 1) / photon_count)


def noisy(sinogram: Sinogram, photon_count: float, seed: int) -> Sinogram:
    return Sinogram(apply_noise(sinogram, photon_count, seed), sinogram.geometry)
