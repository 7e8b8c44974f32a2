"""Image losses and their gradients with respect to the reconstruction.

Every ``*_grad`` function returns ``(value, d value / d rec)``. Kinks use the
zero subgradient: ``d|t|/dt = 0`` at ``t = 0``, ``d||v||/dv = 0`` at
``v = 0``, and ``d|z|/dz = 0`` for a zero DFT bin.

GEE normalization: the L1 sum over all DFT bins is divided by the pixel
count ``h * w``. GV: Sobel maps use replicate padding; when ``h`` or ``w`` is
not a multiple of the patch size the maps are center-cropped to the largest
multiple before patching.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spectral import center_shift, fft2, freq_grid, ifft2, uncenter_shift


@dataclass(frozen=True)
class LossWeights:
    alpha: float = 10.0  # GEE
    beta: float = 20.0  # GV

    def __post_init__(self):
        if self.alpha < 0 or self.beta < 0:
            raise ValueError("loss weights must be nonnegative")


@dataclass(frozen=True)
class GEEParams:
    kappa: float = 0.1
    sigma: float = 0.05

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")


@dataclass(frozen=True)
class GVParams:
    patch_size: int = 4

    def __post_init__(self):
        if self.patch_size < 2:
            raise ValueError(f"patch size must be >= 2, got {self.patch_size}")


class HybridLoss(NamedTuple):
    total: float
    mse: float
    gee: float
    gv: float


def _pair(rec, gt) -> tuple[np.ndarray, np.ndarray]:
    rec = np.asarray(rec, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if rec.shape != gt.shape:
        raise ValueError(f"shape mismatch: {rec.shape} vs {gt.shape}")
    return rec, gt


# --- MSE -------------------------------------------------------------------


def mse(rec, gt) -> float:
    rec, gt = _pair(rec, gt)
    return float(np.mean((rec - gt) ** 2))


def mse_grad(rec, gt):
    rec, gt = _pair(rec, gt)
    d = rec - gt
    return float(np.mean(d**2)), 2.0 * d / d.size


# --- Sobel / gradient variance ----------------------------------------------

_SOBEL_X = np.array([[-1.0, 0.0, 1.0], [-2.0, 0.0, 2.0], [-1.0, 0.0, 1.0]])
_SOBEL_Y = _SOBEL_X.T


def _correlate3(padded: np.ndarray, k: np.ndarray) -> np.ndarray:
    h, w = padded.shape[0] - 2, padded.shape[1] - 2
    out = np.zeros((h, w))
    for i in range(3):
        for j in range(3):
            if k[i, j]:
                out += k[i, j] * padded[i : i + h, j : j + w]
    return out


def _correlate3_adjoint(g: np.ndarray, k: np.ndarray) -> np.ndarray:
    h, w = g.shape
    out = np.zeros((h + 2, w + 2))
    for i in range(3):
        for j in range(3):
            if k[i, j]:
                out[i : i + h, j : j + w] += k[i, j] * g
    return out


def _edge_pad_adjoint(q: np.ndarray) -> np.ndarray:
    r = q[1:-1, 1:-1].copy()
    r[0, :] += q[0, 1:-1]
    r[-1, :] += q[-1, 1:-1]
    r[:, 0] += q[1:-1, 0]
    r[:, -1] += q[1:-1, -1]
    r[0, 0] += q[0, 0]
    r[0, -1] += q[0, -1]
    r[-1, 0] += q[-1, 0]
    r[-1, -1] += q[-1, -1]
    return r


def sobel_gradients(image) -> tuple[np.ndarray, np.ndarray]:
    """Sobel maps ``(G_x, G_y)``; ``x`` runs along columns, ``y`` along rows."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 2 or min(img.shape) < 3:
        raise ValueError(f"Sobel needs an image of at least 3x3, got {img.shape}")
    padded = np.pad(img, 1, mode="edge")
    return _correlate3(padded, _SOBEL_X), _correlate3(padded, _SOBEL_Y)


def sobel_adjoint(gx_grad: np.ndarray, gy_grad: np.ndarray) -> np.ndarray:
    """Transpose of :func:`sobel_gradients` applied to upstream gradients."""
    q = _correlate3_adjoint(gx_grad, _SOBEL_X) + _correlate3_adjoint(gy_grad, _SOBEL_Y)
    return _edge_pad_adjoint(q)


def _crop_box(shape, n: int):
    h, w = shape
    hh, ww = h - h % n, w - w % n
    if hh == 0 or ww == 0:
        raise ValueError(f"image {h}x{w} is smaller than one {n}x{n} patch")
    top, left = (h - hh) // 2, (w - ww) // 2
    return slice(top, top + hh), slice(left, left + ww)


def _patches(grad_map: np.ndarray, n: int) -> np.ndarray:
    h, w = grad_map.shape
    return grad_map.reshape(h // n, n, w // n, n).swapaxes(1, 2)


def patch_variance_map(grad_map, n: int) -> np.ndarray:
    """Unbiased variance (divisor ``n^2 - 1``) of every ``n x n`` patch."""
    g = np.asarray(grad_map, dtype=np.float64)
    h, w = g.shape
    if n < 2:
        raise ValueError(f"patch size must be >= 2, got {n}")
    if h % n or w % n:
        raise ValueError(f"map {h}x{w} is not divisible into {n}x{n} patches")
    p = _patches(g, n)
    mu = p.mean(axis=(2, 3), keepdims=True)
    return ((p - mu) ** 2).sum(axis=(2, 3)) / (n * n - 1)


def _patch_variance_adjoint(grad_map: np.ndarray, upstream: np.ndarray, n: int) -> np.ndarray:
    p = _patches(grad_map, n)
    mu = p.mean(axis=(2, 3), keepdims=True)
    dp = 2.0 * (p - mu) / (n * n - 1) * upstream[:, :, None, None]
    h, w = grad_map.shape
    return dp.swapaxes(1, 2).reshape(h, w)


def _variance_maps(image, n: int):
    gx, gy = sobel_gradients(image)
    box = _crop_box(gx.shape, n)
    return gx[box], gy[box], box


def gv_loss(rec, gt, params: GVParams = GVParams()) -> float:
    return gv_loss_grad(rec, gt, params)[0]


def gv_loss_grad(rec, gt, params: GVParams = GVParams()):
    """``||v_x(rec) - v_x(gt)||_2 + ||v_y(rec) - v_y(gt)||_2`` over flattened maps."""
    rec, gt = _pair(rec, gt)
    n = params.patch_size
    rx, ry, box = _variance_maps(rec, n)
    tx, ty, _ = _variance_maps(gt, n)
    total = 0.0
    ups = []
    for r_map, t_map in ((rx, tx), (ry, ty)):
        diff = patch_variance_map(r_map, n) - patch_variance_map(t_map, n)
        norm = float(np.sqrt(np.sum(diff**2)))
        total += norm
        d_var = diff / norm if norm > 0 else np.zeros_like(diff)
        up = np.zeros(rec.shape)
        up[box] = _patch_variance_adjoint(r_map, d_var, n)
        ups.append(up)
    return total, sobel_adjoint(ups[0], ups[1])


# --- Gaussian edge-enhanced ---------------------------------------------------


def gaussian_highpass_weights(height: int, width: int, params: GEEParams = GEEParams()) -> np.ndarray:
    """``1 - exp(-(|f| - kappa)^2 / (2 sigma^2))`` on the centered frequency grid."""
    r = freq_grid(height, width).radius
    return 1.0 - np.exp(-((r - params.kappa) ** 2) / (2.0 * params.sigma**2))


def gee_loss(rec, gt, params: GEEParams = GEEParams()) -> float:
    return gee_loss_grad(rec, gt, params)[0]


def gee_loss_grad(rec, gt, params: GEEParams = GEEParams()):
    """``sum |W |F rec| - W |F gt|| / (h w)`` and its gradient."""
    rec, gt = _pair(rec, gt)
    h, w = rec.shape
    weights = uncenter_shift(gaussian_highpass_weights(h, w, params))
    z = fft2(rec)
    mag_rec = np.abs(z)
    mag_gt = np.abs(fft2(gt))
    diff = weights * (mag_rec - mag_gt)
    value = float(np.sum(np.abs(diff)) / (h * w))
    # d|z|/dx_n = Re(sum_k (z_k/|z_k|) e^{+2 pi i k n / N}) = Re(N * ifft(z/|z|))
    g_mag = weights * np.sign(diff) / (h * w)
    phase = np.divide(z, mag_rec, out=np.zeros_like(z), where=mag_rec > 0)
    grad = (h * w) * ifft2(g_mag * phase).real
    return value, grad


# --- hybrid ----------------------------------------------------------------


def hybrid_loss_grad(
    rec,
    gt,
    weights: LossWeights = LossWeights(),
    gee_params: GEEParams = GEEParams(),
    gv_params: GVParams = GVParams(),
):
    """``MSE + alpha * GEE + beta * GV`` with the component breakdown."""
    m, gm = mse_grad(rec, gt)
    e, ge = gee_loss_grad(rec, gt, gee_params)
    v, gv = gv_loss_grad(rec, gt, gv_params)
    total = m + weights.alpha * e + weights.beta * v
    grad = gm + weights.alpha * ge + weights.beta * gv
    return HybridLoss(total, m, e, v), grad


def hybrid_loss(rec, gt, weights=LossWeights(), gee_params=GEEParams(), gv_params=GVParams()) -> HybridLoss:
    return hybrid_loss_grad(rec, gt, weights, gee_params, gv_params)[0]
