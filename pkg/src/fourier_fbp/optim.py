"""Training the 101 Fourier-series coefficients.

Gradients are propagated by hand through the fixed pipeline::

    c -> H = B c -> Y = X * H -> q = trunc(F^-1 Y) -> z = s * BP(q) -> rec = ReLU(z) -> loss

Every stage before the ReLU is linear, so its reverse pass is its transpose:

* ``BP^T`` is :func:`projector.back_project_adjoint`;
* for ``q = trunc(irfft(X * H))`` and upstream ``g_q``,
  ``dL/dH_k = (w_k / P) * sum_rows Re(X_k * conj(G_k))`` where ``G`` is the
  half spectrum of ``g_q`` zero-padded to ``P`` and ``w_k`` is 1 at DC and
  Nyquist, 2 elsewhere;
* ``dL/dc = B^T dL/dH``.
"""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import spectral
from .filters import (
    NUM_COEFFICIENTS,
    FourierSeriesFilter,
    initial_filter,
    series_basis,
    write_filter_csv,
)
from .geometry import Geometry
from .losses import GEEParams, GVParams, HybridLoss, LossWeights, hybrid_loss_grad
from .metrics import psnr, ssim
from .phantom import load_manifest
from .pipeline import ReconstructionConfig, default_padded_len
from .projector import back_project, back_project_adjoint

log = logging.getLogger(__name__)


class NonFiniteError(ArithmeticError):
    pass


class TrainingAborted(RuntimeError):
    def __init__(self, message: str, last_good: FourierSeriesFilter):
        super().__init__(message)
        self.last_good = last_good


@dataclass
class TrainConfig:
    data: str = ""
    out_dir: str | None = None
    epochs: int = 20
    batch_size: int = 8
    base_lr: float = 5e-3
    max_lr: float = 2e-2
    warmup_frac: float = 0.3
    final_div: float = 25.0
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    alpha: float = 10.0
    beta: float = 20.0
    kappa: float = 0.1
    sigma: float = 0.05
    patch_size: int = 4
    seed: int = 0
    init: str = "ram_lak"
    padded_len: int = 0

    def __post_init__(self):
        if not 0 < self.base_lr <= self.max_lr:
            raise ValueError(f"need 0 < base_lr <= max_lr, got {self.base_lr}, {self.max_lr}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch_size >= 1")

    @property
    def weights(self) -> LossWeights:
        return LossWeights(self.alpha, self.beta)

    @property
    def gee(self) -> GEEParams:
        return GEEParams(self.kappa, self.sigma)

    @property
    def gv(self) -> GVParams:
        return GVParams(self.patch_size)


@dataclass
class LossSettings:
    weights: LossWeights = field(default_factory=LossWeights)
    gee: GEEParams = field(default_factory=GEEParams)
    gv: GVParams = field(default_factory=GVParams)


class Sample:
    """A training pair with the half spectrum of its sinogram cached."""

    def __init__(self, sinogram, ground_truth, geometry: Geometry, padded_len: int):
        self.geometry = geometry
        self.gt = np.asarray(ground_truth, dtype=np.float64)
        self.spectrum = spectral.rows_to_halfspectrum(
            np.asarray(sinogram, dtype=np.float64), padded_len
        ).bins
        self.padded_len = padded_len

    @property
    def size(self) -> int:
        return self.gt.shape[0]


def _finite(stage: str, a) -> None:
    if not np.all(np.isfinite(a)):
        raise NonFiniteError(f"non-finite values in {stage}")


def _hermitian_weights(p: int) -> np.ndarray:
    w = np.full(p // 2 + 1, 2.0)
    w[0] = 1.0
    w[-1] = 1.0
    return w


def sample_loss_and_gradient(coef: np.ndarray, sample: Sample, losses: LossSettings):
    """Hybrid loss of one sample and its gradient with respect to ``coef``."""
    p = sample.padded_len
    g = sample.geometry
    n_det = g.num_detectors
    basis = series_basis(spectral.half_grid(p))
    spec = basis @ coef
    _finite("filter spectrum", spec)
    filtered = spectral.halfspectrum_to_rows(
        spectral.HalfSpectrum(sample.spectrum * spec, p), n_det
    )
    _finite("filtered sinogram", filtered)
    scale = 1.0 / (2.0 * g.detector_spacing)
    z = scale * back_project(filtered, g, sample.size)
    _finite("backprojection", z)
    rec = np.maximum(z, 0.0)
    parts, g_rec = hybrid_loss_grad(rec, sample.gt, losses.weights, losses.gee, losses.gv)
    _finite("loss", g_rec)

    g_z = np.where(z > 0, g_rec, 0.0)
    g_filtered = scale * back_project_adjoint(g_z, g)
    g_half = spectral.rows_to_halfspectrum(g_filtered, p).bins
    g_spec = _hermitian_weights(p) / p * np.sum((sample.spectrum * np.conj(g_half)).real, axis=0)
    grad = basis.T @ g_spec
    _finite("gradient", grad)
    return parts, grad


def loss_and_gradient(filt: FourierSeriesFilter, batch, losses: LossSettings | None = None):
    """Mean hybrid loss over ``batch`` (a sequence of :class:`Sample`) and its gradient.

    Returns ``(loss, grad, parts)`` where ``parts`` is the batch-mean
    :class:`HybridLoss` breakdown.
    """
    if not batch:
        raise ValueError("batch must not be empty")
    losses = losses or LossSettings()
    coef = filt.coefficients
    grad = np.zeros(NUM_COEFFICIENTS)
    acc = np.zeros(4)
    # fixed summation order keeps results reproducible
    for sample in batch:
        parts, g = sample_loss_and_gradient(coef, sample, losses)
        grad += g
        acc += parts
    k = len(batch)
    mean = HybridLoss(*(acc / k))
    return mean.total, grad / k, mean


def loss_value(coef, batch, losses: LossSettings) -> float:
    return loss_and_gradient(FourierSeriesFilter.from_vector(coef), batch, losses)[0]


# --- optimizer ---------------------------------------------------------------


@dataclass
class AdamState:
    m: np.ndarray = field(default_factory=lambda: np.zeros(NUM_COEFFICIENTS))
    v: np.ndarray = field(default_factory=lambda: np.zeros(NUM_COEFFICIENTS))
    t: int = 0


def adam_step(state: AdamState, params, grad, lr: float, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update; returns ``(new_state, new_params)``."""
    params = np.asarray(params, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if params.shape != state.m.shape or grad.shape != state.m.shape:
        raise ValueError("params, gradient and optimizer state must have the same length")
    if not (np.all(np.isfinite(grad)) and np.all(np.isfinite(params))):
        raise NonFiniteError("non-finite parameters or gradient passed to Adam")
    t = state.t + 1
    m = beta1 * state.m + (1 - beta1) * grad
    v = beta2 * state.v + (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1**t)
    v_hat = v / (1 - beta2**t)
    new = params - lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m, v, t), new


def onecycle_lr(
    step: int,
    total_steps: int,
    base_lr: float = 5e-3,
    max_lr: float = 2e-2,
    warmup_frac: float = 0.3,
    final_div: float = 25.0,
) -> float:
    """Cosine warm-up from ``base_lr`` to ``max_lr``, then cosine decay to ``base_lr / final_div``.

    The peak sits at step ``round(warmup_frac * total_steps)`` and the last
    step (``total_steps - 1``) lands on the final rate.
    """
    if not 0 <= step < total_steps:
        raise ValueError(f"step {step} outside [0, {total_steps})")
    last = total_steps - 1
    peak = min(int(round(warmup_frac * total_steps)), last)
    final_lr = base_lr / final_div
    if step <= peak:
        if peak == 0:
            return base_lr
        w = 0.5 * (1 + math.cos(math.pi * step / peak))
        return base_lr * w + max_lr * (1 - w)
    w = 0.5 * (1 + math.cos(math.pi * (step - peak) / (last - peak)))
    return max_lr * w + final_lr * (1 - w)


# --- training loop -------------------------------------------------------------


@dataclass
class StepRecord:
    step: int
    lr: float
    total: float
    mse: float
    gee: float
    gv: float


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_ssim: float
    val_psnr: float
    val_mse: float


@dataclass
class TrainHistory:
    steps: list[StepRecord] = field(default_factory=list)
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0

    def write_steps_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["step", "lr", "total", "mse", "gee", "gv"])
            for r in self.steps:
                w.writerow([r.step, repr(r.lr), repr(r.total), repr(r.mse), repr(r.gee), repr(r.gv)])

    def write_epochs_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["epoch", "train_loss", "val_ssim", "val_psnr", "val_mse"])
            for r in self.epochs:
                w.writerow([r.epoch] + [repr(x) for x in asdict(r).values()][1:])


def _load_split(manifest, split: str, padded_len: int) -> list[Sample]:
    out = []
    for _, gt, _, noisy in manifest.load(split):
        out.append(Sample(noisy, gt, manifest.geometry, padded_len))
    return out


def validate(filt: FourierSeriesFilter, samples: list[Sample]) -> tuple[float, float, float]:
    """Mean (SSIM, PSNR, MSE) of reconstructions of ``samples``."""
    if not samples:
        return math.nan, math.nan, math.nan
    s = samples[0]
    config = ReconstructionConfig(s.geometry, s.size, filt, s.padded_len)
    spec = config.spectrum().values
    vals = []
    for sample in samples:
        filtered = spectral.halfspectrum_to_rows(
            spectral.HalfSpectrum(sample.spectrum * spec, sample.padded_len),
            sample.geometry.num_detectors,
        )
        rec = np.maximum(config.intensity_scale * back_project(filtered, sample.geometry, sample.size), 0.0)
        vals.append((ssim(rec, sample.gt), psnr(rec, sample.gt), float(np.mean((rec - sample.gt) ** 2))))
    return tuple(float(x) for x in np.mean(np.array(vals), axis=0))


def train(config: TrainConfig) -> tuple[FourierSeriesFilter, TrainHistory]:
    """Train from the dataset at ``config.data``; returns the best-validation-PSNR filter.

    With ``epochs = 0`` the initial filter is returned unchanged.
    """
    manifest = load_manifest(config.data)
    geometry = manifest.geometry
    padded_len = config.padded_len or default_padded_len(geometry.num_detectors)
    losses = LossSettings(config.weights, config.gee, config.gv)
    out_dir = Path(config.out_dir) if config.out_dir else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)

    filt = initial_filter(config.init, config.seed)
    history = TrainHistory()
    if config.epochs == 0:
        if out_dir:
            write_filter_csv(out_dir / "epoch_0.csv", filt)
        return filt, history

    train_set = _load_split(manifest, "train", padded_len)
    val_set = _load_split(manifest, "val", padded_len) if manifest.splits.get("val") else []
    if not train_set:
        raise ValueError("training split is empty")

    rng = np.random.Generator(np.random.PCG64(config.seed))
    steps_per_epoch = math.ceil(len(train_set) / config.batch_size)
    total_steps = config.epochs * steps_per_epoch
    state = AdamState()
    coef = filt.coefficients
    best, best_psnr = filt, -math.inf
    step = 0
    log.info(
        "training %d samples, %d epochs, %d steps; alpha=%g beta=%g kappa=%g sigma=%g patch=%d",
        len(train_set), config.epochs, total_steps, config.alpha, config.beta,
        config.kappa, config.sigma, config.patch_size,
    )
    for epoch in range(1, config.epochs + 1):
        order = rng.permutation(len(train_set))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            lr = onecycle_lr(step, total_steps, config.base_lr, config.max_lr,
                             config.warmup_frac, config.final_div)
            current = FourierSeriesFilter.from_vector(coef)
            try:
                loss, grad, parts = loss_and_gradient(current, batch, losses)
                if not math.isfinite(loss):
                    raise NonFiniteError("non-finite loss")
                state, new_coef = adam_step(state, coef, grad, lr, config.adam_beta1,
                                            config.adam_beta2, config.adam_eps)
                FourierSeriesFilter.from_vector(new_coef)
            except (NonFiniteError, ValueError) as e:
                raise TrainingAborted(f"step {step}: {e}", current) from e
            coef = new_coef
            history.steps.append(StepRecord(step, lr, *parts))
            epoch_losses.append(loss)
            step += 1

        filt = FourierSeriesFilter.from_vector(coef)
        v_ssim, v_psnr, v_mse = validate(filt, val_set)
        history.epochs.append(EpochRecord(epoch, float(np.mean(epoch_losses)), v_ssim, v_psnr, v_mse))
        log.info("epoch %d: train loss %.6g, val PSNR %.4f dB, SSIM %.4f",
                 epoch, np.mean(epoch_losses), v_psnr, v_ssim)
        if out_dir:
            write_filter_csv(out_dir / f"epoch_{epoch}.csv", filt)
        score = v_psnr if val_set else -float(np.mean(epoch_losses))
        if score > best_psnr:
            best, best_psnr = filt, score
            history.best_epoch = epoch
    return best, history
