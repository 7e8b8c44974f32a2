import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fourier_fbp import optim
from fourier_fbp.filters import FourierSeriesFilter, initial_filter, read_filter_csv
from fourier_fbp.losses import LossWeights
from fourier_fbp.optim import (
    AdamState,
    LossSettings,
    NonFiniteError,
    Sample,
    TrainConfig,
    TrainingAborted,
    adam_step,
    loss_and_gradient,
    onecycle_lr,
    train,
)
from fourier_fbp.phantom import DatasetConfig, generate_dataset
from fourier_fbp.pipeline import ReconstructionConfig, reconstruct_array

from helpers import grad_instance, gradient_check

# --- Adam --------------------------------------------------------------------------


def test_adam_zero_gradient_is_noop():
    p = np.arange(101.0)
    _, new = adam_step(AdamState(), p, np.zeros(101), 0.1)
    np.testing.assert_array_equal(new, p)


@given(st.floats(1e-6, 1e3), st.floats(1e-4, 1e-1))
def test_adam_first_step_is_sign_times_lr(g, lr):
    grad = np.full(101, g)
    grad[::2] *= -1
    _, new = adam_step(AdamState(), np.zeros(101), grad, lr)
    # m_hat = g, v_hat = g^2 at t = 1
    np.testing.assert_allclose(new, -lr * np.sign(grad) * g / (g + 1e-8), rtol=1e-12)


def test_adam_deterministic_and_state():
    rng = np.random.default_rng(0)
    p, g = rng.normal(size=(2, 101))
    s1, a = adam_step(AdamState(), p, g, 1e-2)
    s2, b = adam_step(AdamState(), p, g, 1e-2)
    np.testing.assert_array_equal(a, b)
    assert s1.t == 1 and np.array_equal(s1.m, s2.m)
    with pytest.raises(NonFiniteError):
        adam_step(AdamState(), p, np.full(101, np.nan), 1e-2)
    with pytest.raises(ValueError):
        adam_step(AdamState(), p[:5], g[:5], 1e-2)


# --- OneCycle ----------------------------------------------------------------------


def test_onecycle_examples():
    total = 250
    assert onecycle_lr(0, total) == 5e-3
    assert onecycle_lr(75, total) == 2e-2
    assert onecycle_lr(total - 1, total) == 5e-3 / 25 == 2e-4


@settings(max_examples=30)
@given(st.integers(2, 2000))
def test_onecycle_shape(total):
    lrs = np.array([onecycle_lr(s, total) for s in range(total)])
    peak = int(np.argmax(lrs))
    assert lrs.max() == 2e-2 or total < 4
    assert np.all(np.diff(lrs[: peak + 1]) >= 0)
    assert np.all(np.diff(lrs[peak:]) <= 0)
    assert lrs.min() >= 2e-4 - 1e-18


def test_onecycle_range():
    with pytest.raises(ValueError):
        onecycle_lr(10, 10)
    with pytest.raises(ValueError):
        onecycle_lr(-1, 10)


def test_train_config_defaults():
    cfg = TrainConfig()
    assert (cfg.epochs, cfg.base_lr, cfg.max_lr, cfg.alpha, cfg.beta) == (20, 5e-3, 2e-2, 10.0, 20.0)
    with pytest.raises(ValueError):
        TrainConfig(base_lr=0.1, max_lr=0.01)


# --- gradients ---------------------------------------------------------------------


@pytest.mark.parametrize("seed", [3, 4])
def test_gradient_matches_finite_differences(seed):
    err, kink_free = gradient_check(seed)
    assert kink_free
    assert err < 1e-4


def test_finite_difference_error_is_truncation():
    # a curved instance: the discrepancy shrinks like h^2, so the analytic side is exact
    coarse, _ = gradient_check(8, 1e-3)
    fine, _ = gradient_check(8, 1e-4)
    assert fine < coarse / 50


def test_zero_gradient_at_perfect_reconstruction():
    coef, sample, cfg = grad_instance(0)
    filt = FourierSeriesFilter.from_vector(coef)
    sino = np.asarray(optim.spectral.halfspectrum_to_rows(
        optim.spectral.HalfSpectrum(sample.spectrum, sample.padded_len), cfg.geometry.num_detectors))
    perfect = Sample(sino, reconstruct_array(sino, cfg.with_filter(filt)), cfg.geometry, cfg.padded_len)
    loss, grad, parts = loss_and_gradient(filt, [perfect])
    assert loss == pytest.approx(0.0, abs=1e-12)
    assert np.abs(grad).max() < 1e-9


def test_gradient_linear_in_alpha():
    coef, sample, _ = grad_instance(1)
    filt = FourierSeriesFilter.from_vector(coef)

    def grad(alpha):
        return loss_and_gradient(filt, [sample], LossSettings(LossWeights(alpha, 20.0)))[1]

    g0, g10, g20 = grad(0.0), grad(10.0), grad(20.0)
    np.testing.assert_allclose(g20 - g10, g10 - g0, rtol=1e-8, atol=1e-12 * np.abs(g10).max())


def test_batch_gradient_is_mean():
    c0, s0, _ = grad_instance(0)
    _, s1, _ = grad_instance(1)
    f = FourierSeriesFilter.from_vector(c0)
    l0, g0, _ = loss_and_gradient(f, [s0])
    l1, g1, _ = loss_and_gradient(f, [s1])
    l, g, parts = loss_and_gradient(f, [s0, s1])
    assert l == pytest.approx((l0 + l1) / 2)
    np.testing.assert_allclose(g, (g0 + g1) / 2)
    assert parts.total == pytest.approx(l)


def test_nonfinite_stage_is_named():
    _, sample, _ = grad_instance(0)
    coef = initial_filter().coefficients
    coef[7] = np.nan
    with pytest.raises(NonFiniteError, match="filter spectrum"):
        optim.sample_loss_and_gradient(coef, sample, LossSettings())
    with pytest.raises(ValueError):
        loss_and_gradient(initial_filter(), [])


# --- training loop -----------------------------------------------------------------

SMALL = dict(train=12, val=4, test=2, size=16, num_angles=16, photon_count=2000.0)


@pytest.fixture(scope="module")
def small_data(tmp_path_factory):
    root = tmp_path_factory.mktemp("data")
    generate_dataset(root, DatasetConfig(**SMALL))
    return root


def small_train(data, out=None, **kw):
    base = dict(data=str(data), out_dir=str(out) if out else None, epochs=2, batch_size=4,
                base_lr=5e-5, max_lr=2e-4, patch_size=4)
    base.update(kw)
    return train(TrainConfig(**base))


def test_zero_epochs_returns_init(small_data, tmp_path):
    filt, hist = small_train(small_data, tmp_path, epochs=0)
    assert filt == initial_filter("ram_lak")
    assert not hist.steps
    assert read_filter_csv(tmp_path / "epoch_0.csv") == filt


def test_training_is_deterministic(small_data, tmp_path):
    f1, h1 = small_train(small_data, tmp_path / "a")
    f2, h2 = small_train(small_data, tmp_path / "b")
    assert f1 == f2
    assert h1 == h2
    for k in (1, 2):
        assert (tmp_path / "a" / f"epoch_{k}.csv").read_bytes() == (tmp_path / "b" / f"epoch_{k}.csv").read_bytes()
    assert [s.step for s in h1.steps] == list(range(6))
    assert h1.steps[0].lr == 5e-5


def test_training_reduces_loss(small_data):
    _, hist = small_train(small_data, epochs=4)
    assert hist.epochs[-1].train_loss < hist.epochs[0].train_loss
    assert 1 <= hist.best_epoch <= 4


def test_history_csv(small_data, tmp_path):
    _, hist = small_train(small_data, epochs=1)
    hist.write_steps_csv(tmp_path / "h.csv")
    lines = (tmp_path / "h.csv").read_text().splitlines()
    assert lines[0] == "step,lr,total,mse,gee,gv" and len(lines) == 4
    hist.write_epochs_csv(tmp_path / "e.csv")
    assert (tmp_path / "e.csv").read_text().startswith("epoch,train_loss,val_ssim,val_psnr,val_mse\n1,")


def test_training_aborts_with_last_good(small_data, monkeypatch):
    calls = {"n": 0}
    real = optim.loss_and_gradient

    def flaky(filt, batch, losses=None):
        calls["n"] += 1
        if calls["n"] == 2:
            return math.nan, np.zeros(101), None
        return real(filt, batch, losses)

    monkeypatch.setattr(optim, "loss_and_gradient", flaky)
    with pytest.raises(TrainingAborted) as info:
        small_train(small_data)
    assert "step 1" in str(info.value)
    assert info.value.last_good.coefficients.size == 101
