"""SSIM, PSNR and MSE, and per-split evaluation reports.

SSIM uses the usual configuration: 11x11 Gaussian window with sigma 1.5,
``C1 = (0.01 L)^2``, ``C2 = (0.03 L)^2``, population (co)variances under
the window, averaged over valid window positions only (no padding).

Aggregate standard deviations use the unbiased estimator (``ddof = 1``).
Metrics are computed on the native phantom intensity scale, with
``data_range = max(gt) - min(gt)`` per sample unless given.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def _pair(rec, gt):
    rec = np.asarray(rec, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if rec.shape != gt.shape:
        raise ValueError(f"shape mismatch: {rec.shape} vs {gt.shape}")
    return rec, gt


def _data_range(gt: np.ndarray, data_range) -> float:
    if data_range is None:
        data_range = float(gt.max() - gt.min())
    if not data_range > 0:
        raise ValueError(f"data_range must be positive, got {data_range}")
    return float(data_range)


def mse(rec, gt) -> float:
    rec, gt = _pair(rec, gt)
    return float(np.mean((rec - gt) ** 2))


def psnr(rec, gt, data_range: float | None = None) -> float:
    """``10 log10(range^2 / mse)`` in dB; ``math.inf`` when the images are equal."""
    rec, gt = _pair(rec, gt)
    rng = _data_range(gt, data_range)
    err = mse(rec, gt)
    if err == 0:
        return math.inf
    return 10.0 * math.log10(rng * rng / err)


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2 * sigma**2))
    return g / g.sum()


def _filter_valid(a: np.ndarray, w: np.ndarray) -> np.ndarray:
    k = w.size
    rows = np.lib.stride_tricks.sliding_window_view(a, k, axis=0) @ w
    return np.lib.stride_tricks.sliding_window_view(rows, k, axis=1) @ w


def ssim(rec, gt, data_range: float | None = None) -> float:
    rec, gt = _pair(rec, gt)
    if min(rec.shape) < SSIM_WINDOW:
        raise ValueError(f"SSIM needs images of at least {SSIM_WINDOW}x{SSIM_WINDOW}")
    rng = _data_range(gt, data_range)
    c1 = (SSIM_K1 * rng) ** 2
    c2 = (SSIM_K2 * rng) ** 2
    w = gaussian_window()
    mx = _filter_valid(rec, w)
    my = _filter_valid(gt, w)
    sxx = _filter_valid(rec * rec, w) - mx * mx
    syy = _filter_valid(gt * gt, w) - my * my
    sxy = _filter_valid(rec * gt, w) - mx * my
    num = (2 * mx * my + c1) * (2 * sxy + c2)
    den = (mx * mx + my * my + c1) * (sxx + syy + c2)
    return float(np.mean(num / den))


@dataclass
class MetricRow:
    id: str
    ssim: float
    mse: float
    psnr_db: float


@dataclass
class MetricReport:
    label: str
    split: str
    rows: list[MetricRow] = field(default_factory=list)

    def _column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows], dtype=np.float64)

    def mean(self, name: str) -> float:
        return float(np.mean(self._column(name)))

    def std(self, name: str) -> float:
        col = self._column(name)
        if col.size < 2 or not np.all(np.isfinite(col)):
            return 0.0 if col.size < 2 else math.nan
        return float(np.std(col, ddof=1))

    def summary(self) -> dict[str, tuple[float, float]]:
        return {m: (self.mean(m), self.std(m)) for m in ("ssim", "mse", "psnr_db")}

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["id", "ssim", "mse", "psnr_db"])
            for r in self.rows:
                w.writerow([r.id, repr(r.ssim), repr(r.mse), _fmt(r.psnr_db)])
            w.writerow(["mean"] + [_fmt(self.mean(m)) for m in ("ssim", "mse", "psnr_db")])
            w.writerow(["std"] + [_fmt(self.std(m)) for m in ("ssim", "mse", "psnr_db")])


def _fmt(x: float) -> str:
    return "inf" if math.isinf(x) else repr(float(x))


def read_report_csv(path, label: str = "", split: str = "") -> MetricReport:
    report = MetricReport(label, split)
    with open(path, newline="") as f:
        for row in csv.DictReader(f):
            if row["id"] in ("mean", "std"):
                continue
            report.rows.append(
                MetricRow(row["id"], float(row["ssim"]), float(row["mse"]), float(row["psnr_db"]))
            )
    return report


def evaluate_pairs(pairs, label: str, split: str, threads: int = 1) -> MetricReport:
    """Score ``(id, reconstruction, ground_truth)`` triples; rows keep input order."""

    def score(item):
        sid, rec, gt = item
        rec = np.asarray(rec, dtype=np.float64)
        gt = np.asarray(gt, dtype=np.float64)
        return MetricRow(sid, ssim(rec, gt), mse(rec, gt), psnr(rec, gt))

    pairs = list(pairs)
    if not pairs:
        raise ValueError(f"split {split!r} has no samples to evaluate")
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(score, pairs))
    else:
        rows = [score(p) for p in pairs]
    return MetricReport(label, split, rows)


def evaluate_split(manifest, split: str, config, label: str, out_csv=None, threads: int = 1) -> MetricReport:
    """Reconstruct every noisy sinogram of ``split`` with ``config`` and score it."""
    from .pipeline import reconstruct_array

    samples = manifest.samples(split)
    if not samples:
        raise ValueError(f"split {split!r} is empty")

    def recon(item):
        sid, gt, _, noisy = item
        return sid, reconstruct_array(noisy, config), gt

    report = evaluate_pairs((recon(it) for it in manifest.load(split)), label, split, threads)
    if out_csv is not None:
        report.write_csv(out_csv)
    return report


def format_table(reports: list[MetricReport]) -> str:
    lines = [f"{'Model':<20} {'SSIM':>20} {'MSE':>22} {'PSNR (dB)':>22}"]
    for r in reports:
        s = r.summary()
        lines.append(
            f"{r.label:<20} {s['ssim'][0]:>9.4f} ± {s['ssim'][1]:<8.4f} "
            f"{s['mse'][0]:>10.6f} ± {s['mse'][1]:<9.6f} "
            f"{s['psnr_db'][0]:>10.4f} ± {s['psnr_db'][1]:<9.4f}"
        )
    return "\n".join(lines)
