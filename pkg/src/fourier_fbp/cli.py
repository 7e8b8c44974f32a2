"""Command line interface: ``fourier-fbp <command> [options]``.

Commands: ``gen-data``, ``train``, ``reconstruct``, ``eval``, ``export-filter``.

Options can also come from a flat ``key = value`` config file given with
``--config`` (``#`` starts a comment; keys are the long option names with
dashes or underscores). Explicit flags override the file. Commands that write
a directory also write the fully resolved settings to ``config_resolved.txt``.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import filters, metrics, optim, phantom, pipeline, raster, spectral

log = logging.getLogger("fourier_fbp")

RESOLVED_CONFIG = "config_resolved.txt"


class UsageError(Exception):
    pass


# --- config handling -----------------------------------------------------------


def read_config_file(path) -> dict[str, str]:
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read config file {path}: {e}") from e
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def write_config_file(path, settings: dict) -> None:
    lines = [f"{k} = {_config_value(v)}" for k, v in sorted(settings.items())]
    Path(path).write_text("\n".join(lines) + "\n")


def _config_value(v) -> str:
    if isinstance(v, (list, tuple)):
        return ",".join(str(x) for x in v)
    if isinstance(v, float):
        return "inf" if math.isinf(v) else repr(v)
    return "" if v is None else str(v)


def _positive_float_or_inf(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number or 'inf', got {s}")
    return v


def _window(s: str) -> tuple[float, float]:
    try:
        lo, hi = (float(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'lo,hi', got {s!r}") from None
    return lo, hi


# Each command: (option name, type, default, help). Default ``None`` with
# ``required=True`` semantics is marked by REQUIRED.
REQUIRED = object()

GEN_DATA_OPTIONS = [
    ("out", str, REQUIRED, "output directory"),
    ("train", int, 200, "training samples"),
    ("val", int, 20, "validation samples"),
    ("test", int, 50, "test samples"),
    ("size", int, 64, "image size (pixels per side)"),
    ("angles", int, 90, "projection angles over [0, pi)"),
    ("detectors", int, 0, "detector cells (0: same as size)"),
    ("photons", _positive_float_or_inf, 4096.0, "incident photon count I0 ('inf' disables noise)"),
    ("seed", int, 0, "dataset seed"),
    ("min_ellipses", int, 4, "fewest ellipses per phantom"),
    ("max_ellipses", int, 12, "most ellipses per phantom"),
]

TRAIN_OPTIONS = [
    ("data", str, REQUIRED, "dataset directory (with manifest.json)"),
    ("out", str, None, "output directory (default: <data>/train)"),
    ("epochs", int, 20, "training epochs"),
    ("batch_size", int, 8, "samples per step"),
    ("base_lr", float, 5e-3, "OneCycle starting learning rate"),
    ("max_lr", float, 2e-2, "OneCycle peak learning rate"),
    ("warmup_frac", float, 0.3, "fraction of steps spent warming up"),
    ("final_div", float, 25.0, "final lr = base_lr / final_div"),
    ("alpha", float, 10.0, "GEE loss weight"),
    ("beta", float, 20.0, "GV loss weight"),
    ("kappa", float, 0.1, "GEE cutoff frequency (cycles/pixel)"),
    ("sigma", float, 0.05, "GEE Gaussian spread (cycles/pixel)"),
    ("patch_size", int, 4, "GV patch size"),
    ("seed", int, 0, "shuffling / init seed"),
    ("init", str, "ram_lak", "initial filter: ram_lak, zero or random"),
    ("padded_len", int, 0, "FFT length (0: next power of two >= 2N)"),
]

RECONSTRUCT_OPTIONS = [
    ("sino", str, REQUIRED, "input sinogram (.fbr)"),
    ("filter", str, "ram_lak", "analytic filter name or coefficient CSV"),
    ("out", str, REQUIRED, "output image (.fbr)"),
    ("preview", str, None, "optional PGM preview path"),
    ("window", _window, None, "preview window 'lo,hi' (default: 0,max)"),
    ("laplace", str, None, "optional path for the Laplacian of the reconstruction (.fbr)"),
    ("size", int, 0, "output size (0: number of detectors)"),
    ("padded_len", int, 0, "FFT length (0: next power of two >= 2N)"),
]

EVAL_OPTIONS = [
    ("data", str, REQUIRED, "dataset directory"),
    ("split", str, "test", "split to evaluate"),
    ("filter", str, REQUIRED, "filter to compare (repeatable)"),
    ("out", str, None, "report directory (default: <data>/eval)"),
    ("padded_len", int, 0, "FFT length (0: next power of two >= 2N)"),
]

EXPORT_OPTIONS = [
    ("filter", str, REQUIRED, "coefficient CSV or analytic filter name"),
    ("padded_len", int, 1024, "grid length P; the spectrum has P/2+1 samples"),
    ("out", str, REQUIRED, "output 'omega,value' CSV"),
    ("kernel", str, None, "optional spatial kernel raster (.fbr)"),
]

def _add_options(p: argparse.ArgumentParser, options, repeatable=()):
    for name, typ, _default, help_ in options:
        flag = "--" + name.replace("_", "-")
        if name in repeatable:
            p.add_argument(flag, dest=name, type=typ, action="append", default=None, help=help_)
        else:
            p.add_argument(flag, dest=name, type=typ, default=None, help=help_)
    p.add_argument("--config", default=None, help="flat key = value config file")
    p.add_argument("--threads", type=int, default=None, help="worker threads (0: auto; env FBP_THREADS)")
    p.add_argument("-v", "--verbose", action="store_true")


def _resolve(args, options, repeatable=()) -> dict:
    """Defaults < config file < explicit flags."""
    file_values = read_config_file(args.config) if args.config else {}
    settings = {}
    for name, typ, default, _ in options:
        value = getattr(args, name)
        if value is None and name in file_values:
            raw = file_values[name]
            try:
                if name in repeatable:
                    value = [typ(x.strip()) for x in raw.split(",") if x.strip()]
                else:
                    value = typ(raw) if raw != "" else None
            except (ValueError, argparse.ArgumentTypeError) as e:
                raise UsageError(f"config key {name}: {e}") from None
        if value is None:
            if default is REQUIRED:
                raise UsageError(f"missing required option --{name.replace('_', '-')}")
            value = default
        settings[name] = value
    threads = args.threads
    if threads is None and "threads" in file_values:
        threads = int(file_values["threads"])
    if threads is None:
        threads = int(os.environ.get("FBP_THREADS", "0") or 0)
    settings["threads"] = threads
    return settings


def _threads(n: int) -> int:
    return n if n > 0 else (os.cpu_count() or 1)


# --- commands ------------------------------------------------------------------


def cmd_gen_data(settings: dict) -> int:
    config = phantom.DatasetConfig(
        train=settings["train"],
        val=settings["val"],
        test=settings["test"],
        size=settings["size"],
        num_angles=settings["angles"],
        num_detectors=settings["detectors"],
        photon_count=settings["photons"],
        seed=settings["seed"],
        min_ellipses=settings["min_ellipses"],
        max_ellipses=settings["max_ellipses"],
    )
    out = Path(settings["out"])
    manifest = phantom.generate_dataset(out, config, threads=_threads(settings["threads"]))
    write_config_file(out / RESOLVED_CONFIG, settings)
    counts = {k: len(v) for k, v in manifest.splits.items()}
    print(
        f"wrote {sum(counts.values())} samples to {out} "
        f"(train {counts['train']}, val {counts['val']}, test {counts['test']}; "
        f"{config.size}x{config.size}, {config.num_angles} angles, I0={config.photon_count:g})"
    )
    return 0


def cmd_train(settings: dict) -> int:
    out = Path(settings["out"] or Path(settings["data"]) / "train")
    settings["out"] = str(out)
    names = {f.name for f in fields(optim.TrainConfig)}
    kwargs = {k: v for k, v in settings.items() if k in names and k not in ("data", "out_dir")}
    config = optim.TrainConfig(data=settings["data"], out_dir=str(out), **kwargs)
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(out / RESOLVED_CONFIG, settings)
    try:
        filt, history = optim.train(config)
    except optim.TrainingAborted as e:
        filters.write_filter_csv(out / "last_good.csv", e.last_good)
        print(f"training aborted: {e}", file=sys.stderr)
        return 1
    filters.write_filter_csv(out / "filter.csv", filt)
    history.write_steps_csv(out / "history.csv")
    history.write_epochs_csv(out / "epochs.csv")
    if history.epochs:
        best = history.epochs[history.best_epoch - 1]
        print(
            f"trained {config.epochs} epochs; best epoch {best.epoch}: "
            f"val PSNR {best.val_psnr:.4f} dB, SSIM {best.val_ssim:.4f}; filter -> {out / 'filter.csv'}"
        )
    else:
        print(f"epochs=0: wrote initial ({config.init}) filter to {out / 'filter.csv'}")
    return 0


def laplacian(image) -> np.ndarray:
    """Five-point discrete Laplacian with replicate borders."""
    a = np.pad(np.asarray(image, dtype=np.float64), 1, mode="edge")
    return a[:-2, 1:-1] + a[2:, 1:-1] + a[1:-1, :-2] + a[1:-1, 2:] - 4 * a[1:-1, 1:-1]


def cmd_reconstruct(settings: dict) -> int:
    sino = raster.read_raster(settings["sino"])
    if not isinstance(sino, raster.Sinogram):
        raise UsageError(f"{settings['sino']} is an image, not a sinogram")
    source = pipeline.load_filter_source(settings["filter"])
    config = pipeline.ReconstructionConfig(
        sino.geometry, settings["size"] or sino.num_detectors, source, settings["padded_len"]
    )
    image = pipeline.reconstruct(sino, config)
    raster.write_raster(settings["out"], image)
    if settings["preview"]:
        lo, hi = settings["window"] or (0.0, float(image.data.max()) or 1.0)
        raster.write_preview(settings["preview"], image, lo, hi)
    if settings["laplace"]:
        raster.write_raster(settings["laplace"], raster.Image(laplacian(image)))
    print(f"reconstructed {config.out_size}x{config.out_size} image -> {settings['out']}")
    return 0


def _labels(specs: list[str]) -> list[str]:
    labels, seen = [], {}
    for s in specs:
        base = Path(s).stem if s.endswith(".csv") else s
        k = seen.get(base, 0)
        seen[base] = k + 1
        labels.append(base if k == 0 else f"{base}_{k}")
    return labels


def cmd_eval(settings: dict) -> int:
    manifest = phantom.load_manifest(settings["data"])
    split = settings["split"]
    if split not in manifest.splits:
        raise KeyError(f"unknown split {split!r}; available: {', '.join(manifest.splits)}")
    out = Path(settings["out"] or Path(settings["data"]) / "eval")
    out.mkdir(parents=True, exist_ok=True)
    write_config_file(out / RESOLVED_CONFIG, settings)
    specs = settings["filter"]
    base = pipeline.ReconstructionConfig(
        manifest.geometry, manifest.image_size, "ram_lak", settings["padded_len"]
    )
    reports = []
    for spec, label in zip(specs, _labels(specs)):
        config = base.with_filter(pipeline.load_filter_source(spec))
        path = out / f"report_{label}_{split}.csv"
        reports.append(
            metrics.evaluate_split(manifest, split, config, label, path, _threads(settings["threads"]))
        )
    table = metrics.format_table(reports)
    (out / f"table_{split}.txt").write_text(table + "\n")
    print(table)
    return 0


def cmd_export_filter(settings: dict) -> int:
    p = settings["padded_len"]
    if not spectral.is_power_of_two(p) or p < 4:
        raise UsageError(f"--padded-len must be a power of two >= 4, got {p}")
    source = pipeline.load_filter_source(settings["filter"])
    spec = filters.spectrum_of(source, p)
    filters.write_spectrum_csv(settings["out"], spec.omega, spec.values)
    if settings["kernel"]:
        # real, even impulse response of the filter, zero lag in the middle
        kernel = spectral.halfspectrum_to_rows(
            spectral.HalfSpectrum(spec.values[None, :].astype(complex), p), p
        )
        kernel = np.roll(kernel, p // 2, axis=-1)
        raster.write_raster(settings["kernel"], raster.Image(kernel))
    n = filters.NUM_COEFFICIENTS if isinstance(source, filters.FourierSeriesFilter) else 0
    what = f"{n} coefficients" if n else f"analytic filter {source}"
    print(f"evaluated {what} on {p // 2 + 1} frequencies -> {settings['out']}")
    return 0


COMMANDS = {
    "gen-data": (cmd_gen_data, GEN_DATA_OPTIONS, "generate a synthetic dataset", ()),
    "train": (cmd_train, TRAIN_OPTIONS, "train the Fourier-series filter", ()),
    "reconstruct": (cmd_reconstruct, RECONSTRUCT_OPTIONS, "reconstruct one sinogram", ()),
    "eval": (cmd_eval, EVAL_OPTIONS, "score filters on a dataset split", ("filter",)),
    "export-filter": (cmd_export_filter, EXPORT_OPTIONS, "evaluate a filter on a frequency grid", ()),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fourier-fbp", description="FBP with a trainable Fourier-series filter."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, options, help_, repeatable) in COMMANDS.items():
        _add_options(sub.add_parser(name, help=help_), options, repeatable)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)  # exits with status 2 on bad usage
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    func, options, _, repeatable = COMMANDS[args.command]
    try:
        settings = _resolve(args, options, repeatable)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    try:
        return func(settings)
    except UsageError as e:
        print(f"{parser.prog} {args.command}: error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # noqa: BLE001 - every runtime failure maps to exit 1
        log.debug("command failed", exc_info=True)
        print(f"{parser.prog} {args.command}: {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
