"""Ellipse phantoms and synthetic (ground truth, clean, noisy) datasets.

Randomness comes from NumPy's PCG64 generator (128-bit state, 64-bit
output, the PCG-XSL-RR variant). Each sample gets its own stream derived
from ``SeedSequence(seed, spawn_key=(split_index, sample_index))``, so any
sample can be regenerated independently and the output does not depend on
generation order or thread count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .geometry import Geometry, pixel_centers
from .projector import DEFAULT_RAY_STEP, apply_noise, forward_project
from .raster import Image, Sinogram, read_raster, write_raster

SPLITS = ("train", "val", "test")
MANIFEST_NAME = "manifest.json"


@dataclass(frozen=True)
class Ellipse:
    x0: float
    y0: float
    a: float
    b: float
    phi: float  # radians, counter-clockwise
    rho: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0):
            raise ValueError(f"semi-axes must be positive, got a={self.a}, b={self.b}")
        if abs(self.x0) > 1 or abs(self.y0) > 1:
            raise ValueError(f"center ({self.x0}, {self.y0}) outside [-1, 1]^2")

    def contains(self, x, y) -> np.ndarray:
        c, s = math.cos(self.phi), math.sin(self.phi)
        dx, dy = np.asarray(x) - self.x0, np.asarray(y) - self.y0
        u = dx * c + dy * s
        v = -dx * s + dy * c
        return (u / self.a) ** 2 + (v / self.b) ** 2 <= 1.0


# Shepp-Logan head phantom with the original (low-contrast) intensities:
#   (x0, y0, a, b, phi in degrees, rho)
SHEPP_LOGAN_TABLE = (
    (0.0, 0.0, 0.69, 0.92, 0.0, 2.0),
    (0.0, -0.0184, 0.6624, 0.874, 0.0, -0.98),
    (0.22, 0.0, 0.11, 0.31, -18.0, -0.02),
    (-0.22, 0.0, 0.16, 0.41, 18.0, -0.02),
    (0.0, 0.35, 0.21, 0.25, 0.0, 0.01),
    (0.0, 0.1, 0.046, 0.046, 0.0, 0.01),
    (0.0, -0.1, 0.046, 0.046, 0.0, 0.01),
    (-0.08, -0.605, 0.046, 0.023, 0.0, 0.01),
    (0.0, -0.606, 0.023, 0.023, 0.0, 0.01),
    (0.06, -0.605, 0.023, 0.046, 0.0, 0.01),
)

SHEPP_LOGAN_ELLIPSES = tuple(
    Ellipse(x0, y0, a, b, math.radians(deg), rho)
    for x0, y0, a, b, deg, rho in SHEPP_LOGAN_TABLE
)


def rasterize(ellipses, size: int) -> np.ndarray:
    """Sum of ``rho`` over the ellipses containing each pixel center."""
    x, y = pixel_centers(size)
    img = np.zeros((size, size))
    for e in ellipses:
        img += e.rho * e.contains(x, y)
    return img


def _check_size(size: int) -> None:
    if size < 8:
        raise ValueError(f"phantom size must be >= 8, got {size}")


def shepp_logan(size: int) -> Image:
    _check_size(size)
    return Image(rasterize(SHEPP_LOGAN_ELLIPSES, size))


def sample_ellipses(num_ellipses: int, rng: np.random.Generator) -> list[Ellipse]:
    """Random ellipses lying inside the unit disk.

    The first ellipse is a large positive "body"; the rest have intensities in
    ``[-0.5, 1)`` so that some of them carve low-attenuation regions.
    """
    out = []
    for i in range(num_ellipses):
        if i == 0:
            a, b = rng.uniform(0.55, 0.9, size=2)
            rho = rng.uniform(0.2, 0.6)
        else:
            a, b = rng.uniform(0.04, 0.35, size=2)
            rho = rng.uniform(-0.5, 1.0)
        reach = max(a, b)
        r = math.sqrt(rng.uniform()) * max(0.0, 0.98 - reach)
        ang = rng.uniform(0, 2 * math.pi)
        phi = rng.uniform(0, math.pi)
        out.append(Ellipse(r * math.cos(ang), r * math.sin(ang), a, b, phi, rho))
    return out


def random_ellipse_phantom(size: int, num_ellipses: int, seed: int) -> Image:
    _check_size(size)
    if not 1 <= num_ellipses <= 32:
        raise ValueError(f"num_ellipses must be in [1, 32], got {num_ellipses}")
    rng = np.random.Generator(np.random.PCG64(seed))
    ellipses = sample_ellipses(num_ellipses, rng)
    return Image(np.maximum(rasterize(ellipses, size), 0.0))


@dataclass
class DatasetConfig:
    train: int = 200
    val: int = 20
    test: int = 50
    size: int = 64
    num_angles: int = 90
    num_detectors: int = 0  # 0: same as size
    photon_count: float = 4096.0  # math.inf disables noise
    seed: int = 0
    min_ellipses: int = 4
    max_ellipses: int = 12
    ray_step: float = DEFAULT_RAY_STEP

    def geometry(self) -> Geometry:
        return Geometry.default(self.num_detectors or self.size, self.num_angles)

    def counts(self) -> dict[str, int]:
        return {"train": self.train, "val": self.val, "test": self.test}


@dataclass
class SampleFiles:
    id: str
    gt: str
    sino: str
    noisy: str


@dataclass
class DatasetManifest:
    root: Path
    image_size: int
    geometry: Geometry
    photon_count: float
    seed: int
    splits: dict[str, list[SampleFiles]] = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    def samples(self, split: str) -> list[SampleFiles]:
        if split not in self.splits:
            raise KeyError(f"split {split!r} not in manifest (have {', '.join(self.splits)})")
        return self.splits[split]

    def load(self, split: str):
        """Yield ``(id, ground_truth, clean_sinogram, noisy_sinogram)`` per sample."""
        for s in self.samples(split):
            yield (
                s.id,
                read_raster(self.root / s.gt),
                read_raster(self.root / s.sino),
                read_raster(self.root / s.noisy),
            )

    def to_json(self) -> dict:
        return {
            "format": "fbp-dataset-1",
            "image_size": self.image_size,
            "geometry": self.geometry.to_dict(),
            # JSON has no infinity; the string "inf" marks noise-free data
            "photon_count": "inf" if math.isinf(self.photon_count) else self.photon_count,
            "seed": self.seed,
            "rng": "numpy PCG64, SeedSequence(seed, spawn_key=(split, index))",
            "pairing": "train/evaluate on noisy sinograms against clean ground truth",
            "config": self.config,
            "splits": {
                name: {"count": len(files), "samples": [asdict(f) for f in files]}
                for name, files in self.splits.items()
            },
        }


def load_manifest(path) -> DatasetManifest:
    """Load ``manifest.json`` (or a directory containing it) and check every file exists."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    d = json.loads(path.read_text())
    root = path.parent
    splits = {}
    for name, entry in d["splits"].items():
        files = [SampleFiles(**s) for s in entry["samples"]]
        if len(files) != entry["count"]:
            raise ValueError(f"{path}: split {name} lists {len(files)} samples, count says {entry['count']}")
        for f in files:
            for rel in (f.gt, f.sino, f.noisy):
                if not (root / rel).is_file():
                    raise FileNotFoundError(f"{path}: missing dataset file {rel}")
        splits[name] = files
    pc = d["photon_count"]
    return DatasetManifest(
        root=root,
        image_size=int(d["image_size"]),
        geometry=Geometry.from_dict(d["geometry"]),
        photon_count=math.inf if pc == "inf" else float(pc),
        seed=int(d["seed"]),
        splits=splits,
        config=d.get("config", {}),
    )


def _sample_seeds(seed: int, split_index: int, index: int) -> tuple[int, int]:
    ss = np.random.SeedSequence(seed, spawn_key=(split_index, index))
    phantom_seed, noise_seed = ss.generate_state(2, dtype=np.uint64)
    return int(phantom_seed), int(noise_seed)


def make_sample(config: DatasetConfig, split_index: int, index: int):
    """Ground truth, clean and noisy sinogram for one sample; pure in its arguments."""
    phantom_seed, noise_seed = _sample_seeds(config.seed, split_index, index)
    rng = np.random.Generator(np.random.PCG64(phantom_seed))
    count = int(rng.integers(config.min_ellipses, config.max_ellipses + 1))
    gt = random_ellipse_phantom(config.size, count, int(rng.integers(2**63)))
    geometry = config.geometry()
    clean = forward_project(gt, geometry, config.ray_step)
    # the projector is exact only up to roundoff; line integrals of a
    # nonnegative image cannot be negative
    clean = np.maximum(clean, 0.0)
    noisy = apply_noise(clean, config.photon_count, noise_seed)
    return gt, Sinogram(clean, geometry), Sinogram(noisy, geometry)


def generate_dataset(out_dir, config: DatasetConfig, threads: int = 1) -> DatasetManifest:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = DatasetManifest(
        root=out_dir,
        image_size=config.size,
        geometry=config.geometry(),
        photon_count=config.photon_count,
        seed=config.seed,
        config={k: ("inf" if isinstance(v, float) and math.isinf(v) else v) for k, v in asdict(config).items()},
    )

    def work(job):
        split_index, split, index = job
        gt, clean, noisy = make_sample(config, split_index, index)
        stem = f"{split}_{index}"
        files = SampleFiles(stem, f"{stem}_gt.fbr", f"{stem}_sino.fbr", f"{stem}_noisy.fbr")
        write_raster(out_dir / files.gt, gt)
        write_raster(out_dir / files.sino, clean)
        write_raster(out_dir / files.noisy, noisy)
        return split, files

    jobs = [
        (si, split, i)
        for si, split in enumerate(SPLITS)
        for i in range(config.counts()[split])
    ]
    manifest.splits = {split: [] for split in SPLITS}
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, jobs))
    else:
        results = [work(j) for j in jobs]
    for split, files in results:
        manifest.splits[split].append(files)

    text = json.dumps(manifest.to_json(), indent=2, sort_keys=True) + "\n"
    (out_dir / MANIFEST_NAME).write_text(text)
    return manifest
