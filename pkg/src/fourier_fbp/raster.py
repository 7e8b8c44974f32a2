"""Raster containers, the ``.fbr`` binary format, and PGM previews.

File layout (all header lines ASCII, ``\\n`` terminated)::

    FBPRASTER 1
    dtype=f32
    h=<int>
    w=<int>
    angles=<start>,<step>,<count>     (sinograms only)
    det_spacing=<float>               (sinograms only)
    data:
    <h*w little-endian float32 values, row-major>

Floats in the header are written with ``repr`` so they round-trip exactly.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .geometry import Geometry

MAGIC = b"FBPRASTER 1"
_MAX_ELEMENTS = 1 << 31
_LE_F32 = np.dtype("<f4")


class RasterError(Exception):
    pass


class RasterIOError(RasterError):
    pass


class BadMagicError(RasterError):
    pass


class BadHeaderError(RasterError):
    pass


class TruncatedPayloadError(RasterError):
    pass


class DimensionOverflowError(RasterError):
    pass


def _as_f32_grid(data, name: str) -> np.ndarray:
    arr = np.array(data, dtype=np.float32, copy=True)
    if arr.ndim != 2:
        raise ValueError(f"{name} data must be 2-D, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} data contains NaN or Inf")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Image:
    """H x W attenuation raster stored as float32."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32_grid(self.data, "Image"))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        return (
            isinstance(other, Image)
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


@dataclass(frozen=True, eq=False)
class Sinogram:
    """M x N line-integral raster; row i is angle i of ``geometry``."""

    data: np.ndarray
    geometry: Geometry

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32_grid(self.data, "Sinogram"))
        m, n = self.data.shape
        g = self.geometry
        if (m, n) != (g.num_angles, g.num_detectors):
            raise ValueError(
                f"sinogram shape {(m, n)} does not match geometry "
                f"{(g.num_angles, g.num_detectors)}"
            )

    @property
    def num_angles(self) -> int:
        return self.data.shape[0]

    @property
    def num_detectors(self) -> int:
        return self.data.shape[1]

    def __array__(self, dtype=None, copy=None):
        return self.data if dtype is None else self.data.astype(dtype)

    def __eq__(self, other):
        return (
            isinstance(other, Sinogram)
            and self.geometry == other.geometry
            and self.data.shape == other.data.shape
            and self.data.tobytes() == other.data.tobytes()
        )


def _header(raster: Image | Sinogram) -> bytes:
    h, w = raster.data.shape
    lines = [MAGIC.decode(), "dtype=f32", f"h={h}", f"w={w}"]
    if isinstance(raster, Sinogram):
        g = raster.geometry
        lines.append(f"angles={g.angle_start!r},{g.angle_step!r},{g.num_angles}")
        lines.append(f"det_spacing={g.detector_spacing!r}")
    lines.append("data:")
    return ("\n".join(lines) + "\n").encode("ascii")


def encode_raster(raster: Image | Sinogram) -> bytes:
    return _header(raster) + raster.data.astype(_LE_F32).tobytes()


def write_raster(path, raster: Image | Sinogram) -> None:
    path = Path(path)
    try:
        path.write_bytes(encode_raster(raster))
    except OSError as e:
        raise RasterIOError(f"cannot write raster {path}: {e}") from e


def decode_raster(buf: bytes, source: str = "<bytes>") -> Image | Sinogram:
    first, _, rest = buf.partition(b"\n")
    if first != MAGIC:
        raise BadMagicError(f"{source}: bad magic {first[:16]!r}")
    fields: dict[str, str] = {}
    while True:
        line, sep, rest = rest.partition(b"\n")
        if not sep:
            raise BadHeaderError(f"{source}: header ends before 'data:' line")
        if line == b"data:":
            break
        try:
            key, value = line.decode("ascii").split("=", 1)
        except (UnicodeDecodeError, ValueError):
            raise BadHeaderError(f"{source}: malformed header line {line[:40]!r}") from None
        fields[key] = value

    if fields.get("dtype") != "f32":
        raise BadHeaderError(f"{source}: unsupported dtype {fields.get('dtype')!r}")
    try:
        h, w = int(fields["h"]), int(fields["w"])
    except (KeyError, ValueError):
        raise BadHeaderError(f"{source}: missing or non-integer h/w") from None
    if h < 1 or w < 1 or h * w >= _MAX_ELEMENTS:
        raise DimensionOverflowError(f"{source}: invalid dimensions {h}x{w}")

    nbytes = h * w * 4
    if len(rest) < nbytes:
        raise TruncatedPayloadError(
            f"{source}: expected {h * w} values, found {len(rest) // 4}"
        )
    data = np.frombuffer(rest[:nbytes], dtype=_LE_F32).reshape(h, w)

    if "angles" in fields:
        try:
            start, step, count = fields["angles"].split(",")
            geometry = Geometry(
                num_angles=int(count),
                angle_start=float(start),
                angle_step=float(step),
                num_detectors=w,
                detector_spacing=float(fields["det_spacing"]),
            )
        except (KeyError, ValueError) as e:
            raise BadHeaderError(f"{source}: bad geometry block: {e}") from None
        return Sinogram(data, geometry)
    return Image(data)


def read_raster(path) -> Image | Sinogram:
    path = Path(path)
    try:
        buf = path.read_bytes()
    except OSError as e:
        raise RasterIOError(f"cannot read raster {path}: {e}") from e
    return decode_raster(buf, source=str(path))


def preview_bytes(image, window_lo: float, window_hi: float) -> np.ndarray:
    """Map values to 8-bit gray levels through the window ``[lo, hi]``."""
    if not window_hi > window_lo:
        raise ValueError(f"window_hi ({window_hi}) must exceed window_lo ({window_lo})")
    v = np.asarray(image, dtype=np.float64)
    t = np.clip((v - window_lo) / (window_hi - window_lo), 0.0, 1.0)
    # round half up; np.round would send 127.5 to 128 but 0.5 to 0
    return np.floor(255.0 * t + 0.5).astype(np.uint8)


def write_preview(path, image, window_lo: float, window_hi: float) -> None:
    """Write a binary P5 PGM with maxval 255."""
    pix = preview_bytes(image, window_lo, window_hi)
    h, w = pix.shape
    path = Path(path)
    try:
        with open(path, "wb") as f:
            f.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
            f.write(pix.tobytes())
    except OSError as e:
        raise RasterIOError(f"cannot write preview {path}: {e}") from e


def read_pgm(path) -> np.ndarray:
    """Read back a P5 PGM written by :func:`write_preview`."""
    buf = Path(path).read_bytes()
    parts = buf.split(maxsplit=4)
    if parts[0] != b"P5":
        raise BadMagicError(f"{path}: not a binary PGM")
    w, h = int(parts[1]), int(parts[2])
    return np.frombuffer(parts[4][: w * h], dtype=np.uint8).reshape(h, w)
