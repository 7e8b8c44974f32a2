"""Parallel-beam acquisition geometry.

Image coordinates: an ``n x n`` image covers the square ``[-1, 1]^2``. Pixel
``(row, col)`` has its center at ``x = -1 + (col + 0.5) * 2/n`` and
``y = 1 - (row + 0.5) * 2/n`` (row 0 is the top of the image, y points up).

Detector coordinates: detector cell ``j`` sits at signed offset
``s_j = (j - (N - 1) / 2) * detector_spacing``. A ray with normal angle
``theta`` at offset ``s`` is the line ``x cos(theta) + y sin(theta) = s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

_ANGLE_EPS = 1e-9


class GeometryError(ValueError):
    pass


@dataclass(frozen=True)
class Geometry:
    num_angles: int
    angle_start: float
    angle_step: float
    num_detectors: int
    detector_spacing: float

    def __post_init__(self):
        if self.num_angles < 1:
            raise GeometryError(f"num_angles must be >= 1, got {self.num_angles}")
        if self.num_detectors < 3:
            raise GeometryError(f"num_detectors must be >= 3, got {self.num_detectors}")
        if not (self.angle_step > 0 and math.isfinite(self.angle_step)):
            raise GeometryError(f"angle_step must be positive, got {self.angle_step}")
        if self.num_angles * self.angle_step > math.pi + _ANGLE_EPS:
            raise GeometryError(
                f"{self.num_angles} angles of step {self.angle_step} exceed a half turn"
            )
        if not (self.detector_spacing > 0 and math.isfinite(self.detector_spacing)):
            raise GeometryError(
                f"detector_spacing must be positive, got {self.detector_spacing}"
            )

    @classmethod
    def default(cls, num_detectors: int, num_angles: int) -> "Geometry":
        """Equally spaced angles over [0, pi) and a detector spanning [-1, 1]."""
        return cls(
            num_angles=num_angles,
            angle_start=0.0,
            angle_step=math.pi / num_angles,
            num_detectors=num_detectors,
            detector_spacing=2.0 / num_detectors,
        )

    @property
    def angles(self) -> np.ndarray:
        return self.angle_start + self.angle_step * np.arange(self.num_angles)

    @property
    def detector_positions(self) -> np.ndarray:
        n = self.num_detectors
        return (np.arange(n) - (n - 1) / 2.0) * self.detector_spacing

    def to_dict(self) -> dict:
        return {
            "num_angles": self.num_angles,
            "angle_start": self.angle_start,
            "angle_step": self.angle_step,
            "num_detectors": self.num_detectors,
            "detector_spacing": self.detector_spacing,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Geometry":
        return cls(
            num_angles=int(d["num_angles"]),
            angle_start=float(d["angle_start"]),
            angle_step=float(d["angle_step"]),
            num_detectors=int(d["num_detectors"]),
            detector_spacing=float(d["detector_spacing"]),
        )


def pixel_centers(size: int) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(x, y)`` coordinate grids of shape ``(size, size)``."""
    c = -1.0 + (np.arange(size) + 0.5) * (2.0 / size)
    x = np.broadcast_to(c[None, :], (size, size))
    y = np.broadcast_to(-c[:, None], (size, size))
    return x, y
