"""
Depth Images and Noise Presets
------------------------------

``DepthImage`` holds metric z-depth (0 marks a hole). ``corrupt_depth``
degrades a clean render with additive Gaussian noise and incidence-dependent
dropout, the two artifacts that separate raw active-stereo depth from a
refined depth map.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from src.errors import InvalidInput
from src.perception.camera import CameraIntrinsics

logger = logging.getLogger(__name__)


class DepthPresetName(Enum):
    """Depth quality presets"""
    RAW = "raw"
    ENHANCED = "enhanced"


@dataclass(frozen=True)
class DepthNoisePreset:
    """Gaussian noise level and hole probability as a function of incidence angle."""
    name: str
    gaussian_sigma: float                               # meters
    incidence_deg: Tuple[float, ...] = (0.0, 90.0)      # table abscissae, ascending
    hole_probability: Tuple[float, ...] = (0.0, 0.0)    # dropout probability per abscissa

    def __post_init__(self):
        object.__setattr__(self, 'incidence_deg', tuple(float(a) for a in self.incidence_deg))
        object.__setattr__(self, 'hole_probability', tuple(float(p) for p in self.hole_probability))
        if self.gaussian_sigma < 0:
            raise InvalidInput(f"preset {self.name!r}: gaussian_sigma must be >= 0")
        if len(self.incidence_deg) != len(self.hole_probability) or not self.incidence_deg:
            raise InvalidInput(f"preset {self.name!r}: incidence and probability tables differ in length")
        if any(b <= a for a, b in zip(self.incidence_deg, self.incidence_deg[1:])):
            raise InvalidInput(f"preset {self.name!r}: incidence table must be strictly ascending")
        if any(not 0.0 <= p <= 1.0 for p in self.hole_probability):
            raise InvalidInput(f"preset {self.name!r}: hole probabilities must lie in [0, 1]")

    def hole_probability_at(self, incidence_deg: np.ndarray) -> np.ndarray:
        return np.interp(incidence_deg, self.incidence_deg, self.hole_probability)

    @property
    def max_hole_probability(self) -> float:
        return max(self.hole_probability)


def default_presets() -> Dict[str, DepthNoisePreset]:
    return {
        'raw': DepthNoisePreset('raw', 0.004,
                                (0.0, 30.0, 60.0, 80.0, 90.0),
                                (0.01, 0.03, 0.10, 0.20, 0.20)),
        'enhanced': DepthNoisePreset('enhanced', 0.001,
                                     (0.0, 60.0, 90.0),
                                     (0.0, 0.002, 0.005)),
    }


@dataclass(frozen=True)
class DepthConfig:
    """Active depth preset and the preset tables"""
    preset: DepthPresetName = DepthPresetName.ENHANCED
    presets: Dict[str, DepthNoisePreset] = field(default_factory=default_presets)

    def active(self) -> DepthNoisePreset:
        try:
            return self.presets[self.preset.value]
        except KeyError:
            raise InvalidInput(f"depth preset {self.preset.value!r} is not defined") from None


@dataclass(frozen=True, eq=False)
class DepthImage:
    """Metric z-depth, ``(height, width)``; 0 marks an invalid pixel."""
    depth: np.ndarray
    intrinsics: CameraIntrinsics

    def __post_init__(self):
        depth = np.array(self.depth, dtype=float)
        if depth.shape != self.intrinsics.shape:
            raise InvalidInput(f"depth shape {depth.shape} does not match intrinsics {self.intrinsics.shape}")
        if not np.all(np.isfinite(depth)) or np.any(depth < 0):
            raise InvalidInput("depth values must be finite and nonnegative")
        depth.setflags(write=False)
        object.__setattr__(self, 'depth', depth)

    @property
    def valid(self) -> np.ndarray:
        return self.depth > 0

    @property
    def valid_fraction(self) -> float:
        return float(self.valid.mean())

    def write_pgm(self, path: Union[str, Path]) -> None:
        """16-bit binary PGM with millimeter quantization (saturates at 65.535 m)."""
        millimeters = np.clip(np.rint(self.depth * 1000.0), 0, 65535).astype('>u2')
        height, width = self.depth.shape
        with open(path, 'wb') as handle:
            handle.write(f"P5\n{width} {height}\n65535\n".encode('ascii'))
            handle.write(millimeters.tobytes())


def incidence_angles(normals: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """
    Angle (degrees) between each pixel's viewing ray and its camera-frame
    surface normal. Pixels without a normal get 0.
    """
    rays = intrinsics.pixel_rays()
    rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    flat = np.asarray(normals, dtype=float).reshape(-1, 3)
    cosine = np.abs(np.einsum('ij,ij->i', np.nan_to_num(flat), rays))
    cosine = np.where(np.isfinite(flat).all(axis=1), cosine, 1.0)
    return np.degrees(np.arccos(np.clip(cosine, 0.0, 1.0))).reshape(intrinsics.shape)


def corrupt_depth(image: DepthImage, normals: np.ndarray, preset: DepthNoisePreset,
                  seed: Optional[int] = None) -> DepthImage:
    """
    Add Gaussian noise and incidence-dependent holes to a clean depth image.

    Args:
        image: Clean depth.
        normals: ``(H, W, 3)`` camera-frame surface normals (NaN where empty).
        preset: Noise level and hole table.
        seed: Seed of the per-call generator; equal seeds give equal output.

    Returns:
        The corrupted image. Pixels that were holes stay holes.
    """
    normals = np.asarray(normals, dtype=float)
    if normals.shape[:2] != image.depth.shape:
        raise InvalidInput(f"normals shape {normals.shape} does not match depth {image.depth.shape}")
    rng = np.random.default_rng(seed)
    shape = image.depth.shape
    noise = rng.normal(0.0, 1.0, size=shape) * preset.gaussian_sigma
    draws = rng.random(size=shape)

    valid = image.valid
    holes = draws < preset.hole_probability_at(incidence_angles(normals, image.intrinsics))
    noisy = np.where(valid, image.depth + noise, 0.0)
    noisy = np.where(valid & ~holes & (noisy > 0), noisy, 0.0)
    return DepthImage(noisy, image.intrinsics)
