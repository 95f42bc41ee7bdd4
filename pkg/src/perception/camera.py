"""
Pinhole Camera
--------------

Intrinsics, pixel rays, projection and back-projection. Camera frames follow
the usual vision convention: +z looks into the scene, +x is image right and
+y is image down. Camera poses are ``world_T_camera``.
"""

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from src.errors import InvalidDepth, InvalidInput


@dataclass(frozen=True)
class CameraConfig:
    """Simulated depth camera and viewpoint sampling"""
    width: int = 192                    # pixels
    height: int = 144                   # pixels
    fx: float = 200.0                   # pixels
    fy: float = 200.0                   # pixels
    cx: float = 95.5                    # pixels
    cy: float = 71.5                    # pixels

    # Viewpoints on the hemisphere above the bin
    viewpoint_radius: float = 0.45      # meters (optimal sensor distance)
    viewpoint_samples: int = 24
    max_polar_deg: float = 35.0         # cone half-angle around the vertical

    def intrinsics(self) -> 'CameraIntrinsics':
        return CameraIntrinsics(self.fx, self.fy, self.cx, self.cy, self.width, self.height)


@dataclass(frozen=True)
class CameraIntrinsics:
    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if self.fx <= 0 or self.fy <= 0:
            raise InvalidInput(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width <= 0 or self.height <= 0:
            raise InvalidInput(f"image size must be positive, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise InvalidInput(f"principal point ({self.cx}, {self.cy}) outside the image")

    @property
    def K(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx],
                         [0.0, self.fy, self.cy],
                         [0.0, 0.0, 1.0]])

    @property
    def shape(self) -> Tuple[int, int]:
        return self.height, self.width

    def pixel_grid(self) -> Tuple[np.ndarray, np.ndarray]:
        """``(u, v)`` coordinates of every pixel center, each ``(H, W)``."""
        return np.meshgrid(np.arange(self.width, dtype=float), np.arange(self.height, dtype=float))

    def pixel_rays(self) -> np.ndarray:
        """``(H*W, 3)`` camera-frame rays with unit z (not unit length), row-major."""
        u, v = self.pixel_grid()
        return np.column_stack([((u - self.cx) / self.fx).ravel(),
                                ((v - self.cy) / self.fy).ravel(),
                                np.ones(u.size)])

    def project(self, points: np.ndarray) -> np.ndarray:
        """Pixel coordinates ``(N, 2)`` of camera-frame points with z > 0."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        return np.column_stack([self.fx * points[:, 0] / points[:, 2] + self.cx,
                                self.fy * points[:, 1] / points[:, 2] + self.cy])

    def back_project(self, pixels: np.ndarray, depth: np.ndarray) -> np.ndarray:
        """Camera-frame points ``z * K^-1 [u, v, 1]`` for pixel coordinates and depths."""
        pixels = np.asarray(pixels, dtype=float).reshape(-1, 2)
        depth = np.asarray(depth, dtype=float).reshape(-1)
        return np.column_stack([(pixels[:, 0] - self.cx) / self.fx * depth,
                                (pixels[:, 1] - self.cy) / self.fy * depth,
                                depth])

    def in_frustum(self, points: np.ndarray, margin_px: float = 0.0) -> np.ndarray:
        """True for camera-frame points in front of the camera that land inside the image."""
        points = np.asarray(points, dtype=float).reshape(-1, 3)
        ahead = points[:, 2] > 1e-9
        pixels = np.full((len(points), 2), -np.inf)
        pixels[ahead] = self.project(points[ahead])
        return (ahead
                & (pixels[:, 0] >= -0.5 + margin_px) & (pixels[:, 0] <= self.width - 0.5 - margin_px)
                & (pixels[:, 1] >= -0.5 + margin_px) & (pixels[:, 1] <= self.height - 0.5 - margin_px))


def project_bb_center(intrinsics: CameraIntrinsics, bbox_center: Sequence[float], z_mean: float) -> np.ndarray:
    """
    Back-project a detection's bounding-box center at its mean mask depth.

    Returns:
        Camera-frame point ``z_mean * K^-1 [u_c, v_c, 1]``.

    Raises:
        InvalidDepth: If ``z_mean <= 0``.
    """
    if not z_mean > 0:
        raise InvalidDepth(f"mask mean depth must be positive, got {z_mean}")
    return intrinsics.back_project(np.asarray(bbox_center, dtype=float), np.array([z_mean]))[0]
