"""
Depth Rendering
---------------

Ray-cast renderer for the simulated camera. Besides depth it returns the
per-pixel surface normal and instance label, and for each item the number of
pixels it would cover if nothing else were in the scene. The ratio of visible
to unoccluded pixels is the visible-surface fraction the estimator uses.
"""

from dataclasses import dataclass
from typing import Dict, NamedTuple, Sequence

import numpy as np

from src.geometry import Pose
from src.mesh import TriangleMesh, raycast_many
from src.mesh.kernels import ray_box_interval
from src.perception.camera import CameraIntrinsics
from src.perception.depth import DepthImage

BACKGROUND_LABEL = 0
STATIC_LABEL = -1


class RenderItem(NamedTuple):
    """A posed mesh; ``label`` >= 1 for object instances, ``STATIC_LABEL`` for fixtures."""
    label: int
    mesh: TriangleMesh
    pose: Pose


@dataclass(frozen=True, eq=False)
class RenderResult:
    depth: DepthImage
    normals: np.ndarray                 # (H, W, 3) camera frame, NaN on background
    labels: np.ndarray                  # (H, W) int
    visible_pixels: Dict[int, int]
    unoccluded_pixels: Dict[int, int]

    def visible_fraction(self, label: int) -> float:
        total = self.unoccluded_pixels.get(label, 0)
        return self.visible_pixels.get(label, 0) / total if total else 0.0

    def mask(self, label: int) -> np.ndarray:
        return self.labels == label


def _world_bounds(mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    lo, hi = mesh.bounds
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    world = pose.apply(corners)
    return np.stack([world.min(axis=0) - 1e-9, world.max(axis=0) + 1e-9])


def render_scene(items: Sequence[RenderItem], camera_pose: Pose, intrinsics: CameraIntrinsics) -> RenderResult:
    """Nearest-hit render of ``items`` seen from ``camera_pose`` (world_T_camera)."""
    rays_cam = intrinsics.pixel_rays()
    z_per_meter = 1.0 / np.linalg.norm(rays_cam, axis=1)
    directions = camera_pose.apply_direction(rays_cam * z_per_meter[:, None])
    origins = np.broadcast_to(camera_pose.translation, directions.shape)

    n_pixels = directions.shape[0]
    best = np.full(n_pixels, np.inf)
    labels = np.full(n_pixels, BACKGROUND_LABEL, dtype=np.int64)
    normals = np.full((n_pixels, 3), np.nan)
    unoccluded: Dict[int, int] = {}

    for item in items:
        lo, hi = _world_bounds(item.mesh, item.pose)
        t_enter, t_exit = ray_box_interval(origins, directions, lo, hi)
        candidates = np.flatnonzero(t_exit >= np.maximum(t_enter, 0.0))
        if candidates.size == 0:
            unoccluded.setdefault(item.label, 0)
            continue
        batch = raycast_many(item.mesh, origins[candidates], directions[candidates], item.pose)
        unoccluded[item.label] = unoccluded.get(item.label, 0) + int(batch.hit.sum())
        closer = batch.distance < best[candidates]
        rows = candidates[closer]
        best[rows] = batch.distance[closer]
        labels[rows] = item.label
        normals[rows] = batch.normals[closer]

    hit = np.isfinite(best)
    depth = np.where(hit, best * z_per_meter, 0.0).reshape(intrinsics.shape)
    normals_cam = np.full((n_pixels, 3), np.nan)
    normals_cam[hit] = camera_pose.rotation.inverse().apply(normals[hit])

    label_values, counts = np.unique(labels[labels != BACKGROUND_LABEL], return_counts=True)
    visible = {int(k): int(c) for k, c in zip(label_values, counts)}
    return RenderResult(DepthImage(depth, intrinsics), normals_cam.reshape(intrinsics.height, intrinsics.width, 3),
                        labels.reshape(intrinsics.shape), visible, unoccluded)


def render_depth(items: Sequence[RenderItem], camera_pose: Pose, intrinsics: CameraIntrinsics) -> DepthImage:
    """Clean depth only; holes (no surface) are 0."""
    return render_scene(items, camera_pose, intrinsics).depth
