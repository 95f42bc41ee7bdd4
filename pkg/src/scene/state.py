"""
Scene State
-----------

The planner's world model for one iteration: validated targets at their fused
poses, the static fixtures (bin and table), and the occupied voxels carved from
the current depth image. A ``SceneState`` is built once per iteration and
never mutated afterwards.
"""

import logging
from dataclasses import dataclass
from typing import FrozenSet, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.geometry import Pose
from src.mesh import TriangleMesh, distance_to_mesh, distance_to_mesh_brute_force
from src.perception.camera import CameraIntrinsics
from src.perception.depth import DepthImage
from src.scene.voxels import VoxelConfig, VoxelGrid

logger = logging.getLogger(__name__)

Body = Tuple[TriangleMesh, Pose]


class SceneTarget(NamedTuple):
    """A validated track: graspable and a collision body for other grasps."""
    track_id: int
    model: object                       # ObjectModel
    pose: Pose
    confidence: float

    @property
    def body(self) -> Body:
        return self.model.mesh, self.pose


# =============================================================================
# DEPTH TO POINTS
# =============================================================================

def depth_to_points(depth: DepthImage, intrinsics: CameraIntrinsics, camera_pose: Pose) -> np.ndarray:
    """
    World points for every valid pixel, row-major.

    Returns:
        ``(N, 3)`` array; empty when no pixel is valid.
    """
    rows, cols = np.nonzero(depth.valid)
    if rows.size == 0:
        return np.zeros((0, 3))
    pixels = np.column_stack([cols, rows]).astype(float)
    camera_points = intrinsics.back_project(pixels, depth.depth[rows, cols])
    return camera_pose.apply(camera_points)


# =============================================================================
# CARVING
# =============================================================================

def _unexplained(points: np.ndarray, bodies: Sequence[Body], tolerance: float, brute_force: bool) -> np.ndarray:
    keep = np.ones(len(points), dtype=bool)
    for mesh, pose in bodies:
        if not keep.any():
            break
        idx = np.flatnonzero(keep)
        if brute_force:
            d = distance_to_mesh_brute_force(mesh, points[idx], pose)
        else:
            d = distance_to_mesh(mesh, points[idx], pose, max_distance=tolerance)
        keep[idx[d <= tolerance]] = False
    return keep


def _occupancy(points: np.ndarray, grid: VoxelGrid, min_points: int) -> np.ndarray:
    occupancy = np.zeros(grid.dims, dtype=bool)
    if len(points) == 0:
        return occupancy
    index, inside = grid.voxel_of(points)
    index = index[inside]
    if len(index) == 0:
        return occupancy
    flat = np.ravel_multi_index(index.T, grid.dims)
    counts = np.bincount(flat, minlength=int(np.prod(grid.dims)))
    return (counts >= min_points).reshape(grid.dims)


def classify_and_carve(points: np.ndarray, targets: Sequence[Body], statics: Sequence[Body],
                       assoc_tolerance: float, grid: VoxelGrid, min_points: int = 2) -> VoxelGrid:
    """
    Occupied voxels from depth points that no known body explains.

    A point is explained when it lies within ``assoc_tolerance`` of any target
    or static surface. A voxel is set when it holds at least ``min_points``
    unexplained points; the input grid supplies geometry only.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    keep = _unexplained(points, list(targets) + list(statics), assoc_tolerance, brute_force=False)
    carved = grid.with_occupancy(_occupancy(points[keep], grid, min_points))
    logger.debug("carved %d occupied voxels from %d of %d points", carved.occupied_count,
                 int(keep.sum()), len(points))
    return carved


def classify_and_carve_brute_force(points: np.ndarray, targets: Sequence[Body], statics: Sequence[Body],
                                   assoc_tolerance: float, grid: VoxelGrid, min_points: int = 2) -> VoxelGrid:
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    keep = _unexplained(points, list(targets) + list(statics), assoc_tolerance, brute_force=True)
    return grid.with_occupancy(_occupancy(points[keep], grid, min_points))


# =============================================================================
# SNAPSHOT
# =============================================================================

@dataclass(frozen=True, eq=False)
class SceneState:
    """
    Read-only snapshot handed to the planner.

    ``excluded`` holds track ids that stay obstacles but must not be planned
    for (their object is already being picked).
    """
    targets: Tuple[SceneTarget, ...]
    statics: Tuple[Body, ...]
    voxels: VoxelGrid
    iteration: int
    bin_frame: Pose
    floor_z: float
    excluded: FrozenSet[int] = frozenset()

    @property
    def plannable(self) -> List[SceneTarget]:
        return [t for t in self.targets if t.track_id not in self.excluded]

    def target(self, track_id: int) -> Optional[SceneTarget]:
        for target in self.targets:
            if target.track_id == track_id:
                return target
        return None

    @property
    def fill_height(self) -> float:
        """Highest target centroid z this iteration (``floor_z`` if none)."""
        heights = [float(t.pose.apply(t.model.center)[2]) for t in self.targets]
        return max(heights, default=self.floor_z)


def build_scene(targets: Sequence[SceneTarget], statics: Sequence[Body], points: np.ndarray,
                grid: VoxelGrid, config: VoxelConfig, iteration: int, bin_frame: Pose, floor_z: float,
                explainers: Sequence[Body] = (), excluded: Sequence[int] = ()) -> SceneState:
    """
    Carve the current points and freeze the snapshot.

    Args:
        targets: Validated tracks of this iteration.
        statics: Bin and table bodies.
        points: World points of the current depth image.
        grid: Grid geometry covering the bin volume.
        config: Carving parameters.
        iteration: Iteration index.
        bin_frame: World pose of the bin; its x axis is the long edge.
        floor_z: World height of the bin floor.
        explainers: Extra bodies that explain points without being targets.
        excluded: Track ids not to plan for.
    """
    bodies = [t.body for t in targets] + list(explainers)
    voxels = classify_and_carve(points, bodies, statics, config.assoc_tolerance, grid, config.min_points_per_voxel)
    return SceneState(tuple(targets), tuple(statics), voxels, iteration, bin_frame, floor_z,
                      frozenset(int(i) for i in excluded))
