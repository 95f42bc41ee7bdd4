"""World model for planning: validated targets, fixtures and occupied voxels."""

from src.scene.voxels import (
    VoxelConfig,
    VoxelGrid,
    colliding_voxels,
    colliding_voxels_brute_force,
    voxel_overlap_count,
    voxels_collide,
    voxels_collide_brute_force,
)
from src.scene.state import (
    SceneState,
    SceneTarget,
    build_scene,
    classify_and_carve,
    classify_and_carve_brute_force,
    depth_to_points,
)

__all__ = [
    'SceneState',
    'SceneTarget',
    'VoxelConfig',
    'VoxelGrid',
    'build_scene',
    'classify_and_carve',
    'classify_and_carve_brute_force',
    'colliding_voxels',
    'colliding_voxels_brute_force',
    'depth_to_points',
    'voxel_overlap_count',
    'voxels_collide',
    'voxels_collide_brute_force',
]
