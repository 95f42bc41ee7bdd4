import numpy as np
import pytest

from src.errors import ParseError, VersionMismatch
from src.geometry import Pose, Rotation
from src.mesh import distance_to_mesh, primitives, sample_surface
from src.perception import CameraConfig, DepthImage, RenderItem, corrupt_depth, default_presets, render_scene
from src.scene import (
    SceneTarget,
    VoxelConfig,
    VoxelGrid,
    build_scene,
    classify_and_carve,
    depth_to_points,
    voxels_collide,
)
from src.scene.state import classify_and_carve_brute_force
from src.scene.voxels import colliding_voxels, colliding_voxels_brute_force, voxels_collide_brute_force


@pytest.fixture(scope='module')
def intrinsics():
    return CameraConfig().intrinsics()


def _sorted_rows(indices):
    indices = np.asarray(indices).reshape(-1, 3)
    return indices[np.lexsort(indices.T[::-1])]


# =============================================================================
# DEPTH TO POINTS
# =============================================================================

def test_empty_depth_gives_no_points(intrinsics):
    points = depth_to_points(DepthImage(np.zeros(intrinsics.shape), intrinsics), intrinsics, Pose.identity())
    assert points.shape == (0, 3)


def test_frontal_plane_points(intrinsics):
    camera = Pose.from_translation((0.0, 0.0, 0.3))
    points = depth_to_points(DepthImage(np.ones(intrinsics.shape), intrinsics), intrinsics, camera)
    assert len(points) == intrinsics.width * intrinsics.height
    assert np.allclose(points[:, 2], 1.3)


def test_rendered_cube_points_lie_on_surface(intrinsics, cube_model):
    camera = Pose.look_at((0.05, -0.1, 0.4), (0.0, 0.0, 0.0))
    pose = Pose(Rotation.from_axis_angle((0, 0, 1), 0.5))
    render = render_scene([RenderItem(1, cube_model.mesh, pose)], camera, intrinsics)
    points = depth_to_points(render.depth, intrinsics, camera)
    assert len(points) > 50
    assert np.all(distance_to_mesh(cube_model.mesh, points, pose) < VoxelConfig().resolution)


# =============================================================================
# CARVING
# =============================================================================

def _grid(res=0.005):
    return VoxelGrid.covering((-0.1, -0.1, 0.0), (0.1, 0.1, 0.2), res)


def test_covering_dims():
    grid = _grid()
    assert grid.dims == (40, 40, 40)
    index, inside = grid.voxel_of(np.array([[0.0025, 0.0025, 0.0025], [0.5, 0.0, 0.0]]))
    assert index[0].tolist() == [20, 20, 0]
    assert inside.tolist() == [True, False]


def test_explained_points_are_not_carved(cube_model):
    target = (cube_model.mesh, Pose.from_translation((0.0, 0.0, 0.05)))
    on_surface = np.array([[0.0, 0.0, 0.065], [0.001, 0.0, 0.065]])
    above = np.array([[0.0025, 0.0025, 0.1625], [0.0035, 0.0025, 0.1625]])
    carved = classify_and_carve(np.vstack([on_surface, above]), [target], [], 0.008, _grid())
    assert carved.occupied_count == 1
    index, _ = carved.voxel_of(above[:1])
    assert carved.occupancy[tuple(index[0])]


def test_min_points_per_voxel():
    single = np.array([[0.0, 0.0, 0.1]])
    assert classify_and_carve(single, [], [], 0.008, _grid(), min_points=2).occupied_count == 0
    assert classify_and_carve(single, [], [], 0.008, _grid(), min_points=1).occupied_count == 1


def test_carving_matches_brute_force(intrinsics, cube_model, box_model):
    instances = [
        (1, cube_model, Pose.from_translation((0.0, 0.0, 0.015))),
        (2, box_model, Pose(Rotation.from_axis_angle((0, 0, 1), 0.7), (0.05, 0.02, 0.010))),
        (3, cube_model, Pose(Rotation.from_axis_angle((1, 0, 0), 0.3), (-0.04, 0.03, 0.02))),
    ]
    floor = (primitives.box((0.3, 0.3, 0.01)), Pose.from_translation((0.0, 0.0, -0.005)))
    items = [RenderItem(i, m.mesh, p) for i, m, p in instances] + [RenderItem(-1, *floor)]
    camera = Pose.look_at((0.02, -0.05, 0.35), (0.0, 0.0, 0.0))
    render = render_scene(items, camera, intrinsics)
    noisy = corrupt_depth(render.depth, render.normals, default_presets()['raw'], seed=2)
    points = depth_to_points(noisy, intrinsics, camera)
    # Only the first instance is a known target; the others must show up as voxels.
    targets = [(cube_model.mesh, instances[0][2])]
    fast = classify_and_carve(points, targets, [floor], 0.008, _grid(), 2)
    slow = classify_and_carve_brute_force(points, targets, [floor], 0.008, _grid(), 2)
    assert np.array_equal(fast.occupancy, slow.occupancy)
    assert fast.occupied_count > 0


def test_looser_tolerance_never_adds_voxels(rng, cube_model):
    target = (cube_model.mesh, Pose.from_translation((0.0, 0.0, 0.05)))
    near = sample_surface(cube_model.mesh, 400, seed=5).points + np.array([0.0, 0.0, 0.05])
    near += rng.normal(scale=0.004, size=near.shape)
    clutter = rng.uniform((-0.1, -0.1, 0.0), (0.1, 0.1, 0.2), size=(600, 3))
    points = np.vstack([near, clutter])
    previous = None
    for tolerance in (0.001, 0.004, 0.008, 0.02):
        occupancy = classify_and_carve(points, [target], [], tolerance, _grid(), min_points=1).occupancy
        if previous is not None:
            assert not np.any(occupancy & ~previous)
        previous = occupancy


# =============================================================================
# COLLISION QUERIES
# =============================================================================

def test_empty_grid_never_collides(cube_model):
    assert not voxels_collide(_grid(), cube_model.mesh, Pose.from_translation((0.0, 0.0, 0.05)))


def test_voxel_inside_mesh_collides(cube_model):
    grid = _grid()
    pose = Pose.from_translation((0.0, 0.0, 0.05))
    index, _ = grid.voxel_of(pose.translation[None, :])
    occupancy = np.zeros(grid.dims, dtype=bool)
    occupancy[tuple(index[0])] = True
    grid = grid.with_occupancy(occupancy)
    assert voxels_collide(grid, cube_model.mesh, pose)
    assert not voxels_collide(grid, cube_model.mesh, Pose.from_translation((0.05, 0.0, 0.05)))


def test_voxel_collisions_match_brute_force(rng, bracket_mesh):
    grid = VoxelGrid.covering((-0.03, -0.03, -0.03), (0.03, 0.03, 0.03), 0.005,
                              frame=Pose(Rotation.from_axis_angle((0, 0, 1), 0.2), (0.0, 0.0, 0.01)))
    grid = grid.with_occupancy(rng.random(grid.dims) < 0.08)
    for _ in range(10):
        pose = Pose(Rotation.random(rng), rng.uniform(-0.02, 0.02, size=3))
        fast = colliding_voxels(grid, bracket_mesh, pose)
        slow = colliding_voxels_brute_force(grid, bracket_mesh, pose)
        assert np.array_equal(_sorted_rows(fast), _sorted_rows(slow))
        assert voxels_collide(grid, bracket_mesh, pose) == voxels_collide_brute_force(grid, bracket_mesh, pose)


def test_voxel_collisions_survive_a_joint_rigid_move(rng, bracket_mesh):
    grid = VoxelGrid.covering((-0.03, -0.03, -0.03), (0.03, 0.03, 0.03), 0.005)
    grid = grid.with_occupancy(rng.random(grid.dims) < 0.08)
    for _ in range(10):
        pose = Pose(Rotation.random(rng), rng.uniform(-0.02, 0.02, size=3))
        move = Pose(Rotation.random(rng), rng.uniform(-1.0, 1.0, size=3))
        moved = VoxelGrid(grid.origin, grid.resolution, grid.dims, grid.occupancy, move @ grid.frame)
        before = colliding_voxels(grid, bracket_mesh, pose)
        after = colliding_voxels(moved, bracket_mesh, move @ pose)
        assert np.array_equal(_sorted_rows(before), _sorted_rows(after))
        assert voxels_collide(grid, bracket_mesh, pose) == voxels_collide(moved, bracket_mesh, move @ pose)


# =============================================================================
# DUMPS
# =============================================================================

def test_voxel_dump_and_load(tmp_path, rng):
    grid = VoxelGrid.covering((0.0, 0.0, 0.0), (0.05, 0.04, 0.03), 0.005, frame=Pose.from_translation((1.0, 0.0, 0.0)))
    grid = grid.with_occupancy(rng.random(grid.dims) < 0.3)
    header_path, data_path = grid.dump(tmp_path / 'voxels_0001')
    assert header_path.name == 'voxels_0001.json'
    assert data_path.stat().st_size == 4 * len(grid.run_lengths())
    loaded = VoxelGrid.load(tmp_path / 'voxels_0001')
    assert np.array_equal(loaded.occupancy, grid.occupancy)
    assert loaded.frame.isclose(grid.frame)


def test_voxel_load_errors(tmp_path):
    grid = VoxelGrid.covering((0.0, 0.0, 0.0), (0.01, 0.01, 0.01), 0.005)
    grid.dump(tmp_path / 'grid')
    (tmp_path / 'grid.rle').write_bytes(b'\x01\x00\x00')
    with pytest.raises(ParseError):
        VoxelGrid.load(tmp_path / 'grid')
    (tmp_path / 'grid.json').write_text('{"format_version": 99}')
    with pytest.raises(VersionMismatch):
        VoxelGrid.load(tmp_path / 'grid')


# =============================================================================
# SNAPSHOT
# =============================================================================

def test_build_scene_snapshot(cube_model):
    targets = [
        SceneTarget(1, cube_model, Pose.from_translation((0.0, 0.0, 0.02)), 0.9),
        SceneTarget(2, cube_model, Pose.from_translation((0.05, 0.0, 0.05)), 0.8),
    ]
    points = np.array([[0.0, 0.0, 0.035], [0.0025, 0.0025, 0.1525], [0.0035, 0.0025, 0.1525]])
    scene = build_scene(targets, [], points, _grid(), VoxelConfig(), iteration=3,
                        bin_frame=Pose.identity(), floor_z=0.0, excluded=[2])
    assert [t.track_id for t in scene.plannable] == [1]
    assert scene.target(2) is targets[1]
    assert scene.target(7) is None
    assert scene.fill_height == pytest.approx(0.05)
    assert scene.voxels.occupied_count == 1


def test_explainers_hide_points_without_becoming_targets(cube_model):
    body = (cube_model.mesh, Pose.from_translation((0.0, 0.0, 0.1)))
    points = np.array([[0.0, 0.0, 0.115], [0.001, 0.0, 0.115]])
    scene = build_scene([], [], points, _grid(), VoxelConfig(), 0, Pose.identity(), 0.0, explainers=[body])
    assert scene.voxels.occupied_count == 0
    assert scene.targets == ()
    assert scene.fill_height == 0.0
