import numpy as np
import pytest

from src.errors import InvalidDepth
from src.geometry import Pose, Rotation
from src.mesh import primitives
from src.perception import (
    CameraConfig,
    CameraIntrinsics,
    DepthImage,
    DepthNoisePreset,
    EstimatorConfig,
    PoseEstimate,
    RejectionConfig,
    RejectionRule,
    RenderItem,
    Verdict,
    corrupt_depth,
    default_presets,
    emit_pose_estimates,
    filter_estimates,
    project_bb_center,
    rejection_filter,
    render_scene,
)


@pytest.fixture(scope='module')
def intrinsics():
    return CameraConfig().intrinsics()


def _frontal_plane(intrinsics):
    wall = primitives.box((10.0, 10.0, 0.2))
    return render_scene([RenderItem(1, wall, Pose.from_translation((0.0, 0.0, 1.1)))], Pose.identity(), intrinsics)


def _grazing_normals(intrinsics, angle_deg):
    rays = intrinsics.pixel_rays()
    rays = rays / np.linalg.norm(rays, axis=1, keepdims=True)
    side = np.cross(rays, [1.0, 0.0, 0.0])
    side /= np.linalg.norm(side, axis=1, keepdims=True)
    angle = np.radians(angle_deg)
    normals = -np.cos(angle) * rays + np.sin(angle) * side
    return normals.reshape(intrinsics.height, intrinsics.width, 3)


# =============================================================================
# CAMERA
# =============================================================================

def test_intrinsics_validation():
    with pytest.raises(ValueError):
        CameraIntrinsics(0.0, 200.0, 95.5, 71.5, 192, 144)
    with pytest.raises(ValueError):
        CameraIntrinsics(200.0, 200.0, 500.0, 71.5, 192, 144)


def test_project_bb_center_examples():
    pinhole = CameraIntrinsics(600.0, 600.0, 320.0, 240.0, 640, 480)
    assert np.allclose(project_bb_center(pinhole, (320.0, 240.0), 1.0), [0.0, 0.0, 1.0])
    assert np.allclose(project_bb_center(pinhole, (920.0, 240.0), 2.0), [2.0, 0.0, 2.0])
    once = project_bb_center(pinhole, (400.0, 100.0), 0.7)
    twice = project_bb_center(pinhole, (400.0, 100.0), 1.4)
    assert np.allclose(twice, 2.0 * once)
    with pytest.raises(InvalidDepth):
        project_bb_center(pinhole, (320.0, 240.0), 0.0)


def test_project_inverts_back_project(intrinsics, rng):
    pixels = rng.uniform([0, 0], [191, 143], size=(20, 2))
    depth = rng.uniform(0.2, 2.0, size=20)
    points = intrinsics.back_project(pixels, depth)
    assert np.allclose(intrinsics.project(points), pixels)
    assert intrinsics.in_frustum(points).all()
    assert not intrinsics.in_frustum(-points).any()


# =============================================================================
# RENDERING AND DEPTH NOISE
# =============================================================================

def test_render_frontal_plane(intrinsics):
    result = _frontal_plane(intrinsics)
    assert result.depth.valid.all()
    assert np.allclose(result.depth.depth, 1.0)
    assert np.allclose(result.normals.reshape(-1, 3), [0.0, 0.0, -1.0])
    assert result.visible_fraction(1) == pytest.approx(1.0)


def test_render_empty_scene(intrinsics):
    result = render_scene([], Pose.identity(), intrinsics)
    assert not result.depth.depth.any()
    assert np.isnan(result.normals).all()


def test_render_cube_center_depth(intrinsics):
    cube = primitives.box((1.0, 1.0, 1.0))
    result = render_scene([RenderItem(1, cube, Pose.from_translation((0.0, 0.0, 1.0)))], Pose.identity(), intrinsics)
    assert result.depth.depth[71, 95] == pytest.approx(0.5)


def test_occlusion_lowers_visible_fraction(intrinsics):
    cube = primitives.box((0.03, 0.03, 0.03))
    items = [
        RenderItem(1, cube, Pose.from_translation((0.0, 0.0, 0.5))),
        RenderItem(2, cube, Pose.from_translation((0.0, 0.0, 0.4))),
    ]
    result = render_scene(items, Pose.identity(), intrinsics)
    assert result.visible_fraction(1) == pytest.approx(0.0)
    assert result.visible_fraction(2) == pytest.approx(1.0)


def test_identity_preset_is_noise_free(intrinsics):
    plane = _frontal_plane(intrinsics)
    clean = DepthNoisePreset('clean', 0.0)
    out = corrupt_depth(plane.depth, plane.normals, clean, seed=5)
    assert np.array_equal(out.depth, plane.depth.depth)


def test_enhanced_frontal_plane_keeps_pixels(intrinsics):
    plane = _frontal_plane(intrinsics)
    enhanced = default_presets()['enhanced']
    for seed in range(5):
        out = corrupt_depth(plane.depth, plane.normals, enhanced, seed=seed)
        assert out.valid_fraction >= 0.995


def test_raw_grazing_surface_drops_pixels(intrinsics):
    depth = DepthImage(np.ones(intrinsics.shape), intrinsics)
    normals = _grazing_normals(intrinsics, 80.0)
    raw = default_presets()['raw']
    for seed in range(5):
        out = corrupt_depth(depth, normals, raw, seed=seed)
        assert 1.0 - out.valid_fraction >= 0.15


def test_corrupt_depth_is_seeded_and_keeps_holes(intrinsics):
    values = np.ones(intrinsics.shape)
    values[:10] = 0.0
    depth = DepthImage(values, intrinsics)
    normals = _grazing_normals(intrinsics, 30.0)
    raw = default_presets()['raw']
    a = corrupt_depth(depth, normals, raw, seed=11)
    b = corrupt_depth(depth, normals, raw, seed=11)
    assert np.array_equal(a.depth, b.depth)
    assert not a.depth[:10].any()


def test_preset_validation():
    with pytest.raises(ValueError):
        DepthNoisePreset('bad', 0.001, (0.0, 90.0), (0.0,))
    with pytest.raises(ValueError):
        DepthNoisePreset('bad', 0.001, (0.0, 90.0), (0.0, 1.5))


def test_write_pgm(tmp_path, intrinsics):
    path = tmp_path / 'depth.pgm'
    DepthImage(np.full(intrinsics.shape, 0.5), intrinsics).write_pgm(path)
    data = path.read_bytes()
    header = b"P5\n192 144\n65535\n"
    assert data.startswith(header)
    assert len(data) == len(header) + 2 * 192 * 144
    assert data[len(header):len(header) + 2] == (500).to_bytes(2, 'big')


# =============================================================================
# POSE ESTIMATES
# =============================================================================

def _cube_scene(cube_model, intrinsics, positions):
    camera = Pose.look_at((0.04, -0.08, 0.45), (0.0, 0.0, 0.0))
    instances = [(i + 1, cube_model, Pose.from_translation(p)) for i, p in enumerate(positions)]
    items = [RenderItem(i, m.mesh, pose) for i, m, pose in instances]
    render = render_scene(items, camera, intrinsics)
    return camera, instances, render


def test_noiseless_estimates_equal_truth(cube_model, intrinsics):
    camera, instances, render = _cube_scene(cube_model, intrinsics, [(0.0, 0.0, 0.0), (0.06, 0.03, 0.0)])
    estimates = emit_pose_estimates(instances, camera, render, render.depth, EstimatorConfig.noiseless(), seed=0)
    assert [e.truth.instance_id for e in estimates] == [1, 2]
    for estimate, (_, _, truth) in zip(estimates, instances):
        assert estimate.to_world(camera).isclose(truth, angle_tol=1e-9, dist_tol=1e-9)
        assert estimate.iteration == 0


def test_rear_flip_moves_centroid_in_front_of_surface(cube_model, intrinsics):
    camera, instances, render = _cube_scene(cube_model, intrinsics, [(0.0, 0.0, 0.0), (-0.05, 0.02, 0.0)])
    config = EstimatorConfig(p_detect=1.0, p_rear=1.0, p_sym=0.0, p_outlier=0.0, hole_outlier_gain=0.0)
    estimates = emit_pose_estimates(instances, camera, render, render.depth, config, seed=3)
    assert estimates
    for estimate in estimates:
        surface = np.linalg.norm(project_bb_center(intrinsics, estimate.bbox_center, estimate.z_mean))
        assert np.linalg.norm(estimate.pose.translation) < surface


def test_hidden_object_is_not_detected(cube_model, intrinsics):
    camera = Pose.identity()
    instances = [(1, cube_model, Pose.from_translation((0.0, 0.0, 0.5))),
                 (2, cube_model, Pose.from_translation((0.0, 0.0, 0.4)))]
    items = [RenderItem(i, m.mesh, pose) for i, m, pose in instances]
    render = render_scene(items, camera, intrinsics)
    estimates = emit_pose_estimates(instances, camera, render, render.depth, EstimatorConfig.noiseless(), seed=0)
    assert [e.truth.instance_id for e in estimates] == [2]


def test_detection_rate_matches_configuration(cube_model, intrinsics):
    camera, instances, render = _cube_scene(cube_model, intrinsics, [(0.0, 0.0, 0.0)])
    config = EstimatorConfig()
    detected = sum(len(emit_pose_estimates(instances, camera, render, render.depth, config, seed=s))
                   for s in range(2000))
    assert abs(detected / 2000 - config.p_detect) <= 0.03


def test_same_seed_same_estimates(box_model, intrinsics):
    camera, instances, render = _cube_scene(box_model, intrinsics, [(0.0, 0.0, 0.0), (0.05, 0.0, 0.0)])
    a = emit_pose_estimates(instances, camera, render, render.depth, EstimatorConfig(), seed=9)
    b = emit_pose_estimates(instances, camera, render, render.depth, EstimatorConfig(), seed=9)
    assert len(a) == len(b)
    for x, y in zip(a, b):
        assert x.pose == y.pose
        assert x.confidence == y.confidence


# =============================================================================
# REJECTION FILTER
# =============================================================================

def _estimate(intrinsics, centroid_distance, surface_distance=0.50):
    return PoseEstimate('cube', Pose.from_translation((0.0, 0.0, centroid_distance)), 0.9,
                        (intrinsics.cx, intrinsics.cy), surface_distance, 0)


def test_rejection_rule_examples(intrinsics):
    assert rejection_filter(_estimate(intrinsics, 0.55), intrinsics, 0.005) is Verdict.KEEP
    assert rejection_filter(_estimate(intrinsics, 0.42), intrinsics, 0.005) is Verdict.REJECT
    assert rejection_filter(_estimate(intrinsics, 0.497), intrinsics, 0.005) is Verdict.KEEP
    assert rejection_filter(_estimate(intrinsics, 0.55), intrinsics, 0.005, RejectionRule.PRINTED) is Verdict.REJECT


def test_filter_estimates_split_and_disable(intrinsics):
    estimates = [_estimate(intrinsics, 0.55), _estimate(intrinsics, 0.42), _estimate(intrinsics, 0.60)]
    kept, rejected = filter_estimates(estimates, intrinsics, RejectionConfig())
    assert kept == [estimates[0], estimates[2]]
    assert rejected == [estimates[1]]
    kept, rejected = filter_estimates(estimates, intrinsics, RejectionConfig(enabled=False))
    assert kept == estimates and rejected == []


def test_rejection_catches_rear_flips(cube_model, intrinsics):
    positions = [(0.0, 0.0, 0.0), (0.05, 0.04, 0.0), (-0.05, 0.04, 0.0), (0.0, -0.05, 0.0)]
    camera, instances, render = _cube_scene(cube_model, intrinsics, positions)
    config = EstimatorConfig(p_rear=0.5, p_outlier=0.0, hole_outlier_gain=0.0)
    flips = flips_rejected = clean = clean_rejected = 0
    for seed in range(100):
        estimates = emit_pose_estimates(instances, camera, render, render.depth, config, seed=seed)
        _, rejected = filter_estimates(estimates, intrinsics, RejectionConfig())
        rejected_ids = {id(e) for e in rejected}
        for estimate in estimates:
            was_rejected = id(estimate) in rejected_ids
            if estimate.truth.rear_flip:
                flips += 1
                flips_rejected += was_rejected
            else:
                clean += 1
                clean_rejected += was_rejected
    assert flips > 50 and clean > 50
    assert flips_rejected / flips >= 0.99
    assert clean_rejected / clean <= 0.01
