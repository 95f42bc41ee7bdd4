import numpy as np
import pytest

from src.errors import EmptyInput, InvalidInput
from src.geometry import (
    Pose,
    Rotation,
    angular_distance,
    average_rotations,
    average_translations,
    translation_distance,
)


# =============================================================================
# ROTATIONS
# =============================================================================

def test_quaternion_is_normalized():
    r = Rotation(np.array([2.0, 0.0, 0.0, 0.0]))
    assert np.isclose(np.linalg.norm(r.q), 1.0)
    assert r == Rotation.identity()


def test_zero_quaternion_rejected():
    with pytest.raises(InvalidInput):
        Rotation(np.zeros(4))


def test_negated_quaternion_is_same_rotation():
    r = Rotation.from_axis_angle((0, 0, 1), 0.7)
    flipped = Rotation(-r.q)
    assert r == flipped
    assert angular_distance(r, flipped) == pytest.approx(0.0, abs=1e-12)


def test_axis_angle_matches_matrix():
    r = Rotation.from_axis_angle((0, 0, 1), np.pi / 2)
    assert np.allclose(r.apply([1.0, 0.0, 0.0]), [0.0, 1.0, 0.0])
    assert r.angle == pytest.approx(np.pi / 2)
    assert np.allclose(Rotation.from_matrix(r.as_matrix()).as_matrix(), r.as_matrix())


def test_angular_distance_range_and_symmetry(rng):
    for _ in range(50):
        a, b = Rotation.random(rng), Rotation.random(rng)
        d = angular_distance(a, b)
        assert 0.0 <= d <= np.pi + 1e-12
        assert d == pytest.approx(angular_distance(b, a))


def test_angular_distance_triangle_inequality(rng):
    for _ in range(200):
        a, b, c = Rotation.random(rng), Rotation.random(rng), Rotation.random(rng)
        assert angular_distance(a, c) <= angular_distance(a, b) + angular_distance(b, c) + 1e-7


def test_angular_distance_matches_trace_formula(rng):
    a, b = Rotation.random(rng), Rotation.random(rng)
    trace = np.trace(a.as_matrix() @ b.as_matrix().T)
    expected = np.arccos(np.clip((trace - 1.0) / 2.0, -1.0, 1.0))
    assert angular_distance(a, b) == pytest.approx(expected, abs=1e-7)


def test_angular_distance_of_half_turn():
    flip = Rotation.from_axis_angle((1, 0, 0), np.pi)
    assert angular_distance(Rotation.identity(), flip) == pytest.approx(np.pi)


def test_composition_and_inverse(rng):
    a = Rotation.random(rng)
    assert (a * a.inverse()).isclose(Rotation.identity(), atol=1e-12)
    v = rng.normal(size=3)
    b = Rotation.random(rng)
    assert np.allclose((a * b).apply(v), a.apply(b.apply(v)))


def test_canonical_has_nonnegative_scalar():
    r = Rotation(np.array([-0.5, 0.5, 0.5, 0.5]))
    assert r.canonical()[0] >= 0


# =============================================================================
# AVERAGING
# =============================================================================

def test_average_of_identical_rotations(rng):
    r = Rotation.random(rng)
    assert average_rotations([r, r, r]).isclose(r, atol=1e-9)


def test_average_is_sign_invariant(rng):
    r = Rotation.random(rng)
    s = Rotation.from_axis_angle((0, 1, 0), 0.1) * r
    mean = average_rotations([r, s])
    mean_flipped = average_rotations([Rotation(-r.q), s])
    assert mean.isclose(mean_flipped, atol=1e-9)


def test_average_of_symmetric_spread_is_center():
    left = Rotation.from_axis_angle((0, 0, 1), 0.3)
    right = Rotation.from_axis_angle((0, 0, 1), -0.3)
    assert average_rotations([left, right]).isclose(Rotation.identity(), atol=1e-9)


def test_weights_pull_the_mean():
    a = Rotation.identity()
    b = Rotation.from_axis_angle((0, 0, 1), 0.4)
    mean = average_rotations([a, b], weights=[1.0, 3.0])
    assert angular_distance(mean, b) < angular_distance(mean, a)


def test_average_rejects_empty_and_bad_weights():
    with pytest.raises(EmptyInput):
        average_rotations([])
    with pytest.raises(InvalidInput):
        average_rotations([Rotation.identity()], weights=[-1.0])
    with pytest.raises(InvalidInput):
        average_rotations([Rotation.identity()], weights=[0.0])
    with pytest.raises(EmptyInput):
        average_translations([])


def test_average_translations_weighted():
    mean = average_translations([np.zeros(3), np.array([1.0, 0.0, 0.0])], weights=[1.0, 3.0])
    assert np.allclose(mean, [0.75, 0.0, 0.0])


# =============================================================================
# POSES
# =============================================================================

def test_pose_compose_with_inverse_is_identity(rng):
    pose = Pose(Rotation.random(rng), rng.normal(size=3))
    assert (pose @ pose.inverse()).isclose(Pose.identity(), angle_tol=1e-9, dist_tol=1e-12)
    assert (pose.inverse() @ pose).isclose(Pose.identity(), angle_tol=1e-9, dist_tol=1e-12)


def test_pose_composition_matches_matrices(rng):
    a = Pose(Rotation.random(rng), rng.normal(size=3))
    b = Pose(Rotation.random(rng), rng.normal(size=3))
    assert np.allclose((a @ b).as_matrix(), a.as_matrix() @ b.as_matrix())
    p = rng.normal(size=(4, 3))
    assert np.allclose((a @ b).apply(p), a.apply(b.apply(p)))


def test_pose_composition_is_associative(rng):
    for _ in range(50):
        a, b, c = (Pose(Rotation.random(rng), rng.normal(size=3)) for _ in range(3))
        assert ((a @ b) @ c).isclose(a @ (b @ c), angle_tol=1e-9, dist_tol=1e-12)


def test_look_at_points_z_at_target():
    eye = np.array([0.1, -0.2, 0.5])
    target = np.array([0.0, 0.0, 0.0])
    pose = Pose.look_at(eye, target)
    expected = (target - eye) / np.linalg.norm(target - eye)
    assert np.allclose(pose.axis(2), expected)
    assert np.allclose(np.cross(pose.axis(0), pose.axis(1)), pose.axis(2))
    assert np.allclose(pose.translation, eye)


def test_look_at_straight_down_uses_fallback_hint():
    pose = Pose.look_at([0.0, 0.0, 1.0], [0.0, 0.0, 0.0], up_hint=(0.0, 0.0, 1.0))
    assert np.allclose(pose.axis(2), [0.0, 0.0, -1.0])


def test_look_at_rejects_coincident_points():
    with pytest.raises(InvalidInput):
        Pose.look_at([0.0, 0.0, 0.0], [0.0, 0.0, 0.0])


def test_pose_list_form(rng):
    pose = Pose(Rotation.random(rng), rng.normal(size=3))
    values = pose.to_list()
    assert len(values) == 7
    assert values[0] >= 0
    assert Pose.from_list(values).isclose(pose, angle_tol=1e-12, dist_tol=0.0)
    with pytest.raises(InvalidInput):
        Pose.from_list(values[:6])


def test_translation_distance():
    a = Pose.from_translation([0.0, 0.0, 0.0])
    b = Pose.from_translation([0.0, 3.0, 4.0])
    assert translation_distance(a, b) == pytest.approx(5.0)
