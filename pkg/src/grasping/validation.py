"""
Grasp Validation
----------------

Two-stage feasibility check for a scored grasp.

Stage 1 (static) looks at the grasp pose alone: the pose must lie inside the
reachability proxy, and the opened gripper must touch neither the fixtures,
nor other validated objects, nor occupied voxels.

Stage 2 (trajectory) sweeps the gripper along pre-grasp -> grasp -> lift ->
retreat. Fixtures stay strict at every step; occupied voxels and neighboring
objects may be brushed within a penetration budget.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.geometry import Pose
from src.grasping.gripper import GripperModel, GripperPart
from src.mesh import TriangleMesh, contains_points, distance_to_mesh, meshes_intersect, meshes_intersect_brute_force
from src.scene import SceneState, SceneTarget, colliding_voxels, colliding_voxels_brute_force

logger = logging.getLogger(__name__)

DOWN = np.array([0.0, 0.0, -1.0])


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class ReachModel:
    """Reachability proxy: spherical shell about the robot base plus a tilt limit"""
    base: Tuple[float, float, float] = (0.0, -0.55, 0.0)    # meters, world
    r_min: float = 0.20                 # meters
    r_max: float = 0.95                 # meters
    max_tilt_deg: float = 60.0          # degrees between the approach axis and straight down

    def __post_init__(self):
        object.__setattr__(self, 'base', tuple(float(v) for v in self.base))
        if not 0 <= self.r_min < self.r_max:
            raise InvalidInput(f"reach shell needs 0 <= r_min < r_max, got {self.r_min}, {self.r_max}")
        if not 0 < self.max_tilt_deg <= 180:
            raise InvalidInput(f"max_tilt_deg must lie in (0, 180], got {self.max_tilt_deg}")

    def reachable(self, pose: Pose, axis: int = 2) -> bool:
        """True when ``pose`` lies in the shell and its ``axis`` tilts at most ``max_tilt_deg`` from down."""
        distance = float(np.linalg.norm(pose.translation - np.asarray(self.base)))
        if not self.r_min <= distance <= self.r_max:
            return False
        cosine = float(np.clip(np.dot(pose.axis(axis), DOWN), -1.0, 1.0))
        return math.degrees(math.acos(cosine)) <= self.max_tilt_deg + 1e-9


@dataclass(frozen=True)
class MotionConfig:
    """End-effector trajectory construction and sweep checking"""
    pre_grasp_offset: float = 0.080     # meters back along the approach
    lift_clearance: float = 0.050       # meters above the bin rim
    max_step: float = 0.005             # meters between swept samples (also capped by voxel size)
    max_soft_voxels: int = 12           # occupied voxels touched at one sample
    max_penetration: float = 0.005      # meters into a neighboring object
    max_speed: float = 0.25             # m/s
    max_accel: float = 0.50             # m/s^2

    def __post_init__(self):
        if self.pre_grasp_offset <= 0 or self.max_step <= 0:
            raise InvalidInput("pre_grasp_offset and max_step must be positive")
        if self.max_speed <= 0 or self.max_accel <= 0:
            raise InvalidInput("max_speed and max_accel must be positive")
        if self.max_soft_voxels < 0 or self.max_penetration < 0:
            raise InvalidInput("penetration budgets must be >= 0")


class FailReason(Enum):
    UNREACHABLE = "unreachable"
    STATIC_HIT = "static_hit"
    OBJECT_HIT = "object_hit"
    VOXEL_HIT = "voxel_hit"


class StageResult(NamedTuple):
    reason: Optional[FailReason] = None
    waypoint: Optional[int] = None

    @property
    def ok(self) -> bool:
        return self.reason is None


PASS = StageResult()


# =============================================================================
# HELPERS
# =============================================================================

def _world_bounds(mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    lo, hi = mesh.bounds
    corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
    world = pose.apply(corners)
    return np.stack([world.min(axis=0), world.max(axis=0)])


def _boxes_overlap(a: np.ndarray, b: np.ndarray) -> bool:
    return bool(np.all(a[0] <= b[1]) and np.all(b[0] <= a[1]))


def _hits_any(parts: Sequence[GripperPart], bodies: Sequence[Tuple[TriangleMesh, Pose]],
              brute_force: bool = False) -> bool:
    intersect = meshes_intersect_brute_force if brute_force else meshes_intersect
    return any(intersect(part.mesh, part.pose, mesh, pose) for part in parts for mesh, pose in bodies)


def _soft_voxels(parts: Sequence[GripperPart], scene: SceneState, brute_force: bool = False) -> int:
    if scene.voxels.occupied_count == 0:
        return 0
    query = colliding_voxels_brute_force if brute_force else colliding_voxels
    hits = [query(scene.voxels, part.mesh, part.pose) for part in parts]
    hits = [h for h in hits if len(h)]
    if not hits:
        return 0
    return int(len(np.unique(np.concatenate(hits), axis=0)))


def penetration_depth(a: TriangleMesh, pose_a: Pose, b: TriangleMesh, pose_b: Pose) -> float:
    """
    Vertex-depth estimate of how far two posed meshes overlap: the deepest
    vertex of either mesh inside the other. Touching meshes without an
    enclosed vertex report 0.
    """
    if not meshes_intersect(a, pose_a, b, pose_b):
        return 0.0
    depth = 0.0
    for inner, inner_pose, outer, outer_pose in ((a, pose_a, b, pose_b), (b, pose_b, a, pose_a)):
        vertices = inner_pose.apply(inner.vertices)
        inside = contains_points(outer, vertices, outer_pose)
        if inside.any():
            depth = max(depth, float(distance_to_mesh(outer, vertices[inside], outer_pose).max()))
    return depth


def target_bodies(scene: SceneState, exclude_track: int) -> List[Tuple[TriangleMesh, Pose]]:
    return [t.body for t in scene.targets if t.track_id != exclude_track]


# =============================================================================
# STAGE 1: STATIC POSE
# =============================================================================

def static_pose_validation(ee_pose: Pose, width: float, track_id: int, scene: SceneState,
                           gripper: GripperModel, reach: ReachModel) -> StageResult:
    """
    Check the grasp pose itself. The fingers are exempt against the target
    object, which they close on; palm and wrist are not.
    """
    if not reach.reachable(ee_pose):
        return StageResult(FailReason.UNREACHABLE)
    parts = gripper.assembly(width, ee_pose)
    if _hits_any(parts, scene.statics):
        return StageResult(FailReason.STATIC_HIT)
    if _hits_any(parts, target_bodies(scene, track_id)):
        return StageResult(FailReason.OBJECT_HIT)
    target = scene.target(track_id)
    hand = [p for p in parts if not p.name.startswith('finger')]
    if target is not None and _hits_any(hand, [target.body]):
        return StageResult(FailReason.OBJECT_HIT)
    if _soft_voxels(parts, scene) > 0:
        return StageResult(FailReason.VOXEL_HIT)
    return PASS


# =============================================================================
# STAGE 2: TRAJECTORY
# =============================================================================

WAYPOINT_LABELS = ('pre_grasp', 'grasp', 'lift', 'retreat')


@dataclass(frozen=True, eq=False)
class GraspTrajectory:
    """
    End-effector waypoints with timestamps from a trapezoidal speed profile.
    The gripper is open for ``width`` up to the grasp and holds the object
    afterwards.
    """
    waypoints: Tuple[Pose, ...]
    timestamps: Tuple[float, ...]
    width: float
    track_id: int
    step: float
    max_soft_voxels: int = 0
    max_penetration: float = 0.0

    @property
    def labels(self) -> Tuple[str, ...]:
        return WAYPOINT_LABELS[:len(self.waypoints)]

    @property
    def duration(self) -> float:
        return self.timestamps[-1]

    def to_dict(self):
        return {
            'waypoints': [p.to_list() for p in self.waypoints],
            'timestamps': list(self.timestamps),
            'width': self.width,
            'track_id': self.track_id,
        }


class TrajectoryResult(NamedTuple):
    trajectory: Optional[GraspTrajectory]
    failure: StageResult

    @property
    def ok(self) -> bool:
        return self.trajectory is not None


def trapezoid_duration(length: float, max_speed: float, max_accel: float) -> float:
    """Rest-to-rest travel time over ``length`` with bounded speed and acceleration."""
    if length <= 0:
        return 0.0
    ramp = max_speed * max_speed / max_accel
    if length >= ramp:
        return length / max_speed + max_speed / max_accel
    return 2.0 * math.sqrt(length / max_accel)


def build_waypoints(ee_pose: Pose, scene: SceneState, motion: MotionConfig) -> List[Pose]:
    """Pre-grasp, grasp, vertical lift above the rim, then retreat over the bin center."""
    pre = ee_pose.with_translation(ee_pose.translation - motion.pre_grasp_offset * ee_pose.axis(2))
    rim = max((float(_world_bounds(mesh, pose)[1, 2]) for mesh, pose in scene.statics), default=scene.floor_z)
    lift_z = max(rim, float(ee_pose.translation[2])) + motion.lift_clearance
    lift = ee_pose.with_translation((ee_pose.translation[0], ee_pose.translation[1], lift_z))
    center = scene.bin_frame.translation
    retreat = ee_pose.with_translation((center[0], center[1], lift_z))
    return [pre, ee_pose, lift, retreat]


def sweep_poses(waypoints: Sequence[Pose], step: float) -> List[Tuple[int, Pose]]:
    """
    Straight-line samples between consecutive waypoints (orientation held),
    tagged with the index of the segment's starting waypoint.
    """
    samples = [(0, waypoints[0])]
    for index in range(len(waypoints) - 1):
        start, end = waypoints[index].translation, waypoints[index + 1].translation
        count = max(1, math.ceil(float(np.linalg.norm(end - start)) / step - 1e-9))
        for k in range(1, count + 1):
            point = start + (end - start) * (k / count)
            samples.append((index, waypoints[index + 1].with_translation(point)))
    return samples


def _sweep(waypoints: Sequence[Pose], width: float, target: SceneTarget, scene: SceneState,
           gripper: GripperModel, step: float, brute_force: bool = False):
    """Yields ``(segment, strict_hit, soft_voxels, penetration)`` per sample."""
    ee_to_object = waypoints[1].inverse() @ target.pose
    intersect = meshes_intersect_brute_force if brute_force else meshes_intersect
    samples = sweep_poses(waypoints, step)

    swept = np.stack([_world_bounds(p.mesh, p.pose)
                      for _, pose in samples for p in gripper.assembly(width, pose)])
    swept = np.stack([swept[:, 0].min(axis=0), swept[:, 1].max(axis=0)])
    neighbors = [body for body in target_bodies(scene, target.track_id)
                 if _boxes_overlap(_world_bounds(*body), swept)]

    for segment, pose in samples:
        parts = gripper.assembly(width, pose)
        strict = _hits_any(parts, scene.statics, brute_force)
        # The object travels with the gripper; the vertical lift leaves along
        # its own footprint, so only the retreat is checked.
        if not strict and segment >= 2:
            carried = pose @ ee_to_object
            strict = any(intersect(target.model.mesh, carried, mesh, body_pose) for mesh, body_pose in scene.statics)
        soft = _soft_voxels(parts, scene, brute_force)
        depth = 0.0
        for part in parts:
            for mesh, body_pose in neighbors:
                depth = max(depth, penetration_depth(part.mesh, part.pose, mesh, body_pose))
        yield segment, strict, soft, depth


def trajectory_validation(ee_pose: Pose, width: float, target: SceneTarget, scene: SceneState,
                          gripper: GripperModel, motion: MotionConfig) -> TrajectoryResult:
    """
    Build and sweep the pick trajectory.

    Returns:
        ``TrajectoryResult`` with the trajectory, or the failure reason and the
        index of the waypoint that starts the offending segment.
    """
    waypoints = build_waypoints(ee_pose, scene, motion)
    step = min(motion.max_step, scene.voxels.resolution)
    worst_soft, worst_depth = 0, 0.0
    for segment, strict, soft, depth in _sweep(waypoints, width, target, scene, gripper, step):
        if strict:
            return TrajectoryResult(None, StageResult(FailReason.STATIC_HIT, segment))
        if soft > motion.max_soft_voxels:
            return TrajectoryResult(None, StageResult(FailReason.VOXEL_HIT, segment))
        if depth > motion.max_penetration:
            return TrajectoryResult(None, StageResult(FailReason.OBJECT_HIT, segment))
        worst_soft, worst_depth = max(worst_soft, soft), max(worst_depth, depth)

    times = [0.0]
    for a, b in zip(waypoints[:-1], waypoints[1:]):
        length = float(np.linalg.norm(b.translation - a.translation))
        times.append(times[-1] + trapezoid_duration(length, motion.max_speed, motion.max_accel))
    trajectory = GraspTrajectory(tuple(waypoints), tuple(times), width, target.track_id, step, worst_soft, worst_depth)
    return TrajectoryResult(trajectory, PASS)


class ReplayReport(NamedTuple):
    samples: int
    static_hits: int
    max_soft_voxels: int
    max_penetration: float
    max_step: float
    descent_monotone: bool


def replay_trajectory(trajectory: GraspTrajectory, target: SceneTarget, scene: SceneState,
                      gripper: GripperModel) -> ReplayReport:
    """
    Re-sweep a produced trajectory with the brute-force collision oracles and
    report what the executor would meet.
    """
    waypoints = list(trajectory.waypoints)
    samples = sweep_poses(waypoints, trajectory.step)
    steps = [float(np.linalg.norm(b.translation - a.translation)) for (_, a), (_, b) in zip(samples, samples[1:])]

    approach = waypoints[1].axis(2)
    descent = [float(np.dot(p.translation - waypoints[0].translation, approach)) for seg, p in samples if seg == 0]
    monotone = all(b >= a - 1e-12 for a, b in zip(descent, descent[1:]))

    hits, worst_soft, worst_depth = 0, 0, 0.0
    for _, strict, soft, depth in _sweep(waypoints, trajectory.width, target, scene, gripper,
                                         trajectory.step, brute_force=True):
        hits += int(strict)
        worst_soft, worst_depth = max(worst_soft, soft), max(worst_depth, depth)
    return ReplayReport(len(samples), hits, worst_soft, worst_depth, max(steps, default=0.0), monotone)
