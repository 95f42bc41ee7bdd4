"""
Grasp Execution
---------------

Closes the simulated gripper against the ground truth and reproduces the two
proprioceptive checks a real parallel-jaw gripper offers:

- position: finger separation after closing, ``d_fingers < epsilon`` means
  the fingers met without an object between them
- velocity: finger speed during the lift, ``|v_fingers| > epsilon`` means the
  object is slipping out

The closure is computed from the TRUE object poses, so a grasp planned on an
inaccurate estimate can miss or slip. Slip follows a friction-cone rule on
the true contact normals.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from src.errors import InvalidInput
from src.geometry import Pose
from src.grasping.gripper import GripperModel
from src.grasping.validation import GraspTrajectory
from src.mesh import contains_points, raycast_many
from src.simulation.bin_scene import BinScene, ObjectInstance, perturb_instance

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class VerificationConfig:
    """Proprioceptive verification and failure disturbance"""
    epsilon: float = 0.0001             # meters (0.1 mm), also m/s for the velocity check
    friction_half_angle_deg: float = 15.0
    slip_speed: float = 0.002           # m/s finger speed while an object slides out
    pad_rows: int = 5
    pad_cols: int = 5

    perturb_probability: float = 0.5
    perturb_max_shift: float = 0.010    # meters
    perturb_max_yaw_deg: float = 20.0   # degrees

    def __post_init__(self):
        if self.epsilon <= 0:
            raise InvalidInput(f"verification.epsilon must be positive, got {self.epsilon}")
        if not 0.0 < self.friction_half_angle_deg < 90.0:
            raise InvalidInput("verification.friction_half_angle_deg must lie in (0, 90)")
        if not 0.0 <= self.perturb_probability <= 1.0:
            raise InvalidInput("verification.perturb_probability must lie in [0, 1]")
        if self.slip_speed <= self.epsilon:
            raise InvalidInput("verification.slip_speed must exceed epsilon to be detectable")
        if self.perturb_max_shift < 0 or self.perturb_max_yaw_deg < 0:
            raise InvalidInput("perturbation bounds must be >= 0")


class ExecutionStatus(Enum):
    SUCCESS = "success"
    EMPTY = "empty"
    SLIP = "slip"


@dataclass(frozen=True)
class ExecutionResult:
    status: ExecutionStatus
    instance_id: Optional[int]          # object held (success) or touched (failure)
    d_fingers: float                    # meters, finger separation after closing
    v_fingers: float                    # m/s, finger speed during the lift
    normal_deviation_deg: Optional[float] = None
    detail: str = ''
    disturbed: bool = False

    @property
    def success(self) -> bool:
        return self.status is ExecutionStatus.SUCCESS

    def to_dict(self) -> Dict[str, Any]:
        return {
            'status': self.status.value,
            'instance_id': self.instance_id,
            'd_fingers': self.d_fingers,
            'v_fingers': self.v_fingers,
            'normal_deviation_deg': self.normal_deviation_deg,
            'detail': self.detail,
            'disturbed': self.disturbed,
        }


class FingerContact:
    """Where one closing finger first meets an object, if anywhere."""

    def __init__(self, travel: float, instance_id: Optional[int], normal: Optional[np.ndarray]):
        self.travel = travel
        self.instance_id = instance_id
        self.normal = normal

    @property
    def touched(self) -> bool:
        return self.instance_id is not None


def _nearby_instances(scene: BinScene, center: np.ndarray, reach: float) -> List[ObjectInstance]:
    nearby = []
    for instance in scene.instances.values():
        bounds = instance.bounds()
        gap = np.maximum(0.0, np.maximum(bounds[0] - center, center - bounds[1]))
        if float(np.linalg.norm(gap)) <= reach:
            nearby.append(instance)
    return sorted(nearby, key=lambda i: i.instance_id)


def _close_finger(pads: np.ndarray, direction: np.ndarray, max_travel: float,
                  instances: List[ObjectInstance]) -> FingerContact:
    """Sweep one finger pad along ``direction`` until its first contact."""
    best = FingerContact(max_travel, None, None)
    rays = np.broadcast_to(direction, pads.shape)
    for instance in instances:
        hits = raycast_many(instance.model.mesh, pads, rays, instance.pose)
        within = hits.hit & (hits.distance <= max_travel)
        if not within.any():
            continue
        k = int(np.argmin(np.where(within, hits.distance, np.inf)))
        if hits.distance[k] < best.travel:
            best = FingerContact(float(hits.distance[k]), instance.instance_id, hits.normals[k])
    return best


def _deviation_deg(normal: np.ndarray, expected: np.ndarray) -> float:
    cosine = float(np.clip(np.dot(normal, expected) / np.linalg.norm(normal), -1.0, 1.0))
    return float(np.degrees(np.arccos(cosine)))


def close_gripper(ee_pose: Pose, width: float, scene: BinScene, gripper: GripperModel,
                  config: VerificationConfig) -> Tuple[FingerContact, FingerContact, Optional[int]]:
    """
    Close both fingers from the grasp pose against the true scene.

    Returns:
        Left and right contacts, and the id of an instance a pad already sits
        inside (the fingers landed on it instead of around it), if any.
    """
    left_local, right_local = gripper.pad_points(width, config.pad_rows, config.pad_cols)
    left, right = ee_pose.apply(left_local), ee_pose.apply(right_local)
    stroke = ee_pose.axis(1)
    half_gap = 0.5 * gripper.finger_gap(width)
    nearby = _nearby_instances(scene, ee_pose.translation, half_gap + gripper.finger_length)

    # Pads already inside an object are skipped; a finger with no free pad is blocked.
    free_left = np.ones(len(left), dtype=bool)
    free_right = np.ones(len(right), dtype=bool)
    for instance in nearby:
        free_left &= ~contains_points(instance.model.mesh, left, instance.pose)
        free_right &= ~contains_points(instance.model.mesh, right, instance.pose)
        if not free_left.any() or not free_right.any():
            return FingerContact(0.0, None, None), FingerContact(0.0, None, None), instance.instance_id

    left_contact = _close_finger(left[free_left], stroke, half_gap, nearby)
    right_contact = _close_finger(right[free_right], -stroke, half_gap, nearby)
    return left_contact, right_contact, None


def simulate_grasp_execution(trajectory: GraspTrajectory, scene: BinScene, gripper: GripperModel,
                             config: VerificationConfig, seed: Optional[int] = None) -> ExecutionResult:
    """
    Execute a validated trajectory on the ground truth and update the scene.

    Success removes the grasped instance. On failure the touched instance (if
    any) is displaced by a bounded perturbation with probability
    ``perturb_probability``.

    Args:
        trajectory: Validated trajectory; its second waypoint is the grasp pose.
        scene: Ground truth, modified in place.
        gripper: Gripper geometry.
        config: Verification thresholds and disturbance bounds.
        seed: Seed of the disturbance generator.
    """
    rng = np.random.default_rng(seed)
    perturb_draw = rng.random()
    ee_pose = trajectory.waypoints[1]
    gap = gripper.finger_gap(trajectory.width)
    left, right, blocked = close_gripper(ee_pose, trajectory.width, scene, gripper, config)

    if blocked is not None:
        result = ExecutionResult(ExecutionStatus.EMPTY, blocked, 0.0, 0.0, detail='finger_blocked')
    elif not (left.touched and right.touched):
        touched = left.instance_id if left.touched else right.instance_id
        result = ExecutionResult(ExecutionStatus.EMPTY, touched, 0.0, 0.0,
                                 detail='no_contact' if touched is None else 'one_sided')
    else:
        d_fingers = max(0.0, gap - left.travel - right.travel)
        stroke = ee_pose.axis(1)
        deviation = max(_deviation_deg(left.normal, -stroke), _deviation_deg(right.normal, stroke))
        if d_fingers < config.epsilon:
            result = ExecutionResult(ExecutionStatus.EMPTY, left.instance_id, d_fingers, 0.0, deviation, 'closed')
        elif left.instance_id != right.instance_id:
            result = ExecutionResult(ExecutionStatus.SLIP, left.instance_id, d_fingers, config.slip_speed,
                                     deviation, 'two_objects')
        elif deviation > config.friction_half_angle_deg:
            result = ExecutionResult(ExecutionStatus.SLIP, left.instance_id, d_fingers, config.slip_speed,
                                     deviation, 'outside_friction_cone')
        else:
            result = ExecutionResult(ExecutionStatus.SUCCESS, left.instance_id, d_fingers, 0.0, deviation)

    if result.success:
        scene.remove(result.instance_id)
    elif result.instance_id is not None and perturb_draw < config.perturb_probability:
        moved = perturb_instance(scene, result.instance_id, rng, config.perturb_max_shift,
                                 config.perturb_max_yaw_deg)
        if moved:
            result = ExecutionResult(result.status, result.instance_id, result.d_fingers, result.v_fingers,
                                     result.normal_deviation_deg, result.detail, disturbed=True)

    logger.debug("track %d: %s (%s) d_fingers=%.4f", trajectory.track_id, result.status.value,
                 result.detail or 'ok', result.d_fingers)
    return result
