"""
Pose Estimate Emulator
----------------------

Stands in for a learned 6D pose estimator. For every sufficiently visible
object it draws a detection and perturbs the ground-truth pose with the
failure modes real estimators show:

- small Gaussian rotation / translation noise
- a symmetry-equivalent pose
- a rear-surface match that pulls the centroid toward the camera
- a gross outlier

Noise and outlier probability grow with the fraction of depth holes inside the
object mask, so poorer depth also means poorer poses. Each estimate carries
its ground-truth labels for evaluation; the pipeline never reads them.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.geometry import Pose, Rotation
from src.objects import ObjectModel
from src.perception.depth import DepthImage
from src.perception.render import RenderResult

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class EstimatorConfig:
    """Noise model of the emulated pose estimator"""
    p_detect: float = 0.95
    detect_threshold: float = 0.2       # minimum visible-surface fraction
    min_mask_pixels: int = 4

    sigma_t: float = 0.002              # meters, per axis
    sigma_r_deg: float = 4.0            # degrees, per rotation-vector axis

    p_sym: float = 0.10
    p_rear: float = 0.05
    p_outlier: float = 0.05
    outlier_t: float = 0.025            # meters, typical gross translation error
    outlier_r_deg: float = 60.0         # degrees, maximum gross rotation error

    # Depth-hole coupling: fraction of invalid pixels inside the object mask
    hole_noise_gain: float = 4.0        # noise scale = 1 + gain * hole_fraction
    hole_outlier_gain: float = 0.5      # extra outlier probability per unit hole fraction

    confidence_sigma: float = 0.05

    def __post_init__(self):
        for name in ('p_detect', 'detect_threshold', 'p_sym', 'p_rear', 'p_outlier'):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise InvalidInput(f"{name} must lie in [0, 1], got {value}")
        for name in ('sigma_t', 'sigma_r_deg', 'outlier_t', 'outlier_r_deg',
                     'hole_noise_gain', 'hole_outlier_gain', 'confidence_sigma'):
            if getattr(self, name) < 0:
                raise InvalidInput(f"{name} must be >= 0")

    @classmethod
    def noiseless(cls) -> 'EstimatorConfig':
        return cls(p_detect=1.0, sigma_t=0.0, sigma_r_deg=0.0, p_sym=0.0, p_rear=0.0, p_outlier=0.0,
                   hole_noise_gain=0.0, hole_outlier_gain=0.0, confidence_sigma=0.0)


@dataclass(frozen=True)
class EstimateTruth:
    """Simulator labels attached to an estimate (evaluation only)."""
    instance_id: int
    symmetry_flip: bool = False
    rear_flip: bool = False
    outlier: bool = False

    @property
    def clean(self) -> bool:
        return not (self.rear_flip or self.outlier)


@dataclass(frozen=True, eq=False)
class PoseEstimate:
    class_id: str
    pose: Pose                          # camera frame
    confidence: float
    bbox_center: Tuple[float, float]    # pixels (u, v)
    z_mean: float                       # meters
    iteration: int
    truth: Optional[EstimateTruth] = None

    def __post_init__(self):
        if not self.z_mean > 0:
            raise InvalidInput(f"z_mean must be positive, got {self.z_mean}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InvalidInput(f"confidence must lie in [0, 1], got {self.confidence}")

    def to_world(self, camera_pose: Pose) -> Pose:
        return camera_pose @ self.pose


def _mask_statistics(mask: np.ndarray, depth: DepthImage):
    rows, cols = np.nonzero(mask)
    bbox_center = (0.5 * float(cols.min() + cols.max()), 0.5 * float(rows.min() + rows.max()))
    values = depth.depth[mask]
    valid = values > 0
    hole_fraction = 1.0 - float(valid.mean())
    z_mean = float(values[valid].mean()) if valid.any() else 0.0
    return bbox_center, z_mean, hole_fraction


def emit_pose_estimates(instances: Sequence[Tuple[int, ObjectModel, Pose]], camera_pose: Pose,
                        render: RenderResult, depth: DepthImage, model: EstimatorConfig,
                        seed: Optional[int], iteration: int = 0) -> List[PoseEstimate]:
    """
    Emulated detections for one acquisition.

    Args:
        instances: ``(instance_id, object model, true world pose)`` triples.
        camera_pose: world_T_camera.
        render: Clean render of the scene (labels give the true masks).
        depth: Corrupted depth seen by the pipeline.
        model: Noise model.
        seed: Seed of the per-call generator.
        iteration: Acquisition index stored on every estimate.

    Returns:
        Estimates in camera frame, ordered by instance id.
    """
    rng = np.random.default_rng(seed)
    camera_inverse = camera_pose.inverse()
    estimates: List[PoseEstimate] = []

    for instance_id, obj, world_pose in sorted(instances, key=lambda item: item[0]):
        # Draw every variate up front so one object's outcome never shifts another's.
        u_detect, u_sym, u_rear, u_outlier = rng.random(4)
        rotvec_noise = rng.normal(size=3)
        translation_noise = rng.normal(size=3)
        sym_element = obj.symmetry.random_element(rng)
        outlier_direction = rng.normal(size=3)
        outlier_axis = rng.normal(size=3)
        outlier_scale, outlier_angle = rng.random(2)
        confidence_noise = rng.normal()

        visible = render.visible_fraction(instance_id)
        mask = render.mask(instance_id)
        if visible < model.detect_threshold or mask.sum() < model.min_mask_pixels or u_detect >= model.p_detect:
            continue
        bbox_center, z_mean, hole_fraction = _mask_statistics(mask, depth)
        if z_mean <= 0:
            continue

        truth_cam = camera_inverse @ world_pose
        scale = 1.0 + model.hole_noise_gain * hole_fraction
        rotation = truth_cam.rotation * Rotation.from_rotvec(rotvec_noise * np.radians(model.sigma_r_deg) * scale)
        translation = truth_cam.translation + translation_noise * model.sigma_t * scale

        symmetry_flip = bool(u_sym < model.p_sym)
        if symmetry_flip:
            rotation = rotation * sym_element

        rear_flip = bool(u_rear < model.p_rear)
        if rear_flip:
            view = truth_cam.translation / np.linalg.norm(truth_cam.translation)
            chord = obj.chord_length(truth_cam.rotation.inverse().apply(view))
            translation = translation - chord * view

        p_outlier = min(1.0, model.p_outlier + model.hole_outlier_gain * hole_fraction)
        outlier = bool(u_outlier < p_outlier)
        if outlier:
            direction = outlier_direction / np.linalg.norm(outlier_direction)
            translation = translation + direction * model.outlier_t * (0.5 + outlier_scale)
            rotation = rotation * Rotation.from_axis_angle(outlier_axis, np.radians(model.outlier_r_deg) * outlier_angle)

        confidence = float(np.clip(0.5 + 0.5 * visible + model.confidence_sigma * confidence_noise, 0.0, 1.0))
        estimates.append(PoseEstimate(
            class_id=obj.class_id,
            pose=Pose(rotation, translation),
            confidence=confidence,
            bbox_center=bbox_center,
            z_mean=z_mean,
            iteration=iteration,
            truth=EstimateTruth(instance_id, symmetry_flip, rear_flip, outlier),
        ))

    logger.debug("iteration %d: %d estimates from %d instances", iteration, len(estimates), len(instances))
    return estimates


def detection_counts(estimates: Sequence[PoseEstimate]) -> Dict[str, int]:
    """Tally of estimate kinds by their truth labels."""
    counts = {'total': len(estimates), 'symmetry_flip': 0, 'rear_flip': 0, 'outlier': 0}
    for estimate in estimates:
        if estimate.truth is None:
            continue
        counts['symmetry_flip'] += estimate.truth.symmetry_flip
        counts['rear_flip'] += estimate.truth.rear_flip
        counts['outlier'] += estimate.truth.outlier
    return counts
