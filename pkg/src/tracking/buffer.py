"""
Pose Buffer
-----------

Temporal store that fuses pose estimates of the same physical part across
viewpoints. Each acquisition:

1. ``ingest`` associates estimates with tracks (same class, translation within
   ``delta_thresh`` and symmetry-canonicalized rotation within
   ``theta_thresh``), greedy nearest-first with at most one estimate per track;
   leftovers open new tracks.
2. ``invalidate`` drops tracks that stay unseen while their centroid is in
   view and unoccluded.
3. ``validated_poses`` exposes only tracks seen this iteration with enough
   observations.

With memory off the buffer is emptied at every ingest and a single
observation suffices, so every filtered estimate is immediately graspable.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.geometry import (
    Pose,
    angular_distance,
    average_rotations,
    average_translations,
    translation_distance,
)
from src.mesh import TriangleMesh, raycast
from src.mesh.kernels import ray_box_interval
from src.tracking.symmetry import SymmetryGroup

logger = logging.getLogger(__name__)


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class BufferConfig:
    """Association thresholds, validation gate and invalidation policy"""
    theta_thresh_deg: float = 15.0      # degrees
    delta_thresh: float = 0.010         # meters
    min_observations: int = 2
    stale_after: int = 2                # removed on the stale_after-th consecutive unseen in-view iteration
    memory: bool = True
    confidence_weighting: bool = False
    frustum_margin_px: float = 2.0      # pixels

    def __post_init__(self):
        if self.theta_thresh_deg <= 0 or self.delta_thresh <= 0:
            raise InvalidInput("association thresholds must be positive")
        if self.min_observations < 1:
            raise InvalidInput("min_observations must be >= 1")
        if self.stale_after < 1:
            raise InvalidInput("stale_after must be >= 1")

    @property
    def theta_thresh(self) -> float:
        return float(np.radians(self.theta_thresh_deg))

    @property
    def effective_min_observations(self) -> int:
        return self.min_observations if self.memory else 1


# =============================================================================
# TRACKS
# =============================================================================

@dataclass
class TrackedObject:
    """A fused multi-view track. ``history`` holds canonicalized world poses."""
    track_id: int
    class_id: str
    history: List[Pose]
    confidences: List[float]
    fused: Pose
    first_seen: int
    last_seen: int
    unseen_streak: int = 0
    last_checked: int = -1
    instance_ids: List[Optional[int]] = field(default_factory=list)

    @property
    def observations(self) -> int:
        return len(self.history)

    @property
    def confidence(self) -> float:
        return float(np.mean(self.confidences))

    @property
    def majority_instance(self) -> Optional[int]:
        """Most frequent ground-truth instance among member estimates."""
        labels = [i for i in self.instance_ids if i is not None]
        if not labels:
            return None
        values, counts = np.unique(labels, return_counts=True)
        return int(values[np.argmax(counts)])

    def refuse(self, confidence_weighting: bool = False) -> None:
        weights = self.confidences if confidence_weighting else None
        self.fused = Pose(average_rotations([p.rotation for p in self.history], weights),
                          average_translations([p.translation for p in self.history], weights))


class ValidatedPose(NamedTuple):
    track_id: int
    class_id: str
    pose: Pose
    confidence: float
    observations: int


def _qualifies(world_pose: Pose, class_id: str, track: TrackedObject, group: SymmetryGroup,
               config: BufferConfig) -> Optional[Tuple[float, Pose]]:
    if track.class_id != class_id:
        return None
    distance = translation_distance(world_pose, track.fused)
    if distance >= config.delta_thresh:
        return None
    canonical = group.canonicalize(world_pose, track.fused)
    if angular_distance(canonical.rotation, track.fused.rotation) >= config.theta_thresh:
        return None
    return distance, canonical


def associate(world_pose: Pose, class_id: str, tracks: Iterable[TrackedObject],
              group: SymmetryGroup, config: BufferConfig) -> Optional[int]:
    """
    Track id of the nearest qualifying track of the same class, or ``None``.
    Ties in translation distance go to the lowest track id.
    """
    best: Optional[Tuple[float, int]] = None
    for track in sorted(tracks, key=lambda t: t.track_id):
        match = _qualifies(world_pose, class_id, track, group, config)
        if match is not None and (best is None or match[0] < best[0]):
            best = (match[0], track.track_id)
    return None if best is None else best[1]


def validated_poses(tracks: Iterable[TrackedObject], iteration: int, config: BufferConfig) -> List[ValidatedPose]:
    """Tracks seen at ``iteration`` with at least the required observation count."""
    required = config.effective_min_observations
    return [ValidatedPose(t.track_id, t.class_id, t.fused, t.confidence, t.observations)
            for t in sorted(tracks, key=lambda t: t.track_id)
            if t.last_seen == iteration and t.observations >= required]


# =============================================================================
# BUFFER
# =============================================================================

class PoseBuffer:
    """
    Single-owner track store, mutated once per iteration.

    Args:
        config: Thresholds and policy.
        groups: Symmetry group per class id; unknown classes use the trivial group.
    """

    def __init__(self, config: BufferConfig, groups: Optional[Mapping[str, SymmetryGroup]] = None):
        self.config = config
        self.groups: Dict[str, SymmetryGroup] = dict(groups or {})
        self.tracks: Dict[int, TrackedObject] = {}
        self.log_records: List[Dict[str, Any]] = []
        self._next_id = 1

    def group(self, class_id: str) -> SymmetryGroup:
        if class_id not in self.groups:
            self.groups[class_id] = SymmetryGroup.trivial()
        return self.groups[class_id]

    def __len__(self) -> int:
        return len(self.tracks)

    def reset(self) -> None:
        self.tracks.clear()

    def drop(self, track_id: int) -> None:
        if self.tracks.pop(track_id, None) is not None:
            logger.debug("track %d dropped", track_id)

    # -------------------------------------------------------------------------
    # Ingest
    # -------------------------------------------------------------------------

    def ingest(self, estimates: Sequence, camera_pose: Pose, iteration: int) -> List[int]:
        """
        Absorb one iteration's filtered estimates (camera frame).

        Returns:
            Track id assigned to each estimate, in input order.
        """
        if not self.config.memory:
            self.tracks.clear()

        world = [(estimate, estimate.to_world(camera_pose)) for estimate in estimates]
        existing = [self.tracks[tid] for tid in sorted(self.tracks)]

        pairs = []
        for index, (estimate, world_pose) in enumerate(world):
            group = self.group(estimate.class_id)
            for track in existing:
                match = _qualifies(world_pose, estimate.class_id, track, group, self.config)
                if match is not None:
                    pairs.append((match[0], index, track.track_id, match[1]))
        pairs.sort(key=lambda p: (p[0], p[1], p[2]))

        assigned: Dict[int, int] = {}
        claimed = set()
        for distance, index, track_id, canonical in pairs:
            if index in assigned or track_id in claimed:
                continue
            assigned[index] = track_id
            claimed.add(track_id)
            self._absorb(self.tracks[track_id], world[index][0], world[index][1], canonical, iteration)

        for index, (estimate, world_pose) in enumerate(world):
            if index not in assigned:
                assigned[index] = self._open(estimate, world_pose, iteration)

        logger.debug("iteration %d: %d estimates, %d associated, %d new tracks, %d tracks total",
                     iteration, len(world), len(claimed), len(world) - len(claimed), len(self.tracks))
        return [assigned[i] for i in range(len(world))]

    def _absorb(self, track: TrackedObject, estimate, world_pose: Pose, canonical: Pose, iteration: int) -> None:
        track.history.append(canonical)
        track.confidences.append(float(estimate.confidence))
        track.instance_ids.append(estimate.truth.instance_id if estimate.truth else None)
        track.last_seen = iteration
        track.unseen_streak = 0
        track.refuse(self.config.confidence_weighting)
        self._log(track, world_pose, canonical, iteration, new_track=False)

    def _open(self, estimate, world_pose: Pose, iteration: int) -> int:
        # New tracks are canonicalized against the world frame so the stored
        # representative does not depend on which symmetric pose was observed.
        canonical = self.group(estimate.class_id).canonicalize(world_pose, Pose.identity())
        track = TrackedObject(
            track_id=self._next_id,
            class_id=estimate.class_id,
            history=[canonical],
            confidences=[float(estimate.confidence)],
            fused=canonical,
            first_seen=iteration,
            last_seen=iteration,
            instance_ids=[estimate.truth.instance_id if estimate.truth else None],
        )
        self.tracks[track.track_id] = track
        self._next_id += 1
        self._log(track, world_pose, canonical, iteration, new_track=True)
        return track.track_id

    def _log(self, track: TrackedObject, raw: Pose, canonical: Pose, iteration: int, new_track: bool) -> None:
        self.log_records.append({
            'iteration': iteration,
            'track_id': track.track_id,
            'class_id': track.class_id,
            'raw_pose': raw.to_list(),
            'canonical_pose': canonical.to_list(),
            'fused_pose': track.fused.to_list(),
            'observations': track.observations,
            'new_track': new_track,
            'instance_id': track.instance_ids[-1],
        })

    # -------------------------------------------------------------------------
    # Invalidation and validation
    # -------------------------------------------------------------------------

    def invalidate(self, iteration: int, camera_pose: Pose, intrinsics, models: Mapping[str, Any],
                   statics: Sequence[Tuple[TriangleMesh, Pose]] = ()) -> List[int]:
        """
        Remove tracks unseen for ``stale_after`` iterations in which their
        centroid was inside the frustum and not hidden behind another track or
        a static body. Repeated calls for the same iteration change nothing.

        Returns:
            Removed track ids.
        """
        camera_inverse = camera_pose.inverse()
        removed = []
        for track_id in sorted(self.tracks):
            track = self.tracks[track_id]
            if track.last_checked == iteration:
                continue
            track.last_checked = iteration
            if track.last_seen == iteration:
                track.unseen_streak = 0
                continue
            model = models[track.class_id]
            center_world = track.fused.apply(model.center)
            center_cam = camera_inverse.apply(center_world)
            if not intrinsics.in_frustum(center_cam, self.config.frustum_margin_px)[0]:
                continue
            if self._occluded(track, center_world, camera_pose.translation, models, statics):
                continue
            track.unseen_streak += 1
            if track.unseen_streak >= self.config.stale_after:
                removed.append(track_id)
        for track_id in removed:
            del self.tracks[track_id]
        if removed:
            logger.debug("iteration %d: invalidated tracks %s", iteration, removed)
        return removed

    def _occluded(self, track: TrackedObject, center: np.ndarray, eye: np.ndarray,
                  models: Mapping[str, Any], statics: Sequence[Tuple[TriangleMesh, Pose]]) -> bool:
        offset = center - eye
        distance = float(np.linalg.norm(offset))
        direction = offset / distance
        clearance = distance - models[track.class_id].radius

        blockers = [(models[other.class_id].mesh, other.fused)
                    for other in self.tracks.values() if other.track_id != track.track_id]
        blockers.extend(statics)
        for mesh, pose in blockers:
            lo, hi = mesh.bounds
            local_eye = pose.inverse().apply(eye)
            local_dir = pose.inverse().apply_direction(direction)
            t_enter, t_exit = ray_box_interval(local_eye, local_dir, lo, hi)
            if t_exit < max(t_enter, 0.0) or t_enter > clearance:
                continue
            hit = raycast(mesh, eye, direction, pose)
            if hit is not None and hit.distance < clearance:
                return True
        return False

    def validated(self, iteration: int) -> List[ValidatedPose]:
        return validated_poses(self.tracks.values(), iteration, self.config)

    def drain_log(self) -> List[Dict[str, Any]]:
        records, self.log_records = self.log_records, []
        return records
