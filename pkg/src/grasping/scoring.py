"""
Grasp Scoring
-------------

Utility of a grasp as a weighted sum of four components, each in ``[0, 1]``:

- align: approach straight down scores 1, horizontal 0.5, straight up 0
- yaw: lateral axis parallel to the bin's long edge scores 1
- conf: track confidence relative to the most confident validated track
- height: object height between the bin floor and the current fill level

Candidates of every plannable target are instantiated in the world, scored in
one vectorized pass and sorted with a deterministic tie-break.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Mapping, NamedTuple, Sequence

import numpy as np

from src.errors import EmptyInput, InvalidInput
from src.geometry import Pose
from src.grasping.candidates import GraspCandidate
from src.scene import SceneState, SceneTarget

logger = logging.getLogger(__name__)

GRAVITY_DOWN = np.array([0.0, 0.0, -1.0])

COMPONENTS = ('align', 'yaw', 'conf', 'height')


@dataclass(frozen=True)
class ScoreWeights:
    """Weights of the align / yaw / confidence / height components"""
    align: float = 0.4
    yaw: float = 0.1
    conf: float = 0.2
    height: float = 0.3

    def __post_init__(self):
        values = self.as_array()
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise InvalidInput(f"score weights must be finite and nonnegative, got {values.tolist()}")
        if values.sum() <= 0:
            raise InvalidInput("score weights must not all be zero")

    def as_array(self) -> np.ndarray:
        return np.array([self.align, self.yaw, self.conf, self.height], dtype=float)

    def normalized(self) -> 'ScoreWeights':
        values = self.as_array()
        values = values / values.sum()
        return ScoreWeights(*values.tolist())

    def scaled(self, factor: float) -> 'ScoreWeights':
        return ScoreWeights(*(self.as_array() * factor).tolist())


class ScoreComponents(NamedTuple):
    align: float
    yaw: float
    conf: float
    height: float


class RankedGrasp(NamedTuple):
    track_id: int
    candidate_index: int
    candidate: GraspCandidate
    world_pose: Pose
    score: float
    components: ScoreComponents

    @property
    def sort_key(self):
        return (-self.score, self.track_id, self.candidate_index)


# =============================================================================
# COMPONENTS
# =============================================================================

def _component_matrix(z_axes: np.ndarray, x_axes: np.ndarray, bin_axis: np.ndarray, conf: float,
                      object_z: float, floor_z: float, fill_z: float) -> np.ndarray:
    align = 0.5 * (1.0 + z_axes @ GRAVITY_DOWN)
    yaw = 0.5 * (1.0 + np.abs(x_axes @ bin_axis))
    span = fill_z - floor_z
    height = 1.0 if span <= 1e-12 else min(1.0, max(0.0, (object_z - floor_z) / span))
    n = len(z_axes)
    return np.clip(np.column_stack([align, yaw, np.full(n, conf), np.full(n, height)]), 0.0, 1.0)


def _scene_terms(target: SceneTarget, scene: SceneState):
    max_conf = max((t.confidence for t in scene.targets), default=0.0)
    conf = target.confidence / max_conf if max_conf > 0 else 0.0
    object_z = float(target.pose.apply(target.model.center)[2])
    bin_axis = scene.bin_frame.axis(0)
    return conf, object_z, bin_axis


def score_target_candidates(target: SceneTarget, candidates: Sequence[GraspCandidate], scene: SceneState,
                            weights: ScoreWeights) -> List[RankedGrasp]:
    """Instantiate and score every database candidate for one target."""
    if not candidates:
        return []
    conf, object_z, bin_axis = _scene_terms(target, scene)
    world_poses = [target.pose @ c.pose for c in candidates]
    rotations = np.stack([p.rotation.as_matrix() for p in world_poses])
    components = _component_matrix(rotations[:, :, 2], rotations[:, :, 0], bin_axis, conf,
                                   object_z, scene.floor_z, scene.fill_height)
    w = weights.normalized().as_array()
    scores = np.clip(components @ w, 0.0, 1.0)
    return [RankedGrasp(target.track_id, i, candidate, pose, float(scores[i]),
                        ScoreComponents(*components[i].tolist()))
            for i, (candidate, pose) in enumerate(zip(candidates, world_poses))]


def score_grasp(candidate: GraspCandidate, target: SceneTarget, scene: SceneState, weights: ScoreWeights,
                candidate_index: int = 0) -> RankedGrasp:
    """
    Score one candidate of ``target``.

    Returns:
        ``RankedGrasp`` whose ``score`` equals the weighted sum of its
        components under the normalized weights.
    """
    ranked = score_target_candidates(target, [candidate], scene, weights)[0]
    return ranked._replace(candidate_index=candidate_index)


def combine(components: Sequence[float], weights: ScoreWeights) -> float:
    """Weighted sum of explicit component values under normalized weights."""
    return float(np.asarray(components, dtype=float) @ weights.normalized().as_array())


# =============================================================================
# RANKING
# =============================================================================

def rank_candidates(scene: SceneState, databases: Mapping[str, Sequence[GraspCandidate]],
                    weights: ScoreWeights) -> List[RankedGrasp]:
    """Every candidate of every plannable target, best first."""
    ranked: List[RankedGrasp] = []
    for target in scene.plannable:
        candidates = databases.get(target.model.class_id, ())
        ranked.extend(score_target_candidates(target, list(candidates), scene, weights))
    ranked.sort(key=lambda g: g.sort_key)
    return ranked


def shortlist_size(count: int, fraction: float) -> int:
    return max(1, math.ceil(fraction * count - 1e-9))


def rank_and_truncate(grasps: Sequence[RankedGrasp], fraction: float = 0.18) -> List[RankedGrasp]:
    """
    Sort by score (ties by track id, then candidate index) and keep the top
    ``ceil(fraction * n)``.

    Raises:
        EmptyInput: If ``grasps`` is empty.
        InvalidInput: If ``fraction`` is not in ``(0, 1]``.
    """
    if not grasps:
        raise EmptyInput("rank_and_truncate needs at least one grasp")
    if not 0.0 < fraction <= 1.0:
        raise InvalidInput(f"shortlist fraction must lie in (0, 1], got {fraction}")
    ordered = sorted(grasps, key=lambda g: g.sort_key)
    return ordered[:shortlist_size(len(ordered), fraction)]
