"""
Grasp Planner
-------------

Online stage: rank every database candidate of every plannable target, keep
the top fraction, and walk the shortlist in rank order until a candidate
passes both validation stages. When none does the iteration ends in an early
exit and the caller re-acquires from another viewpoint.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Dict, List, Mapping, NamedTuple, Optional, Sequence

from src.errors import InvalidInput
from src.grasping.candidates import GraspCandidate
from src.grasping.gripper import GripperModel
from src.grasping.scoring import RankedGrasp, ScoreWeights, rank_and_truncate, rank_candidates
from src.grasping.validation import (
    FailReason,
    GraspTrajectory,
    MotionConfig,
    ReachModel,
    StageResult,
    static_pose_validation,
    trajectory_validation,
)
from src.scene import SceneState

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    """Online planning"""
    weights: ScoreWeights = field(default_factory=ScoreWeights)
    fraction: float = 0.18              # shortlist share of the full ranking
    reach: ReachModel = field(default_factory=ReachModel)
    motion: MotionConfig = field(default_factory=MotionConfig)

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise InvalidInput(f"planner.fraction must lie in (0, 1], got {self.fraction}")
        object.__setattr__(self, 'weights', self.weights.normalized())


class EarlyExitReason(Enum):
    NO_TARGETS = "no_targets"
    NO_CANDIDATES = "no_candidates"
    NO_FEASIBLE = "no_feasible"


@dataclass(frozen=True, eq=False)
class PlanOutcome:
    """Either a trajectory with its grasp, or an early exit with its reason."""
    trajectory: Optional[GraspTrajectory] = None
    grasp: Optional[RankedGrasp] = None
    early_exit: Optional[EarlyExitReason] = None
    ranked_count: int = 0
    shortlist_count: int = 0
    chosen_rank: Optional[int] = None
    fail_histogram: Dict[str, int] = field(default_factory=dict)

    def __post_init__(self):
        if (self.trajectory is None) == (self.early_exit is None):
            raise InvalidInput("a plan outcome carries exactly one of a trajectory or an early exit")

    @property
    def feasible(self) -> bool:
        return self.trajectory is not None

    @property
    def rank_fraction(self) -> Optional[float]:
        """Position of the chosen grasp as a share of the full ranking."""
        if self.chosen_rank is None or self.ranked_count == 0:
            return None
        return (self.chosen_rank + 1) / self.ranked_count

    def to_record(self, iteration: int) -> Dict[str, Any]:
        record: Dict[str, Any] = {
            'iteration': iteration,
            'feasible': self.feasible,
            'early_exit': self.early_exit.value if self.early_exit else None,
            'ranked': self.ranked_count,
            'shortlist': self.shortlist_count,
            'chosen_rank': self.chosen_rank,
            'rank_fraction': self.rank_fraction,
            'fail_histogram': dict(sorted(self.fail_histogram.items())),
        }
        if self.grasp is not None:
            record.update({
                'track_id': self.grasp.track_id,
                'candidate_index': self.grasp.candidate_index,
                'score': self.grasp.score,
                'components': self.grasp.components._asdict(),
                'grasp_pose': self.grasp.world_pose.to_list(),
            })
        return record


class CandidateVerdict(NamedTuple):
    rank: int
    grasp: RankedGrasp
    static: StageResult
    trajectory: Optional[GraspTrajectory]
    failure: Optional[StageResult]

    @property
    def feasible(self) -> bool:
        return self.trajectory is not None


def evaluate_candidate(grasp: RankedGrasp, scene: SceneState, gripper: GripperModel,
                       config: PlannerConfig, rank: int = 0) -> CandidateVerdict:
    target = scene.target(grasp.track_id)
    static = static_pose_validation(grasp.world_pose, grasp.candidate.width, grasp.track_id, scene,
                                    gripper, config.reach)
    if not static.ok:
        return CandidateVerdict(rank, grasp, static, None, static)
    result = trajectory_validation(grasp.world_pose, grasp.candidate.width, target, scene, gripper, config.motion)
    return CandidateVerdict(rank, grasp, static, result.trajectory, None if result.ok else result.failure)


def _histogram_key(verdict: CandidateVerdict) -> str:
    stage = 'static' if not verdict.static.ok else 'trajectory'
    return f"{stage}:{verdict.failure.reason.value}"


def plan(scene: SceneState, databases: Mapping[str, Sequence[GraspCandidate]], gripper: GripperModel,
         config: PlannerConfig) -> PlanOutcome:
    """
    First feasible grasp of the shortlist, or an early exit.

    Args:
        scene: Snapshot of this iteration.
        databases: Candidates per object class (object frame).
        gripper: Gripper geometry.
        config: Weights, shortlist fraction, reach proxy and motion limits.
    """
    if not scene.plannable:
        return PlanOutcome(early_exit=EarlyExitReason.NO_TARGETS)
    ranked = rank_candidates(scene, databases, config.weights)
    if not ranked:
        return PlanOutcome(early_exit=EarlyExitReason.NO_CANDIDATES)

    shortlist = rank_and_truncate(ranked, config.fraction)
    failures: Counter = Counter()
    for rank, grasp in enumerate(shortlist):
        verdict = evaluate_candidate(grasp, scene, gripper, config, rank)
        if verdict.feasible:
            logger.debug("iteration %d: track %d candidate %d feasible at rank %d/%d",
                         scene.iteration, grasp.track_id, grasp.candidate_index, rank, len(ranked))
            return PlanOutcome(verdict.trajectory, grasp, None, len(ranked), len(shortlist), rank, dict(failures))
        failures[_histogram_key(verdict)] += 1
        logger.debug("iteration %d: rank %d rejected (%s)", scene.iteration, rank, _histogram_key(verdict))

    return PlanOutcome(early_exit=EarlyExitReason.NO_FEASIBLE, ranked_count=len(ranked),
                       shortlist_count=len(shortlist), fail_histogram=dict(failures))


def evaluate_all(scene: SceneState, databases: Mapping[str, Sequence[GraspCandidate]], gripper: GripperModel,
                 config: PlannerConfig, limit: Optional[int] = None) -> List[CandidateVerdict]:
    """
    Exhaustive oracle: validate every ranked candidate (or the first
    ``limit``) without stopping at the first success.
    """
    ranked = rank_candidates(scene, databases, config.weights)
    if limit is not None:
        ranked = ranked[:limit]
    return [evaluate_candidate(grasp, scene, gripper, config, rank) for rank, grasp in enumerate(ranked)]


def failure_reasons(verdicts: Sequence[CandidateVerdict]) -> Dict[FailReason, int]:
    counts: Counter = Counter(v.failure.reason for v in verdicts if not v.feasible)
    return dict(counts)
