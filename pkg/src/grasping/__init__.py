"""Parallel-jaw grasping: offline candidate generation and online planning."""

from src.grasping.gripper import GripperModel, GripperPart
from src.grasping.candidates import (
    AntipodalSampling,
    ContactPair,
    GraspCandidate,
    GraspGenConfig,
    define_frames,
    filter_gripper_collisions,
    generate_candidates,
    sample_antipodal_pairs,
)
from src.grasping.database import GraspDatabase, build_database, read_db, write_db
from src.grasping.scoring import (
    RankedGrasp,
    ScoreComponents,
    ScoreWeights,
    rank_and_truncate,
    rank_candidates,
    score_grasp,
)
from src.grasping.validation import (
    FailReason,
    GraspTrajectory,
    MotionConfig,
    ReachModel,
    StageResult,
    replay_trajectory,
    static_pose_validation,
    trajectory_validation,
)
from src.grasping.planner import EarlyExitReason, PlanOutcome, PlannerConfig, evaluate_all, plan

__all__ = [
    'AntipodalSampling',
    'ContactPair',
    'EarlyExitReason',
    'FailReason',
    'GraspCandidate',
    'GraspDatabase',
    'GraspGenConfig',
    'GraspTrajectory',
    'GripperModel',
    'GripperPart',
    'MotionConfig',
    'PlanOutcome',
    'PlannerConfig',
    'RankedGrasp',
    'ReachModel',
    'ScoreComponents',
    'ScoreWeights',
    'StageResult',
    'build_database',
    'define_frames',
    'evaluate_all',
    'filter_gripper_collisions',
    'generate_candidates',
    'plan',
    'rank_and_truncate',
    'rank_candidates',
    'read_db',
    'replay_trajectory',
    'sample_antipodal_pairs',
    'score_grasp',
    'static_pose_validation',
    'trajectory_validation',
    'write_db',
]
