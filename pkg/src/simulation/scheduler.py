"""
Masked-Time Scheduler
---------------------

Wall-clock model of the pipelined cell. Camera acquisition opens every
iteration; perception and planning of iteration k then run while the robot
still executes the motion planned in iteration k-1, so an iteration lasts

    acquisition + max(perception + planning, pending motion)

The first iteration has no pending motion. The last planned motion is
flushed at the end of a run.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import List

from src.errors import InvalidInput

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StageDurations:
    """Stage durations (seconds)"""
    acquisition: float = 0.2
    perception: float = 0.8
    planning: float = 0.4
    motion_grasp: float = 3.0           # pick motion, pre-grasp to retreat
    motion_release: float = 0.0         # drop-off and return

    def __post_init__(self):
        for name in ('acquisition', 'perception', 'planning', 'motion_grasp', 'motion_release'):
            if getattr(self, name) < 0:
                raise InvalidInput(f"timing.{name} must be >= 0, got {getattr(self, name)}")

    @property
    def compute(self) -> float:
        return self.perception + self.planning

    @property
    def motion(self) -> float:
        return self.motion_grasp + self.motion_release

    def motion_only(self) -> 'StageDurations':
        return replace(self, acquisition=0.0, perception=0.0, planning=0.0)


def masked_time_step(durations: StageDurations, has_pending_motion: bool) -> float:
    """
    Wall time of one iteration.

    Args:
        durations: Acquisition and compute of this iteration, motion of the
            previous one.
        has_pending_motion: Whether the previous iteration planned a motion.
    """
    pending = durations.motion if has_pending_motion else 0.0
    return durations.acquisition + max(durations.compute, pending)


@dataclass
class MaskedTimeline:
    """Accumulated iteration times of one run."""
    steps: List[float] = field(default_factory=list)
    elapsed: float = 0.0

    def advance(self, durations: StageDurations, has_pending_motion: bool) -> float:
        step = masked_time_step(durations, has_pending_motion)
        self.steps.append(step)
        self.elapsed += step
        return step

    def flush(self, durations: StageDurations) -> float:
        """Account for the motion still running when the loop stops."""
        step = self.advance(durations.motion_only(), True)
        logger.debug("Flushed pending motion: %.2f s, run ends at %.2f s", step, self.elapsed)
        return step
