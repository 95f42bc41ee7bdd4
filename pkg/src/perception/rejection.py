"""
Pose Rejection Filter
---------------------

Discards estimates that are physically inconsistent with the observed depth.
The mask's bounding-box center, back-projected at the mask's mean depth,
locates the visible surface; a centroid estimated in front of that surface
means the estimator matched the part's rear face.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Sequence, Tuple

import numpy as np

from src.perception.camera import CameraIntrinsics, project_bb_center
from src.perception.estimator import PoseEstimate

logger = logging.getLogger(__name__)


class RejectionRule(Enum):
    """Direction of the depth-consistency inequality"""
    # Reject when the centroid lies in front of the observed surface.
    PROSE = "prose"
    # Literal inequality: reject when the centroid lies behind the surface.
    PRINTED = "printed"


class Verdict(Enum):
    KEEP = "keep"
    REJECT = "reject"


@dataclass(frozen=True)
class RejectionConfig:
    margin: float = 0.005               # meters
    rule: RejectionRule = RejectionRule.PROSE
    enabled: bool = True


def rejection_filter(estimate: PoseEstimate, intrinsics: CameraIntrinsics, margin: float = 0.005,
                     rule: RejectionRule = RejectionRule.PROSE) -> Verdict:
    """
    Compare the estimated centroid distance with the observed surface distance.

    With the default rule an estimate is rejected when
    ``|t_obj| < |t_BB| - margin``.
    """
    surface = float(np.linalg.norm(project_bb_center(intrinsics, estimate.bbox_center, estimate.z_mean)))
    centroid = float(np.linalg.norm(estimate.pose.translation))
    if rule is RejectionRule.PROSE:
        reject = centroid < surface - margin
    else:
        reject = centroid > surface + margin
    return Verdict.REJECT if reject else Verdict.KEEP


def filter_estimates(estimates: Sequence[PoseEstimate], intrinsics: CameraIntrinsics,
                     config: RejectionConfig) -> Tuple[List[PoseEstimate], List[PoseEstimate]]:
    """Split estimates into ``(kept, rejected)``, preserving order."""
    if not config.enabled:
        return list(estimates), []
    kept, rejected = [], []
    for estimate in estimates:
        verdict = rejection_filter(estimate, intrinsics, config.margin, config.rule)
        (kept if verdict is Verdict.KEEP else rejected).append(estimate)
    if rejected:
        logger.debug("rejection filter dropped %d of %d estimates", len(rejected), len(estimates))
    return kept, rejected
