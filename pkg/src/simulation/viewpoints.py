"""
Viewpoint Planning
------------------

Camera poses for the eye-in-hand sensor: a Fibonacci lattice on a spherical
cap above the bin, at the sensor's working distance, filtered by the
reachability proxy and ordered so each new view is as far as possible from
the views already taken. The plan starts top-down and cycles once exhausted.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput, NoReachableViewpoint
from src.geometry import Pose
from src.grasping.validation import ReachModel

logger = logging.getLogger(__name__)

GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


@dataclass(frozen=True, eq=False)
class ViewpointPlan:
    """Ordered camera poses (world_T_camera) and their unit view directions."""
    poses: Tuple[Pose, ...]
    directions: np.ndarray              # (n, 3) unit vectors from the target to each eye
    target: np.ndarray

    def __len__(self) -> int:
        return len(self.poses)

    def pose_at(self, index: int) -> Pose:
        """Viewpoint ``index`` of the infinite cyclic sequence."""
        return self.poses[index % len(self.poses)]

    def cycle_of(self, index: int) -> int:
        return index // len(self.poses)


def fibonacci_cap(n: int, max_polar_deg: float) -> np.ndarray:
    """
    ``n`` near-uniform unit directions on the cap within ``max_polar_deg`` of
    +z. Direction 0 is +z exactly.
    """
    if n < 1:
        raise InvalidInput(f"viewpoint sample count must be >= 1, got {n}")
    if n == 1:
        return np.array([[0.0, 0.0, 1.0]])
    index = np.arange(n)
    cos_min = math.cos(math.radians(max_polar_deg))
    z = 1.0 - index / (n - 1) * (1.0 - cos_min)
    rho = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    phi = index * GOLDEN_ANGLE
    return np.column_stack([rho * np.cos(phi), rho * np.sin(phi), z])


def geodesic_distances(directions: np.ndarray) -> np.ndarray:
    """Pairwise great-circle angles between unit directions."""
    cosine = np.clip(directions @ directions.T, -1.0, 1.0)
    return np.arccos(cosine)


def farthest_point_order(directions: np.ndarray, start: int = 0) -> List[int]:
    """
    Greedy ordering: after ``start``, always take the direction whose smallest
    angle to the already selected ones is largest (ties: lowest index).
    """
    directions = np.asarray(directions, dtype=float)
    n = len(directions)
    if n == 0:
        return []
    distances = geodesic_distances(directions)
    order = [start]
    nearest = distances[start].copy()
    taken = np.zeros(n, dtype=bool)
    taken[start] = True
    while len(order) < n:
        candidates = np.where(taken, -np.inf, nearest)
        chosen = int(np.argmax(candidates))
        order.append(chosen)
        taken[chosen] = True
        nearest = np.minimum(nearest, distances[chosen])
    return order


def selection_gaps(directions: np.ndarray, order: Sequence[int]) -> List[float]:
    """Angle from each selected direction to the nearest one selected before it."""
    distances = geodesic_distances(np.asarray(directions, dtype=float))
    return [float(distances[order[k], list(order[:k])].min()) for k in range(1, len(order))]


def plan_viewpoints(target: Sequence[float], radius: float, n_samples: int, reach: ReachModel,
                    max_polar_deg: float = 35.0) -> ViewpointPlan:
    """
    Reachable viewpoints looking at ``target``, in farthest-point order.

    Raises:
        InvalidInput: If ``radius <= 0``.
        NoReachableViewpoint: If the reach model rejects every sample.
    """
    if radius <= 0:
        raise InvalidInput(f"viewpoint radius must be positive, got {radius}")
    target = np.asarray(target, dtype=float)
    lattice = fibonacci_cap(n_samples, max_polar_deg)

    poses, kept = [], []
    for direction in lattice:
        pose = Pose.look_at(target + radius * direction, target)
        if reach.reachable(pose, axis=2):
            poses.append(pose)
            kept.append(direction)
    if not poses:
        raise NoReachableViewpoint(f"none of {n_samples} viewpoints at radius {radius} m is reachable")

    directions = np.array(kept)
    start = int(np.argmax(directions[:, 2]))
    order = farthest_point_order(directions, start)
    logger.info("viewpoint plan: %d of %d samples reachable", len(order), n_samples)
    return ViewpointPlan(tuple(poses[i] for i in order), directions[order], target)
