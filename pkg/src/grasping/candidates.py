"""
Grasp Candidate Generation
--------------------------

Offline stage that turns an object mesh into parallel-jaw grasp candidates:

1. Sample surface points and shoot a ray inward along the negative normal;
   the exit hit closes an antipodal pair when both normals oppose each other
   within tolerance and the pair fits in the gripper.
2. Around each pair's closing axis, try ``D`` evenly spaced approach
   directions and keep those pointing away from the object's center.
3. Discard frames where the opened gripper intersects the object.

Candidate poses are expressed in the object frame (``obj_H_ee``).
"""

import logging
from dataclasses import dataclass
from typing import Any, Dict, List, NamedTuple, Sequence, Tuple

import numpy as np

from src.errors import BudgetExhausted, DegeneratePair, InvalidInput
from src.geometry import Pose
from src.mesh import TriangleMesh, meshes_intersect, meshes_intersect_brute_force, raycast_many, sample_surface
from src.grasping.gripper import GripperModel

logger = logging.getLogger(__name__)

# Midpoints closer than this to the object center count as centered for the
# outwardness test.
OUTWARD_TOLERANCE = 1e-9


@dataclass(frozen=True)
class GraspGenConfig:
    """Offline candidate generation"""
    n_pairs: int = 32                       # target number of antipodal pairs (N)
    antipodal_tolerance_deg: float = 10.0   # degrees
    approach_samples: int = 8               # approach directions per pair (D)
    budget_factor: int = 50                 # surface samples allowed per requested pair
    batch_size: int = 64                    # surface samples drawn per round
    min_width: float = 0.001                # meters
    seed: int = 0

    def __post_init__(self):
        if self.n_pairs < 1:
            raise InvalidInput(f"n_pairs must be >= 1, got {self.n_pairs}")
        if not 0.0 < self.antipodal_tolerance_deg < 90.0:
            raise InvalidInput(f"antipodal tolerance must lie in (0, 90) degrees, got {self.antipodal_tolerance_deg}")
        if self.approach_samples < 1 or self.budget_factor < 1 or self.batch_size < 1:
            raise InvalidInput("approach_samples, budget_factor and batch_size must be >= 1")

    @property
    def antipodal_tolerance(self) -> float:
        return float(np.radians(self.antipodal_tolerance_deg))

    @property
    def sample_budget(self) -> int:
        return self.budget_factor * self.n_pairs

    def to_dict(self) -> Dict[str, Any]:
        return {
            'n_pairs': self.n_pairs,
            'antipodal_tolerance_deg': self.antipodal_tolerance_deg,
            'approach_samples': self.approach_samples,
            'budget_factor': self.budget_factor,
            'batch_size': self.batch_size,
            'min_width': self.min_width,
            'seed': self.seed,
        }


class ContactPair(NamedTuple):
    c1: np.ndarray
    n1: np.ndarray
    c2: np.ndarray
    n2: np.ndarray
    sample_index: int

    @property
    def width(self) -> float:
        return float(np.linalg.norm(self.c2 - self.c1))

    @property
    def antipodal_error(self) -> float:
        return _angle(self.n1, -self.n2)


class AntipodalSampling(NamedTuple):
    pairs: List[ContactPair]
    samples_drawn: int
    budget_exhausted: bool


@dataclass(frozen=True, eq=False)
class GraspCandidate:
    """A grasp in the object frame; ``c1``/``c2`` are the contact points."""
    pose: Pose
    c1: np.ndarray
    c2: np.ndarray
    width: float
    antipodal_error: float              # radians
    pair_index: int = 0
    approach_index: int = 0

    def __post_init__(self):
        for name in ('c1', 'c2'):
            value = np.array(getattr(self, name), dtype=float).reshape(3)
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, 'width', float(self.width))
        object.__setattr__(self, 'antipodal_error', float(self.antipodal_error))

    @property
    def closing_axis(self) -> np.ndarray:
        axis = self.c2 - self.c1
        return axis / np.linalg.norm(axis)

    def check(self, gripper: GripperModel, atol: float = 1e-6) -> List[str]:
        """Violated candidate invariants; empty when the candidate is sound."""
        problems = []
        if self.width > gripper.max_opening + atol:
            problems.append(f"width {self.width:.6f} exceeds max opening {gripper.max_opening}")
        if abs(self.width - float(np.linalg.norm(self.c2 - self.c1))) > atol:
            problems.append("width does not match the contact distance")
        if not np.allclose(self.closing_axis, self.pose.axis(1), atol=atol):
            problems.append("closing axis differs from the stroke axis")
        frame = self.pose.rotation.as_matrix()
        if not np.allclose(frame.T @ frame, np.eye(3), atol=atol) or np.linalg.det(frame) < 0:
            problems.append("frame is not a rotation")
        return problems

    def to_dict(self) -> Dict[str, Any]:
        return {
            'pose': self.pose.to_list(),
            'c1': self.c1.tolist(),
            'c2': self.c2.tolist(),
            'width': self.width,
            'antipodal_error': self.antipodal_error,
            'pair_index': self.pair_index,
            'approach_index': self.approach_index,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GraspCandidate':
        return cls(Pose.from_list(data['pose']), np.asarray(data['c1'], dtype=float),
                   np.asarray(data['c2'], dtype=float), float(data['width']),
                   float(data['antipodal_error']), int(data.get('pair_index', 0)),
                   int(data.get('approach_index', 0)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GraspCandidate):
            return NotImplemented
        return (self.pose == other.pose and np.array_equal(self.c1, other.c1)
                and np.array_equal(self.c2, other.c2) and self.width == other.width
                and self.antipodal_error == other.antipodal_error
                and self.pair_index == other.pair_index and self.approach_index == other.approach_index)

    __hash__ = None


def _angle(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.arctan2(np.linalg.norm(np.cross(a, b)), np.dot(a, b)))


def _angles(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum('ij,ij->i', a, b))


# =============================================================================
# ANTIPODAL SAMPLING
# =============================================================================

def sample_antipodal_pairs(mesh: TriangleMesh, gripper: GripperModel, config: GraspGenConfig,
                           strict: bool = False) -> AntipodalSampling:
    """
    Antipodal contact pairs found by inward ray casting.

    Samples are drawn in fixed-size rounds from one generator, so the result
    depends only on ``(mesh, config)``; accepted pairs keep sample order.

    Raises:
        BudgetExhausted: Only with ``strict=True``, when fewer than
            ``config.n_pairs`` pairs were found within the sample budget. The
            partial result is attached.
    """
    rng = np.random.default_rng(config.seed)
    tolerance = config.antipodal_tolerance
    pairs: List[ContactPair] = []
    drawn = 0

    while len(pairs) < config.n_pairs and drawn < config.sample_budget:
        size = min(config.batch_size, config.sample_budget - drawn)
        samples = sample_surface(mesh, size, rng)
        batch = raycast_many(mesh, samples.points, -samples.normals)

        width = np.where(batch.hit, batch.distance, np.inf)
        chord = batch.points - samples.points
        ok = batch.hit & (width >= config.min_width) & (width <= gripper.max_opening)
        if ok.any():
            ok[ok] &= _angles(samples.normals[ok], -batch.normals[ok]) <= tolerance
            ok[ok] &= _angles(chord[ok], -samples.normals[ok]) <= tolerance

        for i in np.flatnonzero(ok):
            pairs.append(ContactPair(samples.points[i].copy(), samples.normals[i].copy(),
                                     batch.points[i].copy(), batch.normals[i].copy(), drawn + int(i)))
            if len(pairs) == config.n_pairs:
                break
        drawn += size

    exhausted = len(pairs) < config.n_pairs
    result = AntipodalSampling(pairs, drawn, exhausted)
    if exhausted:
        message = (f"{mesh.name or 'mesh'}: found {len(pairs)} of {config.n_pairs} antipodal pairs "
                   f"in {drawn} samples")
        if strict:
            raise BudgetExhausted(message, partial=result)
        logger.warning(message)
    return result


# =============================================================================
# FRAMES
# =============================================================================

def _perpendicular_basis(axis: np.ndarray):
    helper = np.eye(3)[int(np.argmin(np.abs(axis)))]
    u = np.cross(axis, helper)
    u /= np.linalg.norm(u)
    return u, np.cross(axis, u)


def define_frames(pair: ContactPair, center: np.ndarray, config: GraspGenConfig,
                  pair_index: int = 0) -> List[GraspCandidate]:
    """
    End-effector frames for one contact pair.

    The origin is the contact midpoint and ``y`` the closing axis ``c1 -> c2``.
    An approach vector ``a`` is kept when ``a . (midpoint - center) >= 0``, so a
    centered midpoint keeps every sample; the frame's ``z`` is ``-a``.

    Raises:
        DegeneratePair: If the contacts coincide.
    """
    c1 = np.asarray(pair.c1, dtype=float)
    c2 = np.asarray(pair.c2, dtype=float)
    chord = c2 - c1
    width = float(np.linalg.norm(chord))
    if width < 1e-12:
        raise DegeneratePair("contact points coincide; the closing axis is undefined")
    y_axis = chord / width
    midpoint = 0.5 * (c1 + c2)
    offset = midpoint - np.asarray(center, dtype=float)
    error = _angle(pair.n1, -np.asarray(pair.n2))

    u, v = _perpendicular_basis(y_axis)
    candidates = []
    for k in range(config.approach_samples):
        theta = 2.0 * np.pi * k / config.approach_samples
        approach = np.cos(theta) * u + np.sin(theta) * v
        if float(np.dot(approach, offset)) < -OUTWARD_TOLERANCE:
            continue
        z_axis = -approach
        x_axis = np.cross(y_axis, z_axis)
        candidates.append(GraspCandidate(Pose.from_axes(x_axis, y_axis, z_axis, midpoint),
                                         c1, c2, width, error, pair_index, k))
    return candidates


# =============================================================================
# COLLISION FILTER
# =============================================================================

def gripper_hits_object(candidate: GraspCandidate, mesh: TriangleMesh, gripper: GripperModel,
                        brute_force: bool = False) -> bool:
    intersect = meshes_intersect_brute_force if brute_force else meshes_intersect
    identity = Pose.identity()
    return any(intersect(part.mesh, part.pose, mesh, identity)
               for part in gripper.assembly(candidate.width, candidate.pose))


def filter_gripper_collisions(candidates: Sequence[GraspCandidate], mesh: TriangleMesh,
                              gripper: GripperModel, brute_force: bool = False) -> List[GraspCandidate]:
    """Candidates whose opened gripper (width plus clearance) clears the object."""
    kept = [c for c in candidates if not gripper_hits_object(c, mesh, gripper, brute_force)]
    logger.debug("collision filter kept %d of %d candidates", len(kept), len(candidates))
    return kept


def generate_candidates(mesh: TriangleMesh, center: np.ndarray, gripper: GripperModel,
                        config: GraspGenConfig, strict: bool = False) -> Tuple[List[GraspCandidate], AntipodalSampling]:
    """Full offline pipeline for one mesh: sample, frame, filter."""
    sampling = sample_antipodal_pairs(mesh, gripper, config, strict=strict)
    framed: List[GraspCandidate] = []
    for index, pair in enumerate(sampling.pairs):
        try:
            framed.extend(define_frames(pair, center, config, pair_index=index))
        except DegeneratePair:
            logger.debug("pair %d skipped: coincident contacts", index)
    kept = filter_gripper_collisions(framed, mesh, gripper)
    logger.info("%s: %d pairs -> %d frames -> %d collision-free candidates",
                mesh.name or 'mesh', len(sampling.pairs), len(framed), len(kept))
    return kept, sampling
