"""
Rotations
---------

Unit-quaternion rotations (scalar-first ``w, x, y, z``), the geodesic angular
distance and weighted chordal rotation averaging.

Conversions to and from matrices and rotation vectors go through
``scipy.spatial.transform``; composition, inversion and the matrix form are
computed directly so the hot paths of the simulator stay allocation-light.
"""

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.spatial.transform import Rotation as _ScipyRotation

from src.errors import EmptyInput, InvalidInput


def _wxyz_to_xyzw(q: np.ndarray) -> np.ndarray:
    return np.array([q[1], q[2], q[3], q[0]])


def _xyzw_to_wxyz(q: np.ndarray) -> np.ndarray:
    return np.array([q[3], q[0], q[1], q[2]])


def quaternion_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product ``a * b`` of two scalar-first quaternions."""
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


@dataclass(frozen=True, eq=False)
class Rotation:
    """
    Rotation stored as a unit quaternion.

    The quaternion is normalized on construction, so every instance satisfies
    ``|q| = 1`` to machine precision. ``q`` and ``-q`` describe the same
    rotation and compare equal.
    """
    q: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float).reshape(4)
        norm = float(np.linalg.norm(q))
        if not np.isfinite(norm) or norm < 1e-12:
            raise InvalidInput(f"quaternion must be finite and nonzero, got {q}")
        # Already-unit input keeps its exact bits so serialized poses round-trip.
        if abs(norm - 1.0) > 1e-12:
            q = q / norm
        else:
            q = q.copy()
        q.setflags(write=False)
        object.__setattr__(self, 'q', q)

    # -------------------------------------------------------------------------
    # Constructors
    # -------------------------------------------------------------------------

    @classmethod
    def identity(cls) -> 'Rotation':
        return cls(np.array([1.0, 0.0, 0.0, 0.0]))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'Rotation':
        xyzw = _ScipyRotation.from_matrix(np.asarray(matrix, dtype=float)).as_quat()
        return cls(_xyzw_to_wxyz(xyzw))

    @classmethod
    def from_rotvec(cls, rotvec: np.ndarray) -> 'Rotation':
        xyzw = _ScipyRotation.from_rotvec(np.asarray(rotvec, dtype=float)).as_quat()
        return cls(_xyzw_to_wxyz(xyzw))

    @classmethod
    def from_axis_angle(cls, axis: Sequence[float], angle: float) -> 'Rotation':
        axis = np.asarray(axis, dtype=float)
        norm = np.linalg.norm(axis)
        if norm < 1e-12:
            raise InvalidInput("rotation axis must be nonzero")
        half = 0.5 * angle
        return cls(np.concatenate([[np.cos(half)], np.sin(half) * axis / norm]))

    @classmethod
    def from_euler(cls, seq: str, angles: Sequence[float], degrees: bool = False) -> 'Rotation':
        xyzw = _ScipyRotation.from_euler(seq, angles, degrees=degrees).as_quat()
        return cls(_xyzw_to_wxyz(xyzw))

    @classmethod
    def random(cls, rng: np.random.Generator) -> 'Rotation':
        """Uniformly distributed rotation drawn from ``rng``."""
        q = rng.normal(size=4)
        return cls(q)

    # -------------------------------------------------------------------------
    # Conversions
    # -------------------------------------------------------------------------

    def as_matrix(self) -> np.ndarray:
        w, x, y, z = self.q
        return np.array([
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ])

    def as_rotvec(self) -> np.ndarray:
        return _ScipyRotation.from_quat(_wxyz_to_xyzw(self.q)).as_rotvec()

    def canonical(self) -> np.ndarray:
        """Quaternion in the ``w >= 0`` hemisphere; used for serialization only."""
        q = np.array(self.q)
        if q[0] < 0 or (q[0] == 0 and q[np.flatnonzero(q)[0]] < 0):
            q = -q
        return q

    @property
    def angle(self) -> float:
        """Rotation angle in ``[0, pi]``."""
        return 2.0 * float(np.arctan2(np.linalg.norm(self.q[1:]), abs(self.q[0])))

    # -------------------------------------------------------------------------
    # Algebra
    # -------------------------------------------------------------------------

    def __mul__(self, other: 'Rotation') -> 'Rotation':
        if not isinstance(other, Rotation):
            return NotImplemented
        return Rotation(quaternion_product(self.q, other.q))

    def inverse(self) -> 'Rotation':
        w, x, y, z = self.q
        return Rotation(np.array([w, -x, -y, -z]))

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        """Rotate a single 3-vector or an ``(N, 3)`` array."""
        vectors = np.asarray(vectors, dtype=float)
        return vectors @ self.as_matrix().T

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Rotation):
            return NotImplemented
        return bool(np.array_equal(self.q, other.q) or np.array_equal(self.q, -other.q))

    __hash__ = None

    def isclose(self, other: 'Rotation', atol: float = 1e-9) -> bool:
        return angular_distance(self, other) <= atol

    def __repr__(self) -> str:
        w, x, y, z = self.q
        return f"Rotation(w={w:.6f}, x={x:.6f}, y={y:.6f}, z={z:.6f})"


# =============================================================================
# DISTANCES AND AVERAGING
# =============================================================================

def angular_distance(a: Rotation, b: Rotation) -> float:
    """
    Geodesic angle between two rotations, in radians.

    Equal to ``acos((trace(R_a R_b^T) - 1) / 2)`` but evaluated from the
    relative quaternion with ``atan2``, which stays accurate near zero.

    Returns:
        Angle in ``[0, pi]``; symmetric in its arguments.
    """
    rel = quaternion_product(a.inverse().q, b.q)
    return 2.0 * float(np.arctan2(np.linalg.norm(rel[1:]), abs(rel[0])))


def average_rotations(samples: Sequence[Rotation],
                      weights: Optional[Sequence[float]] = None) -> Rotation:
    """
    Weighted chordal mean of rotations.

    The mean is the dominant eigenvector of ``sum_i w_i q_i q_i^T``, which is
    invariant to the sign of each sample quaternion.

    Args:
        samples: At least one rotation.
        weights: Nonnegative weights with a positive sum; uniform if omitted.

    Returns:
        The averaged rotation.

    Raises:
        EmptyInput: If ``samples`` is empty.
        InvalidInput: If the weights are malformed.
    """
    if len(samples) == 0:
        raise EmptyInput("average_rotations needs at least one sample")
    quats = np.stack([s.q for s in samples])
    w = _check_weights(weights, len(samples))

    accumulator = (quats * w[:, None]).T @ quats
    _, vectors = np.linalg.eigh(accumulator)
    mean = vectors[:, -1]
    # Sign only matters for determinism of the stored quaternion.
    if float(np.dot(mean, quats[int(np.argmax(w))])) < 0:
        mean = -mean
    return Rotation(mean)


def _check_weights(weights: Optional[Sequence[float]], count: int) -> np.ndarray:
    if weights is None:
        return np.ones(count)
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape[0] != count:
        raise InvalidInput(f"expected {count} weights, got {w.shape[0]}")
    if np.any(w < 0) or not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise InvalidInput("weights must be finite, nonnegative and sum to a positive value")
    return w
