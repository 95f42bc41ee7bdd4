"""
Rigid Transforms
----------------

``Pose`` couples a ``Rotation`` with a translation in meters. Poses compose
left to right like homogeneous matrices: ``a @ b`` maps points of frame ``b``
through ``b`` then ``a``.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from src.errors import EmptyInput, InvalidInput
from src.geometry.rotation import Rotation, _check_weights, angular_distance


def _frozen_vector(values) -> np.ndarray:
    vec = np.array(values, dtype=float).reshape(3)
    vec.setflags(write=False)
    return vec


@dataclass(frozen=True, eq=False)
class Pose:
    """Rigid transform: rotation plus translation (meters)."""
    rotation: Rotation = field(default_factory=Rotation.identity)
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        object.__setattr__(self, 'translation', _frozen_vector(self.translation))

    @classmethod
    def identity(cls) -> 'Pose':
        return cls()

    @classmethod
    def from_translation(cls, translation: Sequence[float]) -> 'Pose':
        return cls(Rotation.identity(), translation)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> 'Pose':
        matrix = np.asarray(matrix, dtype=float)
        return cls(Rotation.from_matrix(matrix[:3, :3]), matrix[:3, 3])

    @classmethod
    def from_axes(cls, x_axis, y_axis, z_axis, origin) -> 'Pose':
        """Pose whose rotation columns are the given (orthonormal) axes."""
        matrix = np.column_stack([x_axis, y_axis, z_axis])
        return cls(Rotation.from_matrix(matrix), origin)

    @classmethod
    def look_at(cls, eye: Sequence[float], target: Sequence[float],
                up_hint: Sequence[float] = (0.0, 1.0, 0.0)) -> 'Pose':
        """
        Camera pose at ``eye`` whose +z axis points at ``target``.

        The x axis is ``z x up_hint`` (image right), y completes a right-handed
        frame (image down), matching the pinhole convention of the camera
        module. Falls back to world x as hint when ``z`` is parallel to it.
        """
        eye = np.asarray(eye, dtype=float)
        z_axis = np.asarray(target, dtype=float) - eye
        norm = np.linalg.norm(z_axis)
        if norm < 1e-12:
            raise InvalidInput("look_at needs distinct eye and target")
        z_axis = z_axis / norm
        hint = np.asarray(up_hint, dtype=float)
        x_axis = np.cross(z_axis, hint)
        if np.linalg.norm(x_axis) < 1e-9:
            x_axis = np.cross(z_axis, np.array([1.0, 0.0, 0.0]))
        x_axis = x_axis / np.linalg.norm(x_axis)
        y_axis = np.cross(z_axis, x_axis)
        return cls.from_axes(x_axis, y_axis, z_axis, eye)

    # -------------------------------------------------------------------------
    # Algebra
    # -------------------------------------------------------------------------

    def __matmul__(self, other: 'Pose') -> 'Pose':
        if not isinstance(other, Pose):
            return NotImplemented
        return Pose(self.rotation * other.rotation,
                    self.rotation.apply(other.translation) + self.translation)

    def inverse(self) -> 'Pose':
        inv = self.rotation.inverse()
        return Pose(inv, -inv.apply(self.translation))

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Transform a point or an ``(N, 3)`` array of points."""
        return self.rotation.apply(points) + self.translation

    def apply_direction(self, directions: np.ndarray) -> np.ndarray:
        return self.rotation.apply(directions)

    def as_matrix(self) -> np.ndarray:
        matrix = np.eye(4)
        matrix[:3, :3] = self.rotation.as_matrix()
        matrix[:3, 3] = self.translation
        return matrix

    def with_translation(self, translation: Sequence[float]) -> 'Pose':
        return Pose(self.rotation, translation)

    def axis(self, index: int) -> np.ndarray:
        """Column ``index`` of the rotation matrix (the frame's x, y or z axis)."""
        return self.rotation.as_matrix()[:, index]

    # -------------------------------------------------------------------------
    # Serialization: [qw, qx, qy, qz, tx, ty, tz]
    # -------------------------------------------------------------------------

    def to_list(self) -> List[float]:
        return [float(v) for v in self.rotation.canonical()] + [float(v) for v in self.translation]

    @classmethod
    def from_list(cls, values: Sequence[float]) -> 'Pose':
        values = [float(v) for v in values]
        if len(values) != 7:
            raise InvalidInput(f"pose needs 7 floats, got {len(values)}")
        return cls(Rotation(np.array(values[:4])), values[4:])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Pose):
            return NotImplemented
        return self.rotation == other.rotation and bool(np.array_equal(self.translation, other.translation))

    __hash__ = None

    def isclose(self, other: 'Pose', angle_tol: float = 1e-9, dist_tol: float = 1e-9) -> bool:
        return (angular_distance(self.rotation, other.rotation) <= angle_tol
                and translation_distance(self, other) <= dist_tol)

    def __repr__(self) -> str:
        t = self.translation
        return f"Pose({self.rotation!r}, t=({t[0]:.6f}, {t[1]:.6f}, {t[2]:.6f}))"


def translation_distance(a: Pose, b: Pose) -> float:
    return float(np.linalg.norm(a.translation - b.translation))


def average_translations(samples: Sequence[np.ndarray],
                         weights: Optional[Sequence[float]] = None) -> np.ndarray:
    """
    Weighted arithmetic mean of 3-vectors.

    Raises:
        EmptyInput: If ``samples`` is empty.
    """
    if len(samples) == 0:
        raise EmptyInput("average_translations needs at least one sample")
    points = np.asarray(samples, dtype=float).reshape(-1, 3)
    w = _check_weights(weights, points.shape[0])
    return (points * w[:, None]).sum(axis=0) / w.sum()
