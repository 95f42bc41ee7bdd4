"""
Symmetry Groups
---------------

Proper-rotation symmetry groups of rigid parts, expressed in the object frame.
A group holds a finite set of discrete rotations (always including the
identity) and optionally continuous axes of full revolution symmetry.

An object at rotation ``R`` looks identical at ``R * S`` for every ``S`` in its
group, so estimates that differ by a group element describe the same
detection. ``canonicalize`` picks the representative closest to a reference.
"""

import itertools
from dataclasses import dataclass, field
from typing import Any, Dict, List, Sequence, Tuple

import numpy as np

from src.errors import InvalidInput
from src.geometry import Pose, Rotation, angular_distance

# Angular tolerance (radians) for identity membership and closure checks.
CLOSURE_TOL = 1e-6


def _batched_product(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    aw, ax, ay, az = np.moveaxis(a, -1, 0)
    bw, bx, by, bz = np.moveaxis(b, -1, 0)
    return np.stack([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ], axis=-1)


@dataclass(frozen=True, eq=False)
class SymmetryGroup:
    """Discrete elements plus continuous revolution axes, object frame."""
    discrete: Tuple[Rotation, ...] = field(default_factory=lambda: (Rotation.identity(),))
    continuous_axes: Tuple[np.ndarray, ...] = ()
    name: str = 'custom'

    def __post_init__(self):
        discrete = tuple(self.discrete)
        if not discrete:
            raise InvalidInput("symmetry group needs at least the identity")
        axes = []
        for axis in self.continuous_axes:
            axis = np.asarray(axis, dtype=float).reshape(3)
            norm = np.linalg.norm(axis)
            if norm < 1e-12:
                raise InvalidInput("continuous symmetry axis must be nonzero")
            axis = axis / norm
            axis.setflags(write=False)
            axes.append(axis)
        object.__setattr__(self, 'discrete', discrete)
        object.__setattr__(self, 'continuous_axes', tuple(axes))
        self._check_group()

    def _check_group(self):
        quats = np.stack([r.q for r in self.discrete])
        if not np.any(np.abs(quats[:, 0]) >= np.cos(CLOSURE_TOL / 2)):
            raise InvalidInput(f"symmetry group {self.name!r} does not contain the identity")
        products = _batched_product(quats[:, None, :], quats[None, :, :]).reshape(-1, 4)
        best = np.abs(products @ quats.T).max(axis=1)
        if np.any(best < np.cos(CLOSURE_TOL / 2)):
            raise InvalidInput(f"symmetry group {self.name!r} is not closed under composition")

    # -------------------------------------------------------------------------
    # Built-in groups
    # -------------------------------------------------------------------------

    @classmethod
    def trivial(cls) -> 'SymmetryGroup':
        return cls(name='trivial')

    @classmethod
    def cyclic(cls, axis: Sequence[float], order: int) -> 'SymmetryGroup':
        elements = tuple(Rotation.from_axis_angle(axis, 2 * np.pi * k / order) for k in range(order))
        return cls(elements, name=f'cyclic{order}')

    @classmethod
    def box(cls) -> 'SymmetryGroup':
        """Rectangular box with three distinct edge lengths: identity and three half-turns."""
        elements = (Rotation.identity(),) + tuple(
            Rotation.from_axis_angle(axis, np.pi) for axis in np.eye(3))
        return cls(elements, name='box')

    @classmethod
    def cube(cls) -> 'SymmetryGroup':
        """The 24 proper rotations of a cube (signed permutation matrices, det +1)."""
        elements = []
        for perm in itertools.permutations(range(3)):
            for signs in itertools.product((1.0, -1.0), repeat=3):
                matrix = np.zeros((3, 3))
                matrix[range(3), perm] = signs
                if np.linalg.det(matrix) > 0:
                    elements.append(Rotation.from_matrix(matrix))
        elements.sort(key=lambda r: r.angle)
        return cls(tuple(elements), name='cube')

    @classmethod
    def cylinder(cls, axis: Sequence[float] = (0.0, 0.0, 1.0)) -> 'SymmetryGroup':
        """Revolution about ``axis`` plus the end-over-end half-turn."""
        axis = np.asarray(axis, dtype=float)
        perpendicular = np.cross(axis, [1.0, 0.0, 0.0])
        if np.linalg.norm(perpendicular) < 1e-9:
            perpendicular = np.cross(axis, [0.0, 1.0, 0.0])
        flip = Rotation.from_axis_angle(perpendicular, np.pi)
        return cls((Rotation.identity(), flip), (axis,), name='cylinder')

    @classmethod
    def sphere(cls) -> 'SymmetryGroup':
        return cls(continuous_axes=(np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0])), name='sphere')

    @classmethod
    def by_name(cls, name: str) -> 'SymmetryGroup':
        factories = {
            'trivial': cls.trivial,
            'box': cls.box,
            'cube': cls.cube,
            'cylinder': cls.cylinder,
            'sphere': cls.sphere,
        }
        if name not in factories:
            raise InvalidInput(f"unknown symmetry group {name!r}; expected one of {sorted(factories)}")
        return factories[name]()

    # -------------------------------------------------------------------------
    # Queries
    # -------------------------------------------------------------------------

    @property
    def is_full_rotation(self) -> bool:
        """Two non-parallel revolution axes generate every rotation."""
        axes = self.continuous_axes
        return any(np.linalg.norm(np.cross(a, b)) > 1e-6 for a, b in itertools.combinations(axes, 2))

    @property
    def order(self) -> float:
        """Number of elements; ``inf`` for continuous groups."""
        return float('inf') if self.continuous_axes else float(len(self.discrete))

    def canonicalize_rotation(self, rotation: Rotation, reference: Rotation) -> Rotation:
        """
        Representative ``rotation * S`` closest to ``reference``. Ties between
        discrete elements go to the lowest element index.
        """
        if self.is_full_rotation:
            return reference
        base = _batched_product(rotation.q[None, :], np.stack([d.q for d in self.discrete]))
        if self.continuous_axes:
            axis = self.continuous_axes[0]
            # Relative rotation reference^-1 * R * D_i, then the in-axis angle that
            # maximizes |w| of (relative * exp(theta/2 axis)).
            rel = _batched_product(reference.inverse().q[None, :], base)
            theta = 2.0 * np.arctan2(-(rel[:, 1:] @ axis), rel[:, 0])
            spin = np.column_stack([np.cos(theta / 2), np.sin(theta / 2)[:, None] * axis[None, :]])
            base = _batched_product(base, spin)
        candidates = [Rotation(q) for q in base]
        distances = [angular_distance(c, reference) for c in candidates]
        return candidates[int(np.argmin(distances))]

    def canonicalize(self, pose: Pose, reference: Pose) -> Pose:
        return Pose(self.canonicalize_rotation(pose.rotation, reference.rotation), pose.translation)

    def random_element(self, rng: np.random.Generator) -> Rotation:
        """Uniformly drawn group element (uniform angle on continuous axes)."""
        if self.is_full_rotation:
            return Rotation.random(rng)
        element = self.discrete[int(rng.integers(len(self.discrete)))]
        if self.continuous_axes:
            element = element * Rotation.from_axis_angle(self.continuous_axes[0], rng.uniform(0, 2 * np.pi))
        return element

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def to_dict(self) -> Dict[str, Any]:
        return {
            'name': self.name,
            'discrete': [[float(v) for v in r.canonical()] for r in self.discrete],
            'continuous_axes': [[float(v) for v in a] for a in self.continuous_axes],
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'SymmetryGroup':
        discrete: List[Rotation] = [Rotation(np.array(q)) for q in data.get('discrete', [[1.0, 0.0, 0.0, 0.0]])]
        axes = [np.array(a, dtype=float) for a in data.get('continuous_axes', [])]
        return cls(tuple(discrete), tuple(axes), name=data.get('name', 'custom'))


def canonicalize(pose: Pose, reference: Pose, group: SymmetryGroup) -> Pose:
    """Symmetry-equivalent ``pose`` whose rotation is closest to ``reference``."""
    return group.canonicalize(pose, reference)
