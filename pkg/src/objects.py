"""
Object Catalogue
----------------

``ObjectModel`` bundles what every stage needs to know about a part class:
its mesh, its symmetry group and the orientations it can rest in. Built-in
classes are generated from primitives; any STL/OBJ file can be registered with
an explicit symmetry group.

Built-in classes:
- box: 40 x 30 x 20 mm block, four-element symmetry
- cube: 30 mm cube, 24-element symmetry
- cylinder: r = 15 mm, h = 40 mm, revolution about z plus end-over-end flip
- bracket: non-convex L profile, no symmetry
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from src.errors import InvalidInput
from src.geometry import Pose, Rotation
from src.mesh import TriangleMesh, load_mesh, raycast
from src.mesh import primitives
from src.tracking.symmetry import SymmetryGroup

logger = logging.getLogger(__name__)


# =============================================================================
# RESTING ORIENTATIONS
# =============================================================================

# Rotations that bring one face normal of an axis-aligned part onto -z.
FACE_DOWN = {
    '-z': Rotation.identity(),
    '+z': Rotation.from_axis_angle((1, 0, 0), np.pi),
    '-y': Rotation.from_axis_angle((1, 0, 0), np.pi / 2),
    '+y': Rotation.from_axis_angle((1, 0, 0), -np.pi / 2),
    '+x': Rotation.from_axis_angle((0, 1, 0), np.pi / 2),
    '-x': Rotation.from_axis_angle((0, 1, 0), -np.pi / 2),
}


@dataclass(frozen=True, eq=False)
class ObjectModel:
    """A part class: mesh in its own frame, symmetry group and stable rotations."""
    class_id: str
    mesh: TriangleMesh
    symmetry: SymmetryGroup = field(default_factory=SymmetryGroup.trivial)
    stable_rotations: Tuple[Rotation, ...] = (Rotation.identity(),)

    @cached_property
    def center(self) -> np.ndarray:
        """Geometric center: middle of the bounding box in the object frame."""
        return 0.5 * (self.mesh.bounds[0] + self.mesh.bounds[1])

    @cached_property
    def radius(self) -> float:
        """Bounding-sphere radius about ``center``."""
        return float(np.linalg.norm(self.mesh.vertices - self.center, axis=1).max())

    def chord_length(self, direction: np.ndarray) -> float:
        """
        Material thickness crossed by the line through ``center`` along
        ``direction`` (object frame), from the first entry to the last exit.
        """
        direction = np.asarray(direction, dtype=float)
        direction = direction / np.linalg.norm(direction)
        reach = 2.0 * self.radius + 1e-3
        entry = raycast(self.mesh, self.center - reach * direction, direction)
        exit_ = raycast(self.mesh, self.center + reach * direction, -direction)
        if entry is None or exit_ is None:
            return 0.0
        return max(0.0, 2.0 * reach - entry.distance - exit_.distance)

    def posed_bounds(self, pose: Pose) -> np.ndarray:
        """World AABB ``[min, max]`` of the mesh at ``pose``."""
        lo, hi = self.mesh.bounds
        corners = np.array([[x, y, z] for x in (lo[0], hi[0]) for y in (lo[1], hi[1]) for z in (lo[2], hi[2])])
        world = pose.apply(corners)
        return np.stack([world.min(axis=0), world.max(axis=0)])


# =============================================================================
# CATALOGUE
# =============================================================================

def _box_model() -> ObjectModel:
    return ObjectModel('box', primitives.box((0.040, 0.030, 0.020), name='box'),
                       SymmetryGroup.box(), tuple(FACE_DOWN.values()))


def _cube_model() -> ObjectModel:
    return ObjectModel('cube', primitives.box((0.030, 0.030, 0.030), name='cube'),
                       SymmetryGroup.cube(), (Rotation.identity(),))


def _cylinder_model() -> ObjectModel:
    return ObjectModel('cylinder', primitives.cylinder(0.015, 0.040, name='cylinder'),
                       SymmetryGroup.cylinder(), (FACE_DOWN['-z'], FACE_DOWN['-y']))


def _bracket_model() -> ObjectModel:
    mesh = primitives.l_bracket(length=0.050, width=0.025, height=0.030, thickness=0.006, name='bracket')
    return ObjectModel('bracket', mesh, SymmetryGroup.trivial(),
                       (FACE_DOWN['-z'], FACE_DOWN['-x'], FACE_DOWN['-y'], FACE_DOWN['+y']))


CATALOGUE: Dict[str, Callable[[], ObjectModel]] = {
    'box': _box_model,
    'cube': _cube_model,
    'cylinder': _cylinder_model,
    'bracket': _bracket_model,
}

_CACHE: Dict[str, ObjectModel] = {}


def get_object_model(class_id: str, mesh_path: Optional[Union[str, Path]] = None,
                     mesh_scale: float = 1.0, symmetry: Optional[str] = None) -> ObjectModel:
    """
    Built-in model by class id, or a model loaded from ``mesh_path``.

    File-based models are centered on their bounding box; they get the named
    symmetry group (trivial by default) and all six face-down orientations.
    """
    if mesh_path is None:
        if class_id not in CATALOGUE:
            raise InvalidInput(f"unknown object class {class_id!r}; built-ins are {sorted(CATALOGUE)}")
        if class_id not in _CACHE:
            _CACHE[class_id] = CATALOGUE[class_id]()
        return _CACHE[class_id]

    mesh = load_mesh(mesh_path, scale=mesh_scale, name=class_id)
    offset = np.eye(4)
    offset[:3, 3] = -0.5 * (mesh.bounds[0] + mesh.bounds[1])
    mesh = mesh.transformed(offset)
    group = SymmetryGroup.by_name(symmetry or 'trivial')
    logger.info("registered object class %r from %s (%d triangles)", class_id, mesh_path, mesh.triangle_count)
    return ObjectModel(class_id, mesh, group, tuple(FACE_DOWN.values()))
