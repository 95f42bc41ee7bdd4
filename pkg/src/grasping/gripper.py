"""
Gripper Model
-------------

Parallel-jaw gripper as a set of boxes in the end-effector frame. The frame
origin sits midway between the finger pads at contact height; ``z`` is the
approach direction (into the object), ``y`` the finger stroke and ``x`` the
lateral axis.
"""

import logging
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, fields
from functools import cached_property
from pathlib import Path
from typing import Any, Dict, List, NamedTuple, Tuple, Union

import numpy as np

from src.errors import ConfigError
from src.geometry import Pose
from src.mesh import TriangleMesh
from src.mesh import primitives

logger = logging.getLogger(__name__)

LATERAL_AXIS = np.array([1.0, 0.0, 0.0])
STROKE_AXIS = np.array([0.0, 1.0, 0.0])
APPROACH_AXIS = np.array([0.0, 0.0, 1.0])


class GripperPart(NamedTuple):
    name: str
    mesh: TriangleMesh
    pose: Pose          # part frame in the end-effector frame, or in the world once posed


@dataclass(frozen=True, eq=False)
class GripperModel:
    """Parallel-jaw gripper (meters)"""
    name: str = 'parallel_jaw'
    max_opening: float = 0.060
    clearance: float = 0.002            # per finger
    finger_thickness: float = 0.008
    finger_width: float = 0.020
    finger_length: float = 0.045
    tip_offset: float = 0.005
    palm_size: Tuple[float, float, float] = (0.030, 0.084, 0.020)
    wrist_size: Tuple[float, float, float] = (0.050, 0.050, 0.060)

    def __post_init__(self):
        if self.max_opening <= 0:
            raise ConfigError(f"gripper.max_opening must be positive, got {self.max_opening}")
        if self.clearance < 0:
            raise ConfigError("gripper.clearance must be >= 0")
        for name in ('finger_thickness', 'finger_width', 'finger_length'):
            if getattr(self, name) <= 0:
                raise ConfigError(f"gripper.{name} must be positive")
        for name in ('palm_size', 'wrist_size'):
            size = tuple(float(v) for v in getattr(self, name))
            if len(size) != 3 or min(size) <= 0:
                raise ConfigError(f"gripper.{name} must be three positive lengths")
            object.__setattr__(self, name, size)

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'GripperModel':
        """
        Read a gripper description from TOML.

        Raises:
            ConfigError: On unknown keys, bad values or unreadable files.
        """
        try:
            with open(path, 'rb') as handle:
                data = tomllib.load(handle)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read gripper file {path}: {exc}") from exc
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GripperModel':
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown gripper key(s): {', '.join('gripper.' + k for k in unknown)}")
        values = dict(data)
        for name in ('palm_size', 'wrist_size'):
            if name in values:
                values[name] = tuple(values[name])
        return cls(**values)

    def to_dict(self) -> Dict[str, Any]:
        data = {f.name: getattr(self, f.name) for f in fields(self)}
        data['palm_size'] = list(self.palm_size)
        data['wrist_size'] = list(self.wrist_size)
        return data

    # -------------------------------------------------------------------------
    # Geometry
    # -------------------------------------------------------------------------

    @cached_property
    def finger_mesh(self) -> TriangleMesh:
        return primitives.box((self.finger_width, self.finger_thickness, self.finger_length), name='finger')

    @cached_property
    def palm_mesh(self) -> TriangleMesh:
        return primitives.box(self.palm_size, name='palm')

    @cached_property
    def wrist_mesh(self) -> TriangleMesh:
        return primitives.box(self.wrist_size, name='wrist')

    @property
    def finger_base_z(self) -> float:
        """Approach coordinate where the fingers meet the palm."""
        return self.tip_offset - self.finger_length

    def finger_gap(self, width: float) -> float:
        """Distance between the finger pads when set for a grasp of ``width``."""
        return min(width, self.max_opening) + 2.0 * self.clearance

    def parts(self, width: float) -> List[GripperPart]:
        """Gripper boxes in the end-effector frame, fingers opened for ``width``."""
        half_gap = 0.5 * self.finger_gap(width)
        finger_z = self.tip_offset - 0.5 * self.finger_length
        finger_y = half_gap + 0.5 * self.finger_thickness
        palm_z = self.finger_base_z - 0.5 * self.palm_size[2]
        wrist_z = self.finger_base_z - self.palm_size[2] - 0.5 * self.wrist_size[2]
        return [
            GripperPart('finger_left', self.finger_mesh, Pose.from_translation((0.0, -finger_y, finger_z))),
            GripperPart('finger_right', self.finger_mesh, Pose.from_translation((0.0, finger_y, finger_z))),
            GripperPart('palm', self.palm_mesh, Pose.from_translation((0.0, 0.0, palm_z))),
            GripperPart('wrist', self.wrist_mesh, Pose.from_translation((0.0, 0.0, wrist_z))),
        ]

    def assembly(self, width: float, ee_pose: Pose) -> List[GripperPart]:
        """Parts posed in the frame ``ee_pose`` is expressed in."""
        return [GripperPart(p.name, p.mesh, ee_pose @ p.pose) for p in self.parts(width)]

    def pad_points(self, width: float, rows: int = 5, cols: int = 5) -> Tuple[np.ndarray, np.ndarray]:
        """
        Sample points on the inner finger pads (end-effector frame), covering
        the fingertip section that can reach the contact height.

        Returns:
            ``(left, right)`` arrays of ``(rows * cols, 3)`` points.
        """
        half_gap = 0.5 * self.finger_gap(width)
        xs = np.linspace(-0.4 * self.finger_width, 0.4 * self.finger_width, cols)
        reach = min(self.finger_length, 4.0 * self.tip_offset + 0.01)
        zs = np.append(np.linspace(self.tip_offset - reach, 0.0, rows - 1), self.tip_offset)
        grid_x, grid_z = np.meshgrid(xs, zs)
        left = np.column_stack([grid_x.ravel(), np.full(grid_x.size, -half_gap), grid_z.ravel()])
        right = left * np.array([1.0, -1.0, 1.0])
        return left, right
