"""Rigid-body math: rotations, poses and averaging."""

from src.geometry.rotation import (
    Rotation,
    angular_distance,
    average_rotations,
    quaternion_product,
)
from src.geometry.pose import (
    Pose,
    average_translations,
    translation_distance,
)

__all__ = [
    'Rotation',
    'Pose',
    'angular_distance',
    'average_rotations',
    'average_translations',
    'quaternion_product',
    'translation_distance',
]
