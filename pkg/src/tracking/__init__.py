"""Symmetry-aware temporal pose buffer."""

from src.tracking.symmetry import SymmetryGroup, canonicalize
from src.tracking.buffer import (
    BufferConfig,
    PoseBuffer,
    TrackedObject,
    ValidatedPose,
    associate,
    validated_poses,
)

__all__ = [
    'BufferConfig',
    'PoseBuffer',
    'SymmetryGroup',
    'TrackedObject',
    'ValidatedPose',
    'associate',
    'canonicalize',
    'validated_poses',
]
