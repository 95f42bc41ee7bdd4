"""Simulated depth camera, pose-estimate emulator and rejection filter."""

from src.perception.camera import CameraConfig, CameraIntrinsics, project_bb_center
from src.perception.depth import (
    DepthConfig,
    DepthImage,
    DepthNoisePreset,
    DepthPresetName,
    corrupt_depth,
    default_presets,
)
from src.perception.render import RenderItem, RenderResult, render_depth, render_scene
from src.perception.estimator import (
    EstimateTruth,
    EstimatorConfig,
    PoseEstimate,
    emit_pose_estimates,
)
from src.perception.rejection import (
    RejectionConfig,
    RejectionRule,
    Verdict,
    filter_estimates,
    rejection_filter,
)

__all__ = [
    'CameraConfig',
    'CameraIntrinsics',
    'DepthConfig',
    'DepthImage',
    'DepthNoisePreset',
    'DepthPresetName',
    'EstimateTruth',
    'EstimatorConfig',
    'PoseEstimate',
    'RejectionConfig',
    'RejectionRule',
    'RenderItem',
    'RenderResult',
    'Verdict',
    'corrupt_depth',
    'default_presets',
    'emit_pose_estimates',
    'filter_estimates',
    'project_bb_center',
    'rejection_filter',
    'render_depth',
    'render_scene',
]
