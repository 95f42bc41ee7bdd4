"""
Simulated picking cell: bin generation, viewpoints, grasp execution, masked
time and metrics. The loop itself lives in ``src.simulation.runner`` and the
paired comparisons in ``src.simulation.ablation``; import them from there.
"""

from src.simulation.bin_scene import BinScene, BinSpec, FillConfig, ObjectInstance, generate_bin, perturb_instance
from src.simulation.viewpoints import ViewpointPlan, farthest_point_order, fibonacci_cap, plan_viewpoints
from src.simulation.execution import ExecutionResult, ExecutionStatus, VerificationConfig, simulate_grasp_execution
from src.simulation.scheduler import MaskedTimeline, StageDurations, masked_time_step
from src.simulation.metrics import IterationRecord, RunMetrics, bucket_metrics, compute_metrics

__all__ = [
    'BinScene',
    'BinSpec',
    'ExecutionResult',
    'ExecutionStatus',
    'FillConfig',
    'IterationRecord',
    'MaskedTimeline',
    'ObjectInstance',
    'RunMetrics',
    'StageDurations',
    'VerificationConfig',
    'ViewpointPlan',
    'bucket_metrics',
    'compute_metrics',
    'farthest_point_order',
    'fibonacci_cap',
    'generate_bin',
    'masked_time_step',
    'perturb_instance',
    'plan_viewpoints',
    'simulate_grasp_execution',
]
