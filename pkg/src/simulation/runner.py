"""
Picking Run
-----------

End-to-end loop of the simulated cell:

    acquire -> perceive -> pose buffer -> scene -> plan -> execute

Iteration k renders the true bin from the current viewpoint, emulates pose
estimation on the corrupted depth, fuses the estimates into the pose buffer,
carves the scene and plans. Meanwhile the robot executes the grasp planned in
iteration k-1, so that grasp hits the ground truth only after iteration k has
acquired its image. Wall time follows the masked-time model.

Every random draw comes from a generator seeded by ``(seed, iteration,
stream)``, so a run is reproducible bit for bit and two runs that differ only
in a toggle see the same bin and the same sensor noise.
"""

import json
import logging
import time
from dataclasses import dataclass, field
from enum import IntEnum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from src.config import RunConfig, ViewpointPolicy
from src.errors import ConfigError
from src.grasping.candidates import GraspCandidate
from src.grasping.database import build_database, read_db
from src.grasping.planner import PlanOutcome, plan
from src.objects import ObjectModel, get_object_model
from src.perception.depth import corrupt_depth
from src.perception.estimator import emit_pose_estimates
from src.perception.rejection import filter_estimates
from src.perception.render import render_scene
from src.scene import SceneTarget, VoxelGrid, build_scene, depth_to_points
from src.simulation.bin_scene import BinScene, generate_bin
from src.simulation.execution import ExecutionResult, simulate_grasp_execution
from src.simulation.metrics import IterationRecord, RunMetrics, compute_metrics, write_metrics_csv
from src.simulation.scheduler import MaskedTimeline, StageDurations
from src.simulation.viewpoints import ViewpointPlan, plan_viewpoints
from src.tracking.buffer import PoseBuffer

logger = logging.getLogger(__name__)


class RandomStream(IntEnum):
    """Independent random streams of one iteration"""
    SCENE = 0
    DEPTH = 1
    ESTIMATOR = 2
    EXECUTION = 3


def stream_seed(seed: int, iteration: int, stream: RandomStream) -> int:
    return int(np.random.SeedSequence([seed, iteration, int(stream)]).generate_state(1)[0])


def write_jsonl(path: Path, records: Sequence[Mapping[str, Any]]) -> None:
    with open(path, 'w') as handle:
        for record in records:
            handle.write(json.dumps(record, sort_keys=True) + '\n')


# =============================================================================
# SETUP
# =============================================================================

def object_model_for(config: RunConfig) -> ObjectModel:
    scene = config.scene
    if scene.mesh_path:
        return get_object_model(scene.object_class, scene.mesh_path, scene.mesh_scale, scene.symmetry)
    return get_object_model(scene.object_class)


def load_databases(config: RunConfig, model: ObjectModel) -> Dict[str, List[GraspCandidate]]:
    """
    Grasp candidates for the run's object class: read from ``run.grasp_db``
    when set, generated offline otherwise.

    Raises:
        ConfigError: If the database file belongs to another class.
    """
    if config.run.grasp_db:
        database = read_db(config.run.grasp_db)
        if database.class_id != model.class_id:
            raise ConfigError(f"database is for class {database.class_id!r}, scene uses {model.class_id!r}",
                              key='run.grasp_db')
    else:
        database = build_database(model.class_id, model.mesh, model.center, config.gripper, config.grasp_gen)
    logger.info("%d grasp candidates for %r", len(database), model.class_id)
    return {model.class_id: list(database.candidates)}


@dataclass(frozen=True, eq=False)
class PendingGrasp:
    iteration: int
    outcome: PlanOutcome

    @property
    def track_id(self) -> int:
        return self.outcome.trajectory.track_id


@dataclass
class RunResult:
    config: RunConfig
    metrics: RunMetrics
    records: List[IterationRecord]
    plans: List[Dict[str, Any]] = field(default_factory=list)
    tracks: List[Dict[str, Any]] = field(default_factory=list)
    scene: Optional[BinScene] = None


# =============================================================================
# LOOP
# =============================================================================

class PickingRun:
    """
    State of one run; ``step()`` advances one iteration, ``finish()`` flushes
    the last pending motion.
    """

    def __init__(self, config: RunConfig, databases: Optional[Mapping[str, Sequence[GraspCandidate]]] = None,
                 scene_dump_dir: Optional[Path] = None):
        self.config = config
        self.model = object_model_for(config)
        self.databases = dict(databases) if databases is not None else load_databases(config, self.model)
        self.scene = generate_bin(self.model, config.scene.fill_count, config.scene.bin,
                                  stream_seed(config.seed, 0, RandomStream.SCENE), config.scene.fill)
        self.intrinsics = config.camera.intrinsics()
        self.viewpoints: ViewpointPlan = plan_viewpoints(self.scene.center, config.camera.viewpoint_radius,
                                                         config.camera.viewpoint_samples, config.planner.reach,
                                                         config.camera.max_polar_deg)
        self.buffer = PoseBuffer(config.buffer, {self.model.class_id: self.model.symmetry})
        interior = config.scene.bin.interior_bounds()
        self.grid = VoxelGrid.covering(interior[0], interior[1] + np.array([0.0, 0.0, config.voxels.headroom]),
                                       config.voxels.resolution, self.scene.bin_pose)
        self.timeline = MaskedTimeline()
        self.records: List[IterationRecord] = []
        self.plans: List[Dict[str, Any]] = []
        self.track_log: List[Dict[str, Any]] = []
        self.pending: Optional[PendingGrasp] = None
        self.iteration = 0
        self.viewpoint_index = 0
        self.successes = 0
        self.scene_dump_dir = scene_dump_dir

    # -------------------------------------------------------------------------
    # Control
    # -------------------------------------------------------------------------

    @property
    def done(self) -> bool:
        settings = self.config.run
        if self.iteration >= settings.max_iterations or self.timeline.elapsed >= settings.max_duration:
            return True
        return settings.stop_when_empty and self.scene.fill_count == 0 and self.pending is None

    def _durations(self, perception: float, planning: float) -> StageDurations:
        base = self.config.timing.durations
        if not self.config.timing.measured:
            return base
        return StageDurations(base.acquisition, perception, planning, base.motion_grasp, base.motion_release)

    def _execute_pending(self) -> Optional[ExecutionResult]:
        if self.pending is None:
            return None
        pending, self.pending = self.pending, None
        result = simulate_grasp_execution(pending.outcome.trajectory, self.scene, self.config.gripper,
                                          self.config.verification,
                                          stream_seed(self.config.seed, pending.iteration, RandomStream.EXECUTION))
        # The picked (or disturbed) object's track must not be planned again.
        self.buffer.drop(pending.track_id)
        self.successes += int(result.success)
        return result

    def _advance_viewpoint(self, early_exit: bool) -> None:
        if self.config.run.viewpoint_policy is ViewpointPolicy.EVERY_ITERATION or early_exit:
            self.viewpoint_index += 1
            if self.viewpoint_index % len(self.viewpoints) == 0:
                logger.warning("viewpoint plan exhausted after %d views, cycling (pass %d)",
                               len(self.viewpoints), self.viewpoints.cycle_of(self.viewpoint_index) + 1)

    # -------------------------------------------------------------------------
    # Iteration
    # -------------------------------------------------------------------------

    def step(self) -> IterationRecord:
        config, k = self.config, self.iteration
        camera_pose = self.viewpoints.pose_at(self.viewpoint_index)

        # Acquisition
        render = render_scene(self.scene.render_items(), camera_pose, self.intrinsics)
        depth = corrupt_depth(render.depth, render.normals, config.depth.active(),
                              stream_seed(config.seed, k, RandomStream.DEPTH))

        # Perception and pose buffer
        started = time.perf_counter()
        estimates = emit_pose_estimates(self.scene.instance_triples(), camera_pose, render, depth,
                                        config.estimator, stream_seed(config.seed, k, RandomStream.ESTIMATOR), k)
        kept, rejected = filter_estimates(estimates, self.intrinsics, config.rejection)
        self.buffer.ingest(kept, camera_pose, k)
        models = {self.model.class_id: self.model}
        self.buffer.invalidate(k, camera_pose, self.intrinsics, models, self.scene.statics())
        self.track_log.extend(self.buffer.drain_log())
        validated = self.buffer.validated(k)

        # Scene
        targets = [SceneTarget(v.track_id, self.model, v.pose, v.confidence) for v in validated]
        excluded, explainers = [], []
        if self.pending is not None and self.pending.track_id in self.buffer.tracks:
            excluded.append(self.pending.track_id)
            if all(t.track_id != self.pending.track_id for t in targets):
                explainers.append((self.model.mesh, self.buffer.tracks[self.pending.track_id].fused))
        points = depth_to_points(depth, self.intrinsics, camera_pose)
        points = points[self.grid.voxel_of(points)[1]] if len(points) else points
        scene_state = build_scene(targets, self.scene.statics(), points, self.grid, config.voxels, k,
                                  self.scene.bin_pose, self.scene.spec.floor_z, explainers, excluded)
        perceived = time.perf_counter()

        # Planning
        outcome = plan(scene_state, self.databases, config.gripper, config.planner)
        planned = time.perf_counter()

        # Timeline, then the motion planned last iteration lands on the ground truth
        start = self.timeline.elapsed
        had_pending = self.pending is not None
        self.timeline.advance(self._durations(perceived - started, planned - perceived), had_pending)
        execution = self._execute_pending()
        if outcome.feasible:
            self.pending = PendingGrasp(k, outcome)

        record = IterationRecord(
            iteration=k,
            start=start,
            end=self.timeline.elapsed,
            viewpoint=self.viewpoint_index,
            estimates=len(estimates),
            rejected=len(rejected),
            tracks=len(self.buffer),
            validated=len(validated),
            occupied_voxels=scene_state.voxels.occupied_count,
            feasible=outcome.feasible,
            early_exit=outcome.early_exit.value if outcome.early_exit else None,
            planned_track=outcome.grasp.track_id if outcome.grasp else None,
            rank_fraction=outcome.rank_fraction,
            execution=execution.to_dict() if execution else None,
            remaining=self.scene.fill_count,
            successes=self.successes,
            compute_seconds=planned - started if config.timing.measured else None,
        )
        self.records.append(record)
        self.plans.append(outcome.to_record(k))
        if self.scene_dump_dir is not None:
            self._dump(k, camera_pose, depth, scene_state)

        logger.info("iteration %d: %d estimates, %d validated, %s%s, %d objects left",
                    k, len(estimates), len(validated),
                    'planned' if outcome.feasible else f"early exit ({outcome.early_exit.value})",
                    f", executed {execution.status.value}" if execution else '', self.scene.fill_count)
        self._advance_viewpoint(not outcome.feasible)
        self.iteration += 1
        return record

    def finish(self) -> Optional[IterationRecord]:
        """Execute the motion still pending when the loop stops."""
        if self.pending is None:
            return None
        start = self.timeline.elapsed
        self.timeline.flush(self.config.timing.durations)
        execution = self._execute_pending()
        record = IterationRecord(iteration=self.iteration, start=start, end=self.timeline.elapsed, kind='flush',
                                 execution=execution.to_dict(), remaining=self.scene.fill_count,
                                 successes=self.successes)
        self.records.append(record)
        return record

    def run(self) -> RunResult:
        logger.info("run start: seed %d, %d %r objects, memory %s, depth %s", self.config.seed,
                    self.scene.fill_count, self.model.class_id, 'on' if self.config.buffer.memory else 'off',
                    self.config.depth.preset.value)
        while not self.done:
            self.step()
        self.finish()
        metrics = compute_metrics(self.records, self.timeline.elapsed, self.scene.initial_count,
                                  self.scene.fill_count, self.config.run.bucket_seconds)
        logger.info("run end: %d iterations, %d/%d picks, MPPH %.1f, %.0f s simulated",
                    metrics.iterations, metrics.successes, metrics.attempts, metrics.mpph, metrics.elapsed)
        return RunResult(self.config, metrics, self.records, self.plans, self.track_log, self.scene)

    # -------------------------------------------------------------------------
    # Dumps
    # -------------------------------------------------------------------------

    def _dump(self, k: int, camera_pose, depth, scene_state) -> None:
        folder = self.scene_dump_dir / f"iter_{k:04d}"
        folder.mkdir(parents=True, exist_ok=True)
        scene_state.voxels.dump(folder / 'voxels')
        depth.write_pgm(folder / 'depth.pgm')
        poses = {
            'iteration': k,
            'camera_pose': camera_pose.to_list(),
            'truth': self.scene.to_dict()['instances'],
            'targets': [{'track_id': t.track_id, 'pose': t.pose.to_list(), 'confidence': t.confidence}
                        for t in scene_state.targets],
        }
        (folder / 'poses.json').write_text(json.dumps(poses, sort_keys=True, indent=2) + '\n')


# =============================================================================
# ENTRY POINT
# =============================================================================

def write_outputs(result: RunResult, out_dir: Union[str, Path]) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_jsonl(out / 'events.jsonl', [r.to_dict() for r in result.records])
    write_jsonl(out / 'tracks.jsonl', result.tracks)
    write_jsonl(out / 'plans.jsonl', result.plans)
    write_metrics_csv(out / 'metrics.csv', result.metrics)
    summary = {
        'seed': result.config.seed,
        'metrics': result.metrics.to_dict(),
        'fill_failed': result.scene.fill_failed if result.scene else False,
        'config': result.config.to_dict(),
    }
    (out / 'summary.json').write_text(json.dumps(summary, sort_keys=True, indent=2) + '\n')
    logger.info("wrote run outputs to %s", out)


def run(config: RunConfig, out_dir: Optional[Union[str, Path]] = None, dump_scenes: bool = False,
        databases: Optional[Mapping[str, Sequence[GraspCandidate]]] = None) -> RunResult:
    """
    Simulate one picking run.

    Args:
        config: Complete run configuration.
        out_dir: Where to write events, tracks, plans, metrics and summary.
        dump_scenes: Also write voxels, depth and poses of every iteration.
        databases: Grasp candidates per class; loaded or generated when omitted.

    Raises:
        ConfigError: Inconsistent configuration.
    """
    dump_dir = Path(out_dir) / 'scenes' if (dump_scenes and out_dir is not None) else None
    result = PickingRun(config, databases, dump_dir).run()
    if out_dir is not None:
        write_outputs(result, out_dir)
    return result
