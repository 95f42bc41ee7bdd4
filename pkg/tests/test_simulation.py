import io
import itertools
import json
import logging

import numpy as np
import pandas as pd
import pytest

from src.config import RunConfig
from src.errors import FillFailure, InvalidInput, NoReachableViewpoint, ParseError
from src.geometry import Pose, Rotation
from src.grasping import ReachModel
from src.grasping.validation import GraspTrajectory
from src.mesh import meshes_intersect
from src.simulation import (
    BinScene,
    BinSpec,
    ExecutionStatus,
    FillConfig,
    IterationRecord,
    MaskedTimeline,
    StageDurations,
    VerificationConfig,
    bucket_metrics,
    compute_metrics,
    farthest_point_order,
    fibonacci_cap,
    generate_bin,
    masked_time_step,
    plan_viewpoints,
    simulate_grasp_execution,
)
from src.simulation.ablation import AblationAxis, compare_arms, paired_statistics, run_ablation, sign_consistency
from src.simulation.report import build_report, load_summaries, prepare_dataframe
from src.simulation.runner import PickingRun, load_databases, run, stream_seed, RandomStream
from src.simulation.viewpoints import selection_gaps

# Cube resting on the bin floor with the fill settle gap below it.
CUBE_Z = 0.008 + 0.015 + 0.0005


def _small_config(**overrides):
    values = {'scene.fill_count': 3, 'run.max_iterations': 4, 'grasp_gen.n_pairs': 8}
    values.update(overrides)
    return RunConfig().with_overrides(values)


@pytest.fixture(scope='module')
def box_databases(box_model):
    return load_databases(_small_config(), box_model)


# =============================================================================
# BIN GENERATION
# =============================================================================

def test_empty_fill(box_model):
    scene = generate_bin(box_model, 0)
    assert scene.fill_count == 0
    assert not scene.fill_failed


def test_negative_count_rejected(box_model):
    with pytest.raises(InvalidInput):
        generate_bin(box_model, -1)


def test_single_object_rests_on_floor(box_model):
    scene = generate_bin(box_model, 1, seed=5)
    (instance,) = scene.instances.values()
    spec = scene.spec
    assert instance.bounds()[0, 2] == pytest.approx(spec.floor_z + FillConfig().settle_gap, abs=1e-9)
    assert scene.inside(box_model, instance.pose)


def test_filled_bin_has_no_penetrations(box_model):
    scene = generate_bin(box_model, 15, seed=3)
    assert scene.fill_count == 15
    instances = list(scene.instances.values())
    for instance in instances:
        assert scene.inside(instance.model, instance.pose)
        assert not meshes_intersect(instance.model.mesh, instance.pose, scene.bin_mesh, scene.bin_pose)
    for a, b in itertools.combinations(instances, 2):
        assert not meshes_intersect(a.model.mesh, a.pose, b.model.mesh, b.pose)


def test_fill_is_seeded(cube_model):
    assert generate_bin(cube_model, 6, seed=11).to_dict() == generate_bin(cube_model, 6, seed=11).to_dict()
    assert generate_bin(cube_model, 6, seed=11).to_dict() != generate_bin(cube_model, 6, seed=12).to_dict()


def test_overfull_bin_reports_partial_fill(box_model):
    tiny = BinSpec(length=0.06, width=0.06, depth=0.05)
    fill = FillConfig(attempts_per_object=5)
    scene = generate_bin(box_model, 5, tiny, seed=0, fill=fill)
    assert scene.fill_failed
    assert scene.fill_count < 5
    with pytest.raises(FillFailure) as info:
        generate_bin(box_model, 5, tiny, seed=0, fill=fill, strict=True)
    assert info.value.partial.fill_count == scene.fill_count


# =============================================================================
# VIEWPOINTS
# =============================================================================

def test_fibonacci_cap():
    assert np.allclose(fibonacci_cap(1, 35.0), [[0.0, 0.0, 1.0]])
    directions = fibonacci_cap(10, 35.0)
    assert np.allclose(directions[0], [0.0, 0.0, 1.0])
    assert np.allclose(np.linalg.norm(directions, axis=1), 1.0)
    assert np.all(directions[:, 2] >= np.cos(np.radians(35.0)) - 1e-12)
    with pytest.raises(InvalidInput):
        fibonacci_cap(0, 35.0)


def test_plan_starts_top_down_and_aims_at_target():
    target = np.array([0.0, 0.0, 0.008])
    viewpoints = plan_viewpoints(target, 0.45, 24, ReachModel())
    assert len(viewpoints) == 24
    first = viewpoints.pose_at(0)
    assert np.allclose(first.translation, target + [0.0, 0.0, 0.45])
    assert np.allclose(first.axis(2), [0.0, 0.0, -1.0])
    for pose in viewpoints.poses:
        aim = (target - pose.translation) / np.linalg.norm(target - pose.translation)
        assert np.degrees(np.arccos(np.clip(aim @ pose.axis(2), -1.0, 1.0))) < 1.0
        assert np.linalg.norm(target - pose.translation) == pytest.approx(0.45)


def test_plan_cycles():
    viewpoints = plan_viewpoints((0.0, 0.0, 0.0), 0.45, 6, ReachModel())
    assert viewpoints.pose_at(len(viewpoints)) is viewpoints.poses[0]
    assert viewpoints.cycle_of(len(viewpoints) + 1) == 1


def test_no_reachable_viewpoint():
    with pytest.raises(NoReachableViewpoint):
        plan_viewpoints((0.0, 0.0, 0.0), 0.45, 12, ReachModel(r_max=0.3))


def _best_permutation(directions, start):
    rest = [i for i in range(len(directions)) if i != start]
    return max(([start] + list(p) for p in itertools.permutations(rest)),
               key=lambda order: selection_gaps(directions, order))


def test_three_directions_on_a_great_circle():
    angles = np.radians([0.0, 30.0, 100.0])
    directions = np.column_stack([np.sin(angles), np.zeros(3), np.cos(angles)])
    order = farthest_point_order(directions, 0)
    assert order == [0, 2, 1]
    assert order == _best_permutation(directions, 0)


def test_greedy_order_matches_exhaustive_search(rng):
    directions = rng.normal(size=(6, 3))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    assert farthest_point_order(directions, 0) == _best_permutation(directions, 0)


# =============================================================================
# EXECUTION
# =============================================================================

def _grasp_pose(x=0.0, y=0.0):
    """Top-down, closing along world x, at the cube's center height."""
    return Pose.from_axes((0, 1, 0), (1, 0, 0), (0, 0, -1), (x, y, CUBE_Z))


def _trajectory(ee_pose, width, track_id=1):
    above = ee_pose.with_translation(ee_pose.translation + np.array([0.0, 0.0, 0.08]))
    return GraspTrajectory((above, ee_pose, above, above), (0.0, 1.0, 2.0, 3.0), width, track_id, 0.005)


def _cell(model, pose):
    scene = BinScene(BinSpec())
    instance = scene.add(model, pose)
    return scene, instance.instance_id


def test_centered_grasp_succeeds(cube_model, gripper):
    scene, instance_id = _cell(cube_model, Pose.from_translation((0.0, 0.0, CUBE_Z)))
    result = simulate_grasp_execution(_trajectory(_grasp_pose(), 0.03), scene, gripper, VerificationConfig(), seed=0)
    assert result.status is ExecutionStatus.SUCCESS
    assert result.instance_id == instance_id
    assert result.d_fingers == pytest.approx(0.03, abs=1e-6)
    assert result.v_fingers == 0.0
    assert result.normal_deviation_deg == pytest.approx(0.0, abs=1e-6)
    assert scene.fill_count == 0
    assert scene.removed == [instance_id]


def test_offset_grasp_closes_empty(cube_model, gripper):
    scene, _ = _cell(cube_model, Pose.from_translation((0.0, 0.0, CUBE_Z)))
    result = simulate_grasp_execution(_trajectory(_grasp_pose(y=0.05), 0.03), scene, gripper,
                                      VerificationConfig(), seed=0)
    assert result.status is ExecutionStatus.EMPTY
    assert result.detail == 'no_contact'
    assert result.d_fingers < VerificationConfig().epsilon
    assert scene.fill_count == 1


def test_rotated_object_slips(cube_model, gripper):
    truth = Pose(Rotation.from_axis_angle((0, 0, 1), np.radians(25.0)), (0.0, 0.0, CUBE_Z))
    scene, instance_id = _cell(cube_model, truth)
    config = VerificationConfig(perturb_probability=0.0)
    result = simulate_grasp_execution(_trajectory(_grasp_pose(), 0.04), scene, gripper, config, seed=0)
    assert result.status is ExecutionStatus.SLIP
    assert result.detail == 'outside_friction_cone'
    assert result.normal_deviation_deg > config.friction_half_angle_deg
    assert result.v_fingers > config.epsilon
    assert scene.instances[instance_id].pose == truth


def test_failure_can_disturb_the_object(cube_model, gripper):
    truth = Pose(Rotation.from_axis_angle((0, 0, 1), np.radians(25.0)), (0.0, 0.0, CUBE_Z))
    scene, instance_id = _cell(cube_model, truth)
    config = VerificationConfig(perturb_probability=1.0)
    result = simulate_grasp_execution(_trajectory(_grasp_pose(), 0.04), scene, gripper, config, seed=3)
    assert result.status is ExecutionStatus.SLIP
    assert result.disturbed
    moved = scene.instances[instance_id].pose
    assert moved != truth
    assert np.linalg.norm(moved.translation[:2] - truth.translation[:2]) <= np.sqrt(2.0) * config.perturb_max_shift
    assert moved.translation[2] == truth.translation[2]


# =============================================================================
# MASKED TIME
# =============================================================================

def test_masked_time_step():
    durations = StageDurations()
    assert masked_time_step(durations, True) == pytest.approx(3.2)
    assert masked_time_step(durations, False) == pytest.approx(1.4)
    quick = StageDurations(motion_grasp=0.5)
    assert masked_time_step(quick, True) == pytest.approx(1.4)


def test_timeline_flush():
    timeline = MaskedTimeline()
    timeline.advance(StageDurations(), False)
    timeline.advance(StageDurations(), True)
    assert timeline.flush(StageDurations()) == pytest.approx(3.0)
    assert timeline.elapsed == pytest.approx(1.4 + 3.2 + 3.0)
    assert len(timeline.steps) == 3


def test_flush_is_logged(caplog):
    timeline = MaskedTimeline()
    timeline.advance(StageDurations(), False)
    with caplog.at_level(logging.DEBUG, logger='src.simulation.scheduler'):
        timeline.flush(StageDurations())
    assert 'Flushed pending motion: 3.00 s' in caplog.text


def test_negative_duration_rejected():
    with pytest.raises(InvalidInput):
        StageDurations(planning=-0.1)


# =============================================================================
# METRICS
# =============================================================================

def _records():
    return [
        IterationRecord(0, 0.0, 1.4, feasible=True, rank_fraction=0.5),
        IterationRecord(1, 1.4, 4.6, early_exit='no_feasible', execution={'status': 'success'}),
        IterationRecord(2, 4.6, 6.0, feasible=True, rank_fraction=0.25),
    ]


def test_headline_metrics():
    metrics = compute_metrics(_records(), 6.0, initial_count=4, remaining=3)
    assert metrics.mpph == pytest.approx(600.0)
    assert metrics.sr == pytest.approx(1.0)
    assert metrics.eer == pytest.approx(1.0 / 3.0)
    assert metrics.mean_rank_fraction == pytest.approx(0.375)
    assert metrics.removed_fraction == pytest.approx(0.25)


def test_flush_counts_as_attempt_not_iteration():
    records = _records() + [IterationRecord(3, 6.0, 9.0, kind='flush', execution={'status': 'slip'})]
    metrics = compute_metrics(records, 9.0)
    assert metrics.iterations == 3
    assert metrics.attempts == 2
    assert metrics.sr == pytest.approx(0.5)
    assert metrics.failures == {'slip': 1}
    assert metrics.mpph == pytest.approx(400.0)


def test_empty_metrics():
    metrics = compute_metrics([], 0.0)
    assert metrics.mpph == 0.0
    assert metrics.sr is None
    assert metrics.eer is None
    assert metrics.buckets.empty


def test_buckets():
    records = [
        IterationRecord(0, 0.0, 100.0),
        IterationRecord(1, 100.0, 300.0, early_exit='no_targets'),
        IterationRecord(2, 300.0, 301.0, execution={'status': 'empty'}),
        IterationRecord(3, 301.0, 650.0, execution={'status': 'success'}),
    ]
    buckets = bucket_metrics(records, 650.0, 300.0)
    assert buckets['iterations'].tolist() == [2, 1, 1]
    assert buckets['early_exits'].tolist() == [1, 0, 0]
    assert buckets['end'].tolist() == [300.0, 600.0, 650.0]
    assert buckets['mpph'].tolist() == pytest.approx([0.0, 0.0, 72.0])
    assert np.isnan(buckets['sr'][0])
    assert buckets['sr'][1] == 0.0
    with pytest.raises(InvalidInput):
        bucket_metrics(records, 650.0, 0.0)


# =============================================================================
# END TO END
# =============================================================================

def test_stream_seeds_are_independent():
    seeds = {stream_seed(0, k, s) for k in range(3) for s in RandomStream}
    assert len(seeds) == 12
    assert stream_seed(4, 2, RandomStream.DEPTH) == stream_seed(4, 2, RandomStream.DEPTH)


def test_arms_share_the_bin(box_databases):
    with_memory = PickingRun(_small_config(**{'buffer.memory': True}), box_databases)
    without = PickingRun(_small_config(**{'buffer.memory': False}), box_databases)
    assert with_memory.scene.to_dict() == without.scene.to_dict()
    assert [p.to_list() for p in with_memory.viewpoints.poses] == [p.to_list() for p in without.viewpoints.poses]


def test_run_is_reproducible(box_databases):
    first = run(_small_config(seed=2), databases=box_databases)
    second = run(_small_config(seed=2), databases=box_databases)
    assert [r.to_dict() for r in first.records] == [r.to_dict() for r in second.records]
    assert first.plans == second.plans
    assert first.metrics.to_dict() == second.metrics.to_dict()


def test_events_file_is_byte_identical(tmp_path, box_databases):
    for name in ('first', 'second'):
        run(_small_config(seed=5), tmp_path / name, databases=box_databases)
    first = (tmp_path / 'first' / 'events.jsonl').read_bytes()
    assert first
    assert first == (tmp_path / 'second' / 'events.jsonl').read_bytes()


def test_run_bookkeeping(box_databases):
    result = run(_small_config(seed=1), databases=box_databases)
    records = result.records
    assert 1 <= result.metrics.iterations <= 4
    assert records[0].start == 0.0
    assert records[0].end == pytest.approx(1.4)
    for previous, record in zip(records, records[1:]):
        assert record.start == previous.end
    metrics = result.metrics
    assert metrics.successes <= metrics.attempts
    assert metrics.successes + metrics.remaining == metrics.initial_count
    # Tracks need two observations, so nothing is graspable after the first view.
    assert records[0].validated == 0
    assert records[0].early_exit == 'no_targets'
    iterations = [r for r in records if r.kind == 'iteration']
    assert [r.viewpoint for r in iterations] == list(range(len(iterations)))


def test_zero_duration_run(box_databases):
    result = run(_small_config(**{'run.max_duration': 0.0}), databases=box_databases)
    assert result.records == []
    assert result.metrics.iterations == 0
    assert result.metrics.mpph == 0.0
    assert result.metrics.sr is None


def test_memory_off_grasps_single_observations(box_databases):
    result = run(_small_config(**{'buffer.memory': False}), databases=box_databases)
    for record in result.records:
        if record.kind == 'iteration':
            assert record.validated <= record.estimates - record.rejected


def test_viewpoint_waits_for_early_exit(box_databases):
    config = _small_config(**{'run.viewpoint_policy': 'on_early_exit'})
    result = run(config, databases=box_databases)
    records = [r for r in result.records if r.kind == 'iteration']
    assert records[0].viewpoint == 0
    for previous, record in zip(records, records[1:]):
        expected = previous.viewpoint + (1 if previous.early_exit else 0)
        assert record.viewpoint == expected


def test_run_outputs_and_report(tmp_path, box_databases):
    out = tmp_path / 'run'
    result = run(_small_config(), out, dump_scenes=True, databases=box_databases)
    events = (out / 'events.jsonl').read_text().splitlines()
    assert len(events) == len(result.records)
    assert json.loads(events[0])['iteration'] == 0
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['metrics']['iterations'] == result.metrics.iterations
    assert (out / 'metrics.csv').exists()
    assert (out / 'plans.jsonl').exists()
    assert (out / 'scenes' / 'iter_0000' / 'poses.json').exists()

    frame = pd.read_csv(io.StringIO(build_report(tmp_path)))
    assert frame['run'].tolist() == ['run']
    assert frame['iterations'].tolist() == [result.metrics.iterations]


# =============================================================================
# ABLATION AND REPORTS
# =============================================================================

def _paired_runs():
    reference = np.array([0.9, 0.8, 0.85, 0.95, 0.7, 0.9])
    deltas = np.array([0.1, 0.2, 0.05, 0.15, 0.25, 0.3])
    rows = []
    for seed, (a, d) in enumerate(zip(reference, deltas)):
        rows.append({'arm': 'with_memory', 'seed': seed, 'sr': a, 'eer': 0.1, 'mpph': 300.0 + seed})
        rows.append({'arm': 'no_memory', 'seed': seed, 'sr': a - d, 'eer': None if seed == 0 else 0.3,
                     'mpph': 250.0 + seed})
    return pd.DataFrame(rows)


def test_compare_arms():
    comparison = compare_arms(_paired_runs(), 'with_memory', 'no_memory').set_index('metric')
    sr = comparison.loc['sr']
    assert sr['seeds'] == 6
    assert sr['mean_delta'] == pytest.approx(0.175)
    assert sr['sign_consistency'] == 1.0
    assert sr['p_value'] == pytest.approx(0.03125)
    assert bool(sr['significant'])
    assert comparison.loc['eer', 'seeds'] == 5
    assert comparison.loc['eer', 'mean_delta'] == pytest.approx(-0.2)
    assert comparison.loc['mpph', 'mean_delta'] == pytest.approx(50.0)


def test_paired_statistics_edge_cases():
    _, _, d = paired_statistics(np.ones(4), np.ones(4))
    assert d == 0.0
    _, p_value, _ = paired_statistics(np.array([1.0]), np.array([0.0]))
    assert np.isnan(p_value)


def test_sign_consistency():
    assert sign_consistency(np.array([1.0, -1.0, 2.0])) == pytest.approx(2.0 / 3.0)
    assert np.isnan(sign_consistency(np.array([1.0, -1.0])))
    assert np.isnan(sign_consistency(np.array([])))


def test_ablation_arms():
    assert AblationAxis.MEMORY.arms()[1] == ('no_memory', {'buffer.memory': False})
    assert AblationAxis('depth').arms()[0][1] == {'depth.preset': 'enhanced'}


@pytest.mark.slow
def test_memory_ablation_end_to_end(tmp_path, box_databases):
    config = _small_config(**{'run.max_iterations': 3})
    report = run_ablation(config, AblationAxis.MEMORY, [0, 1], tmp_path, databases=box_databases)
    assert len(report.runs) == 4
    assert set(report.runs['arm']) == {'with_memory', 'no_memory'}
    assert report.comparison['metric'].tolist() == ['sr', 'eer', 'mpph']
    assert (tmp_path / 'ablation_comparison.csv').exists()
    assert len(load_summaries(tmp_path)) == 4


@pytest.fixture(scope='module')
def default_databases(box_model):
    return load_databases(RunConfig(), box_model)


def _per_seed(report, metric):
    """Reference and ablated values of ``metric`` for seeds where both are defined."""
    wide = report.runs.pivot(index='seed', columns='arm', values=metric).apply(pd.to_numeric, errors='coerce')
    reference, ablated = (label for label, _ in report.axis.arms())
    wide = wide.dropna()
    return wide[reference].to_numpy(), wide[ablated].to_numpy()


@pytest.mark.slow
def test_memory_raises_success_rate(default_databases):
    report = run_ablation(RunConfig(), AblationAxis.MEMORY, range(10), databases=default_databases)
    with_memory, without = _per_seed(report, 'sr')
    assert len(with_memory) == 10
    assert np.mean(with_memory - without) >= 0.05
    assert np.sum(with_memory > without) >= 9


@pytest.mark.slow
def test_raw_depth_is_no_better_than_enhanced(default_databases):
    report = run_ablation(RunConfig(), AblationAxis.DEPTH, range(10), databases=default_databases)
    enhanced_sr, raw_sr = _per_seed(report, 'sr')
    enhanced_eer, raw_eer = _per_seed(report, 'eer')
    assert np.mean(raw_sr) <= np.mean(enhanced_sr)
    assert np.mean(raw_eer) >= np.mean(enhanced_eer)
    assert np.sum(raw_sr <= enhanced_sr) >= 8
    assert np.sum(raw_eer >= enhanced_eer) >= 8


@pytest.mark.slow
def test_full_bin_is_emptied(default_databases):
    result = run(RunConfig(), databases=default_databases)
    metrics = result.metrics
    assert metrics.initial_count == 100
    assert metrics.removed_fraction >= 0.9
    eer = metrics.buckets['eer'].dropna()
    assert len(eer) >= 2
    assert eer.iloc[-1] >= eer.iloc[0]


def test_prepare_dataframe():
    summaries = [
        {'run': 'a', 'seed': 0, 'metrics': {'iterations': 5, 'mpph': 120.0, 'sr': 0.5},
         'config': {'buffer': {'memory': True}, 'depth': {'preset': 'raw'}}},
        {'run': 'b', 'seed': 1, 'metrics': {}},
    ]
    frame = prepare_dataframe(summaries)
    assert frame['iterations'].tolist() == [5, 0]
    assert frame.loc[0, 'depth_preset'] == 'raw'
    assert bool(frame.loc[0, 'memory'])


def test_bad_summary_is_a_parse_error(tmp_path):
    (tmp_path / 'summary.json').write_text('{"seed": 1,')
    with pytest.raises(ParseError):
        load_summaries(tmp_path)
