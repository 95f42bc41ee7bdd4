import json

import pytest

from src.cli import main, parse_overrides
from src.errors import ConfigError
from src.grasping.database import read_db
from src.mesh import primitives
from src.mesh.io import write_stl


def test_parse_overrides():
    values = parse_overrides(['buffer.memory=false', 'seed=3', 'run.max_duration=60.5',
                              'run.viewpoint_policy=on_early_exit', 'scene.object_class="cube"'])
    assert values == {
        'buffer.memory': False,
        'seed': 3,
        'run.max_duration': 60.5,
        'run.viewpoint_policy': 'on_early_exit',
        'scene.object_class': 'cube',
    }
    with pytest.raises(ConfigError):
        parse_overrides(['buffer.memory'])


def test_config_errors_exit_with_status_2():
    assert main(['simulate', '--set', 'buffer.colour=1']) == 2


def test_simulate_writes_a_run(tmp_path, capsys):
    out = tmp_path / 'run'
    status = main(['simulate', '--seed', '1', '--out', str(out), '--set', 'scene.fill_count=2',
                   '--set', 'run.max_iterations=2', '--set', 'grasp_gen.n_pairs=6'])
    assert status == 0
    summary = json.loads((out / 'summary.json').read_text())
    assert summary['seed'] == 1
    assert summary['metrics']['iterations'] == 2
    assert 'MPPH=' in capsys.readouterr().out


def test_report(tmp_path, capsys):
    for name, sr in (('a', 0.5), ('b', 0.75)):
        (tmp_path / name).mkdir()
        summary = {'seed': 0, 'metrics': {'iterations': 4, 'sr': sr}, 'config': {}}
        (tmp_path / name / 'summary.json').write_text(json.dumps(summary))
    assert main(['report', '--in', str(tmp_path), '--format', 'json']) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [row['run'] for row in rows] == ['a', 'b']
    assert [row['sr'] for row in rows] == [0.5, 0.75]


def test_gen_grasps_for_a_builtin_class(tmp_path):
    out = tmp_path / 'cube.json'
    assert main(['gen-grasps', '--mesh', 'cube', '--set', 'grasp_gen.n_pairs=6', '--out', str(out)]) == 0
    database = read_db(out)
    assert database.class_id == 'cube'
    assert len(database) > 0


def test_gen_grasps_for_a_mesh_file(tmp_path):
    mesh_path = tmp_path / 'part.stl'
    write_stl(mesh_path, primitives.box((40.0, 30.0, 20.0)))
    out = tmp_path / 'part.json'
    status = main(['gen-grasps', '--mesh', str(mesh_path), '--scale', '0.001', '--set', 'grasp_gen.n_pairs=6',
                   '--out', str(out)])
    assert status == 0
    assert read_db(out).class_id == 'part'


def test_gen_grasps_missing_mesh(tmp_path):
    assert main(['gen-grasps', '--mesh', str(tmp_path / 'nope.stl'), '--out', str(tmp_path / 'x.json')]) == 2
