import math
from pathlib import Path

import pytest

from src.config import RunConfig, ViewpointPolicy
from src.errors import ConfigError
from src.perception.depth import DepthPresetName

CONFIGS = Path(__file__).resolve().parent.parent / 'configs'


def test_shipped_run_config_lists_the_defaults():
    assert RunConfig.load(CONFIGS / 'run.toml').to_dict() == RunConfig().to_dict()


def test_defaults():
    config = RunConfig()
    assert config.buffer.memory
    assert config.depth.preset is DepthPresetName.ENHANCED
    assert config.run.viewpoint_policy is ViewpointPolicy.EVERY_ITERATION
    assert math.isinf(config.run.max_duration)
    assert config.to_dict()['run']['max_duration'] == 'inf'


def test_partial_file_overlays_defaults(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('seed = 3\n\n[buffer]\nmemory = false\n\n[scene.bin]\nlength = 0.4\n')
    config = RunConfig.load(path)
    assert config.seed == 3
    assert not config.buffer.memory
    assert config.scene.bin.length == 0.4
    assert config.scene.bin.width == RunConfig().scene.bin.width
    assert config.planner == RunConfig().planner


def test_with_overrides_leaves_the_original_alone():
    base = RunConfig()
    changed = base.with_overrides({'buffer.memory': False, 'run.viewpoint_policy': 'on_early_exit',
                                   'depth.preset': 'raw', 'run.max_duration': 600})
    assert base.buffer.memory
    assert not changed.buffer.memory
    assert changed.run.viewpoint_policy is ViewpointPolicy.ON_EARLY_EXIT
    assert changed.depth.preset is DepthPresetName.RAW
    assert changed.run.max_duration == 600.0
    assert isinstance(changed.run.max_duration, float)


def test_preset_tables_merge_entry_by_entry():
    config = RunConfig.from_dict({'depth': {'presets': {'raw': {'gaussian_sigma': 0.006}}}})
    assert config.depth.presets['raw'].gaussian_sigma == 0.006
    assert config.depth.presets['raw'].incidence_deg == RunConfig().depth.presets['raw'].incidence_deg
    assert config.depth.presets['enhanced'] == RunConfig().depth.presets['enhanced']


@pytest.mark.parametrize('overrides, key', [
    ({'buffer.colour': 1}, 'buffer.colour'),
    ({'seeds': 1}, 'seeds'),
    ({'buffer.memory': 'yes'}, 'buffer.memory'),
    ({'run.max_iterations': 2.5}, 'run.max_iterations'),
    ({'run.max_iterations': -1}, 'run.max_iterations'),
    ({'run.viewpoint_policy': 'sometimes'}, 'run.viewpoint_policy'),
    ({'scene.fill_count': -4}, 'scene.fill_count'),
    ({'scene.object_class': 7}, 'scene.object_class'),
])
def test_bad_values_name_their_key(overrides, key):
    with pytest.raises(ConfigError) as info:
        RunConfig().with_overrides(overrides)
    assert info.value.key == key
    assert str(info.value).startswith(key)


def test_section_validation_is_a_config_error():
    with pytest.raises(ConfigError) as info:
        RunConfig().with_overrides({'verification.epsilon': 0.0})
    assert info.value.key == 'verification'


def test_table_expected(tmp_path):
    path = tmp_path / 'run.toml'
    path.write_text('buffer = 3\n')
    with pytest.raises(ConfigError) as info:
        RunConfig.load(path)
    assert info.value.key == 'buffer'


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        RunConfig.load(tmp_path / 'missing.toml')
    path = tmp_path / 'broken.toml'
    path.write_text('[buffer\n')
    with pytest.raises(ConfigError):
        RunConfig.load(path)
