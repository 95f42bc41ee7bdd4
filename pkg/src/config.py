"""
Run Configuration
-----------------

Every tunable of a simulated picking run, as a tree of dataclass sections
with their defaults. A TOML file overlays any subset of fields:

    seed = 3

    [buffer]
    memory = false

    [planner.weights]
    align = 0.5

Unknown keys, wrongly typed values and values a section rejects raise
``ConfigError`` naming the dotted key.
"""

import logging
import math
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, is_dataclass, replace
from enum import Enum
from pathlib import Path
from typing import Any, Dict, Mapping, Union

from src.errors import BinPickError, ConfigError
from src.grasping.candidates import GraspGenConfig
from src.grasping.gripper import GripperModel
from src.grasping.planner import PlannerConfig
from src.perception.camera import CameraConfig
from src.perception.depth import DepthConfig
from src.perception.estimator import EstimatorConfig
from src.perception.rejection import RejectionConfig
from src.scene.voxels import VoxelConfig
from src.simulation.bin_scene import BinSpec, FillConfig
from src.simulation.execution import VerificationConfig
from src.simulation.scheduler import StageDurations
from src.tracking.buffer import BufferConfig

logger = logging.getLogger(__name__)


# =============================================================================
# RUN-LEVEL SECTIONS
# =============================================================================

class ViewpointPolicy(Enum):
    """When the camera moves to the next planned viewpoint"""
    EVERY_ITERATION = "every_iteration"
    ON_EARLY_EXIT = "on_early_exit"


@dataclass(frozen=True)
class SceneConfig:
    """Object class and bin fill"""
    object_class: str = 'box'
    mesh_path: str = ''                 # STL/OBJ file; empty selects a built-in class
    mesh_scale: float = 1.0             # file units to meters
    symmetry: str = 'trivial'           # group name for file-based classes
    fill_count: int = 100
    bin: BinSpec = field(default_factory=BinSpec)
    fill: FillConfig = field(default_factory=FillConfig)

    def __post_init__(self):
        if self.fill_count < 0:
            raise ConfigError(f"must be >= 0, got {self.fill_count}", key='scene.fill_count')


@dataclass(frozen=True)
class TimingConfig:
    """Masked-time model"""
    durations: StageDurations = field(default_factory=StageDurations)
    measured: bool = False              # use real perception/planning compute time


@dataclass(frozen=True)
class RunSettings:
    """Loop budget and outputs"""
    max_iterations: int = 200
    max_duration: float = math.inf      # simulated seconds
    bucket_seconds: float = 300.0       # metric bucket length
    stop_when_empty: bool = True
    viewpoint_policy: ViewpointPolicy = ViewpointPolicy.EVERY_ITERATION
    grasp_db: str = ''                  # prebuilt database; empty generates one at startup

    def __post_init__(self):
        if self.max_iterations < 0:
            raise ConfigError("must be >= 0", key='run.max_iterations')
        if self.max_duration < 0:
            raise ConfigError("must be >= 0", key='run.max_duration')
        if self.bucket_seconds <= 0:
            raise ConfigError("must be positive", key='run.bucket_seconds')


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    run: RunSettings = field(default_factory=RunSettings)
    scene: SceneConfig = field(default_factory=SceneConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    depth: DepthConfig = field(default_factory=DepthConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    rejection: RejectionConfig = field(default_factory=RejectionConfig)
    buffer: BufferConfig = field(default_factory=BufferConfig)
    voxels: VoxelConfig = field(default_factory=VoxelConfig)
    gripper: GripperModel = field(default_factory=GripperModel)
    grasp_gen: GraspGenConfig = field(default_factory=GraspGenConfig)
    planner: PlannerConfig = field(default_factory=PlannerConfig)
    verification: VerificationConfig = field(default_factory=VerificationConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)

    # -------------------------------------------------------------------------
    # Loading
    # -------------------------------------------------------------------------

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'RunConfig':
        """
        Defaults overlaid with a TOML file.

        Raises:
            ConfigError: Unreadable file, unknown key or invalid value.
        """
        try:
            with open(path, 'rb') as handle:
                data = tomllib.load(handle)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
        config = cls.from_dict(data)
        logger.info("loaded run configuration from %s", path)
        return config

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> 'RunConfig':
        return overlay(cls(), data)

    def with_overrides(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        """
        Copy with dotted-key overrides, e.g. ``{'buffer.memory': False}``.
        """
        nested: Dict[str, Any] = {}
        for dotted, value in overrides.items():
            node = nested
            *parents, leaf = dotted.split('.')
            for part in parents:
                node = node.setdefault(part, {})
            node[leaf] = value
        return overlay(self, nested)

    def to_dict(self) -> Dict[str, Any]:
        return to_plain(self)


# =============================================================================
# OVERLAY
# =============================================================================

def _coerce(current: Any, value: Any, key: str) -> Any:
    if isinstance(current, Enum):
        try:
            return type(current)(value)
        except ValueError:
            choices = ', '.join(repr(m.value) for m in type(current))
            raise ConfigError(f"{value!r} is not one of {choices}", key=key) from None
    if isinstance(current, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"expected true/false, got {value!r}", key=key)
        return value
    if isinstance(current, int):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"expected an integer, got {value!r}", key=key)
        return value
    if isinstance(current, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", key=key)
        return float(value)
    if isinstance(current, str):
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", key=key)
        return value
    if isinstance(current, tuple):
        if not isinstance(value, (list, tuple)):
            raise ConfigError(f"expected an array, got {value!r}", key=key)
        return tuple(value)
    return value


def _overlay_mapping(current: Dict[str, Any], value: Mapping[str, Any], key: str) -> Dict[str, Any]:
    """Merge a table of named sections (e.g. depth presets) entry by entry."""
    merged = dict(current)
    template = next(iter(current.values()), None)
    for name, entry in value.items():
        if name in merged and is_dataclass(merged[name]) and isinstance(entry, Mapping):
            merged[name] = overlay(merged[name], entry, f"{key}.{name}")
        elif template is not None and is_dataclass(template) and isinstance(entry, Mapping):
            entry = dict(entry)
            if 'name' in {f.name for f in fields(template)}:
                entry.setdefault('name', name)
            try:
                merged[name] = type(template)(**entry)
            except (TypeError, BinPickError, ValueError) as exc:
                raise ConfigError(str(exc), key=f"{key}.{name}") from exc
        else:
            merged[name] = entry
    return merged


def overlay(section: Any, data: Mapping[str, Any], prefix: str = '') -> Any:
    """Copy of the dataclass ``section`` with the fields in ``data`` replaced."""
    if not isinstance(data, Mapping):
        raise ConfigError(f"expected a table, got {data!r}", key=prefix or None)
    known = {f.name for f in fields(section)}
    values: Dict[str, Any] = {}
    for name, value in data.items():
        key = f"{prefix}.{name}" if prefix else name
        if name not in known:
            raise ConfigError("unknown key", key=key)
        current = getattr(section, name)
        if is_dataclass(current):
            values[name] = overlay(current, value, key)
        elif isinstance(current, dict):
            if not isinstance(value, Mapping):
                raise ConfigError(f"expected a table, got {value!r}", key=key)
            values[name] = _overlay_mapping(current, value, key)
        else:
            values[name] = _coerce(current, value, key)
    if not values:
        return section
    try:
        return replace(section, **values)
    except ConfigError:
        raise
    except (BinPickError, ValueError, TypeError) as exc:
        raise ConfigError(str(exc), key=prefix or None) from exc


def to_plain(value: Any) -> Any:
    """JSON-ready copy: dataclasses to dicts, enums to values, tuples to lists."""
    if is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_plain(getattr(value, f.name)) for f in fields(value)}
    if isinstance(value, Enum):
        return value.value
    if isinstance(value, dict):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_plain(v) for v in value]
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value
