"""
Bin Scene
---------

Ground truth of the simulated cell: a rectangular bin standing on a table and
the object instances resting inside it. Bins are filled one object at a time:
each object gets a random position, yaw and resting orientation and is
lowered onto a height map of what is already there, then kept only if it does
not interpenetrate its neighbours and stays below the rim.

Bin frame = world frame: the bin's outer bottom is centered at the origin,
its long edge runs along x.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from src.errors import FillFailure, InvalidInput
from src.geometry import Pose, Rotation
from src.mesh import TriangleMesh, meshes_intersect, raycast_many
from src.mesh import primitives
from src.objects import ObjectModel
from src.perception.render import STATIC_LABEL, RenderItem

logger = logging.getLogger(__name__)

Z_AXIS = np.array([0.0, 0.0, 1.0])


# =============================================================================
# CONFIGURATION
# =============================================================================

@dataclass(frozen=True)
class BinSpec:
    """Bin dimensions (meters, outer)"""
    length: float = 0.36                # along x
    width: float = 0.26                 # along y
    depth: float = 0.15                 # outer height, floor bottom to rim
    wall: float = 0.008                 # wall thickness
    floor: float = 0.008                # floor thickness
    table_size: float = 0.80            # square table top under the bin

    def __post_init__(self):
        for name in ('length', 'width', 'depth', 'wall', 'floor', 'table_size'):
            if getattr(self, name) <= 0:
                raise InvalidInput(f"bin.{name} must be positive")
        if 2 * self.wall >= min(self.length, self.width) or self.floor >= self.depth:
            raise InvalidInput("bin walls and floor leave no interior")

    @property
    def floor_z(self) -> float:
        return self.floor

    @property
    def rim_z(self) -> float:
        return self.depth

    def interior_bounds(self) -> np.ndarray:
        """``[min, max]`` of the inner volume, floor surface to rim."""
        half = np.array([0.5 * self.length - self.wall, 0.5 * self.width - self.wall])
        return np.array([[-half[0], -half[1], self.floor_z],
                         [half[0], half[1], self.rim_z]])

    def bin_mesh(self) -> TriangleMesh:
        """Floor slab and four walls as disjoint boxes."""
        inner_h = self.depth - self.floor
        wall_z = self.floor + 0.5 * inner_h
        side_y = 0.5 * self.width - 0.5 * self.wall
        end_x = 0.5 * self.length - 0.5 * self.wall
        parts = [
            primitives.box((self.length, self.width, self.floor), (0.0, 0.0, 0.5 * self.floor)),
            primitives.box((self.length, self.wall, inner_h), (0.0, -side_y, wall_z)),
            primitives.box((self.length, self.wall, inner_h), (0.0, side_y, wall_z)),
            primitives.box((self.wall, self.width - 2 * self.wall, inner_h), (-end_x, 0.0, wall_z)),
            primitives.box((self.wall, self.width - 2 * self.wall, inner_h), (end_x, 0.0, wall_z)),
        ]
        return primitives.union(parts, name='bin')

    def table_mesh(self) -> TriangleMesh:
        return primitives.box((self.table_size, self.table_size, 0.02), (0.0, 0.0, -0.01), name='table')


@dataclass(frozen=True)
class FillConfig:
    """Sequential settle-by-lowering"""
    heightmap_resolution: float = 0.002     # meters per height-map cell
    settle_gap: float = 0.0005              # meters left between a settled object and its support
    attempts_per_object: int = 40

    def __post_init__(self):
        if self.heightmap_resolution <= 0 or self.settle_gap < 0 or self.attempts_per_object < 1:
            raise InvalidInput("fill needs a positive resolution, a nonnegative gap and >= 1 attempt")


# =============================================================================
# SCENE
# =============================================================================

@dataclass(frozen=True, eq=False)
class ObjectInstance:
    instance_id: int
    model: ObjectModel
    pose: Pose

    @property
    def body(self) -> Tuple[TriangleMesh, Pose]:
        return self.model.mesh, self.pose

    def bounds(self) -> np.ndarray:
        return self.model.posed_bounds(self.pose)


@dataclass(eq=False)
class BinScene:
    """
    Mutable ground truth. Instances leave the scene only through ``remove``
    (a successful pick) and move only through ``move`` (a disturbed failure).
    """
    spec: BinSpec
    instances: Dict[int, ObjectInstance] = field(default_factory=dict)
    requested_count: int = 0
    fill_failed: bool = False
    removed: List[int] = field(default_factory=list)

    def __post_init__(self):
        self.bin_mesh = self.spec.bin_mesh()
        self.table_mesh = self.spec.table_mesh()
        self.initial_count = len(self.instances)

    @property
    def bin_pose(self) -> Pose:
        return Pose.identity()

    @property
    def fill_count(self) -> int:
        return len(self.instances)

    @property
    def center(self) -> np.ndarray:
        """Middle of the bin floor, the point viewpoints aim at."""
        return np.array([0.0, 0.0, self.spec.floor_z])

    def statics(self) -> List[Tuple[TriangleMesh, Pose]]:
        return [(self.bin_mesh, self.bin_pose), (self.table_mesh, Pose.identity())]

    def render_items(self) -> List[RenderItem]:
        items = [RenderItem(i.instance_id, i.model.mesh, i.pose) for i in self.instances.values()]
        items += [RenderItem(STATIC_LABEL, mesh, pose) for mesh, pose in self.statics()]
        return items

    def instance_triples(self) -> List[Tuple[int, ObjectModel, Pose]]:
        return [(i.instance_id, i.model, i.pose) for i in sorted(self.instances.values(), key=lambda i: i.instance_id)]

    def add(self, model: ObjectModel, pose: Pose) -> ObjectInstance:
        instance_id = max(list(self.instances) + self.removed, default=0) + 1
        instance = ObjectInstance(instance_id, model, pose)
        self.instances[instance_id] = instance
        self.initial_count = len(self.instances) + len(self.removed)
        return instance

    def remove(self, instance_id: int) -> ObjectInstance:
        instance = self.instances.pop(instance_id)
        self.removed.append(instance_id)
        return instance

    def move(self, instance_id: int, pose: Pose) -> None:
        instance = self.instances[instance_id]
        self.instances[instance_id] = ObjectInstance(instance_id, instance.model, pose)

    def collides(self, model: ObjectModel, pose: Pose, ignore: Optional[int] = None) -> bool:
        """True if ``model`` at ``pose`` intersects the bin or another instance."""
        bounds = model.posed_bounds(pose)
        if meshes_intersect(model.mesh, pose, self.bin_mesh, self.bin_pose):
            return True
        for other in self.instances.values():
            if other.instance_id == ignore:
                continue
            other_bounds = other.bounds()
            if np.any(bounds[0] > other_bounds[1]) or np.any(other_bounds[0] > bounds[1]):
                continue
            if meshes_intersect(model.mesh, pose, other.model.mesh, other.pose):
                return True
        return False

    def inside(self, model: ObjectModel, pose: Pose, tol: float = 1e-6) -> bool:
        bounds = model.posed_bounds(pose)
        interior = self.spec.interior_bounds()
        return bool(np.all(bounds[0] >= interior[0] - tol) and np.all(bounds[1] <= interior[1] + tol))

    def to_dict(self) -> Dict:
        return {
            'requested_count': self.requested_count,
            'fill_count': self.fill_count,
            'fill_failed': self.fill_failed,
            'removed': list(self.removed),
            'instances': [{'instance_id': i.instance_id, 'class_id': i.model.class_id, 'pose': i.pose.to_list()}
                          for i in sorted(self.instances.values(), key=lambda i: i.instance_id)],
        }


# =============================================================================
# FILLING
# =============================================================================

class HeightMap:
    """Top surface of the settled pile sampled on a regular xy grid."""

    def __init__(self, spec: BinSpec, resolution: float):
        interior = spec.interior_bounds()
        self.lo = interior[0, :2]
        self.resolution = resolution
        self.shape = tuple(int(v) for v in np.maximum(1, np.ceil((interior[1, :2] - self.lo) / resolution)))
        self.heights = np.full(self.shape, spec.floor_z)

    def cells_under(self, lo_xy: np.ndarray, hi_xy: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Indices and xy centers of the cells whose centers fall inside the footprint."""
        first = np.maximum(0, np.ceil((lo_xy - self.lo) / self.resolution - 0.5)).astype(int)
        last = np.minimum(np.array(self.shape) - 1, np.floor((hi_xy - self.lo) / self.resolution - 0.5)).astype(int)
        if np.any(last < first):
            return np.zeros((0, 2), dtype=int), np.zeros((0, 2))
        ii, jj = np.meshgrid(np.arange(first[0], last[0] + 1), np.arange(first[1], last[1] + 1), indexing='ij')
        index = np.column_stack([ii.ravel(), jj.ravel()])
        return index, self.lo + (index + 0.5) * self.resolution


def _drop_height(model: ObjectModel, rotation: Rotation, xy: np.ndarray, heightmap: HeightMap,
                 floor_z: float, gap: float) -> Tuple[float, np.ndarray, np.ndarray]:
    """
    Lowest mesh-origin height at which the object rests on the floor or the
    pile, found with upward rays through the object's underside.
    """
    vertices = rotation.apply(model.mesh.vertices)
    v_lo, v_hi = vertices.min(axis=0), vertices.max(axis=0)
    index, centers = heightmap.cells_under(xy + v_lo[:2], xy + v_hi[:2])
    z = floor_z - v_lo[2]
    if len(index):
        posed = Pose(rotation, (xy[0], xy[1], 0.0))
        start = v_lo[2] - 0.01
        origins = np.column_stack([centers, np.full(len(centers), start)])
        hits = raycast_many(model.mesh, origins, np.broadcast_to(Z_AXIS, origins.shape), posed)
        underside = start + hits.distance
        supported = hits.hit
        if supported.any():
            support = heightmap.heights[index[supported, 0], index[supported, 1]]
            z = max(z, float(np.max(support - underside[supported])))
    return z + gap, index, centers


def _raise_heightmap(model: ObjectModel, pose: Pose, index: np.ndarray, centers: np.ndarray,
                     heightmap: HeightMap) -> None:
    if not len(index):
        return
    top = float(model.posed_bounds(pose)[1, 2]) + 0.01
    origins = np.column_stack([centers, np.full(len(centers), top)])
    hits = raycast_many(model.mesh, origins, np.broadcast_to(-Z_AXIS, origins.shape), pose)
    rows, cols = index[hits.hit, 0], index[hits.hit, 1]
    heightmap.heights[rows, cols] = np.maximum(heightmap.heights[rows, cols], top - hits.distance[hits.hit])


def generate_bin(model: ObjectModel, count: int, spec: Optional[BinSpec] = None, seed: Optional[int] = 0,
                 fill: Optional[FillConfig] = None, strict: bool = False) -> BinScene:
    """
    Fill a bin with ``count`` instances of ``model``.

    Args:
        model: Object class to drop.
        count: Requested number of instances.
        spec: Bin dimensions.
        seed: Seed of the placement generator; equal seeds give equal scenes.
        fill: Height-map resolution, settle gap and attempt budget.
        strict: Raise instead of returning a partial fill.

    Returns:
        The filled scene. If the attempt budget runs out before ``count``
        objects are placed, the partial scene has ``fill_failed`` set.

    Raises:
        InvalidInput: If ``count < 0``.
        FillFailure: Partial fill with ``strict=True``; carries the scene.
    """
    if count < 0:
        raise InvalidInput(f"fill count must be >= 0, got {count}")
    spec = spec or BinSpec()
    fill = fill or FillConfig()
    rng = np.random.default_rng(seed)
    scene = BinScene(spec, requested_count=count)
    heightmap = HeightMap(spec, fill.heightmap_resolution)
    interior = spec.interior_bounds()

    for placed in range(count):
        for _ in range(fill.attempts_per_object):
            stable = model.stable_rotations[int(rng.integers(len(model.stable_rotations)))]
            rotation = Rotation.from_axis_angle(Z_AXIS, rng.uniform(0.0, 2.0 * np.pi)) * stable
            vertices = rotation.apply(model.mesh.vertices)
            v_lo, v_hi = vertices.min(axis=0), vertices.max(axis=0)
            x_range = (interior[0, 0] - v_lo[0], interior[1, 0] - v_hi[0])
            y_range = (interior[0, 1] - v_lo[1], interior[1, 1] - v_hi[1])
            u = rng.random(2)
            if x_range[1] < x_range[0] or y_range[1] < y_range[0]:
                continue
            xy = np.array([x_range[0] + u[0] * (x_range[1] - x_range[0]),
                           y_range[0] + u[1] * (y_range[1] - y_range[0])])

            z, index, centers = _drop_height(model, rotation, xy, heightmap, spec.floor_z, fill.settle_gap)
            if z + v_hi[2] > spec.rim_z:
                continue
            pose = Pose(rotation, (xy[0], xy[1], z))
            if scene.collides(model, pose):
                continue
            scene.add(model, pose)
            _raise_heightmap(model, pose, index, centers, heightmap)
            break
        else:
            scene.fill_failed = True
            message = f"placed {placed} of {count} {model.class_id!r} objects before the attempt budget ran out"
            if strict:
                raise FillFailure(message, partial=scene)
            logger.warning(message)
            break

    logger.info("filled bin with %d %r objects (seed %s)", scene.fill_count, model.class_id, seed)
    return scene


# =============================================================================
# DISTURBANCE
# =============================================================================

def perturb_instance(scene: BinScene, instance_id: int, rng: np.random.Generator, max_shift: float,
                     max_yaw_deg: float, attempts: int = 5) -> bool:
    """
    Shift and spin one instance in the horizontal plane by a bounded random
    amount. Moves that would collide or leave the bin are discarded.

    Returns:
        True if the instance moved.
    """
    instance = scene.instances.get(instance_id)
    if instance is None:
        return False
    for _ in range(attempts):
        shift = rng.uniform(-max_shift, max_shift, size=2)
        yaw = np.radians(rng.uniform(-max_yaw_deg, max_yaw_deg))
        spin = Rotation.from_axis_angle(Z_AXIS, yaw)
        translation = instance.pose.translation + np.array([shift[0], shift[1], 0.0])
        pose = Pose(spin * instance.pose.rotation, translation)
        if scene.inside(instance.model, pose) and not scene.collides(instance.model, pose, ignore=instance_id):
            scene.move(instance_id, pose)
            return True
    return False
