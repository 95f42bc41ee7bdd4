"""
Occupied Voxels
---------------

Axis-aligned occupancy grid in the bin frame. Voxels mark space that the
current depth image shows as occupied but that no known object or fixture
explains. The grid answers collision queries against posed meshes and can be
dumped as run-length-encoded bytes plus a JSON header for replay.
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Sequence, Tuple, Union

import numpy as np

from src.errors import InvalidInput, ParseError, VersionMismatch
from src.geometry import Pose
from src.mesh import TriangleMesh, contains_points
from src.mesh.kernels import triangle_box_overlap

logger = logging.getLogger(__name__)

VOXEL_FORMAT_VERSION = 1


@dataclass(frozen=True)
class VoxelConfig:
    """Occupied-voxel carving"""
    resolution: float = 0.005           # meters per voxel edge
    assoc_tolerance: float = 0.008      # meters, point-to-mesh distance that explains a point
    min_points_per_voxel: int = 2
    headroom: float = 0.10              # meters of grid above the bin rim

    def __post_init__(self):
        if self.resolution <= 0:
            raise InvalidInput(f"voxel resolution must be positive, got {self.resolution}")
        if self.assoc_tolerance < 0:
            raise InvalidInput("assoc_tolerance must be >= 0")
        if self.min_points_per_voxel < 1:
            raise InvalidInput("min_points_per_voxel must be >= 1")


@dataclass(frozen=True, eq=False)
class VoxelGrid:
    """
    Occupancy grid. Voxel ``(i, j, k)`` spans
    ``origin + [i, i+1] * resolution`` (per axis) in the grid frame, and
    ``frame`` places the grid frame in the world.
    """
    origin: np.ndarray
    resolution: float
    dims: Tuple[int, int, int]
    occupancy: np.ndarray               # bool, shape == dims
    frame: Pose = field(default_factory=Pose.identity)

    def __post_init__(self):
        if not self.resolution > 0:
            raise InvalidInput(f"voxel resolution must be positive, got {self.resolution}")
        dims = tuple(int(d) for d in self.dims)
        if len(dims) != 3 or min(dims) < 1:
            raise InvalidInput(f"grid dims must be three positive integers, got {self.dims}")
        occupancy = np.asarray(self.occupancy, dtype=bool)
        if occupancy.shape != dims:
            raise InvalidInput(f"occupancy shape {occupancy.shape} does not match dims {dims}")
        occupancy = occupancy.copy()
        occupancy.setflags(write=False)
        object.__setattr__(self, 'origin', np.array(self.origin, dtype=float).reshape(3))
        object.__setattr__(self, 'dims', dims)
        object.__setattr__(self, 'occupancy', occupancy)

    @classmethod
    def empty(cls, origin: Sequence[float], resolution: float, dims: Sequence[int],
              frame: Optional[Pose] = None) -> 'VoxelGrid':
        return cls(np.asarray(origin, dtype=float), resolution, tuple(dims), np.zeros(tuple(dims), dtype=bool),
                   frame if frame is not None else Pose.identity())

    @classmethod
    def covering(cls, lo: Sequence[float], hi: Sequence[float], resolution: float,
                 frame: Optional[Pose] = None) -> 'VoxelGrid':
        """Empty grid whose voxels cover the box ``[lo, hi]`` of the grid frame."""
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        dims = np.maximum(1, np.ceil((hi - lo) / resolution - 1e-9).astype(int))
        return cls.empty(lo, resolution, dims, frame)

    def with_occupancy(self, occupancy: np.ndarray) -> 'VoxelGrid':
        return VoxelGrid(self.origin, self.resolution, self.dims, occupancy, self.frame)

    # -------------------------------------------------------------------------
    # Indexing
    # -------------------------------------------------------------------------

    @property
    def occupied_count(self) -> int:
        return int(self.occupancy.sum())

    def occupied_indices(self) -> np.ndarray:
        """``(K, 3)`` integer indices of occupied voxels in C order."""
        return np.argwhere(self.occupancy)

    def voxel_of(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """
        Voxel index of world points.

        Returns:
            ``(indices (N, 3), inside (N,))``; indices of outside points are clipped.
        """
        local = self.frame.inverse().apply(np.asarray(points, dtype=float).reshape(-1, 3))
        index = np.floor((local - self.origin) / self.resolution).astype(np.int64)
        inside = np.all((index >= 0) & (index < np.asarray(self.dims)), axis=1)
        return np.clip(index, 0, np.asarray(self.dims) - 1), inside

    def centers(self, indices: np.ndarray) -> np.ndarray:
        """Grid-frame centers of voxels."""
        return self.origin + (np.asarray(indices, dtype=float) + 0.5) * self.resolution

    # -------------------------------------------------------------------------
    # Serialization
    # -------------------------------------------------------------------------

    def header(self) -> Dict[str, Any]:
        return {
            'format_version': VOXEL_FORMAT_VERSION,
            'origin': self.origin.tolist(),
            'resolution': self.resolution,
            'dims': list(self.dims),
            'frame': self.frame.to_list(),
            'encoding': 'rle-uint32-le',
            'first_value': bool(self.occupancy.flat[0]),
        }

    def run_lengths(self) -> np.ndarray:
        """Lengths of alternating runs over the C-order flattened bits."""
        flat = self.occupancy.ravel().astype(np.int8)
        boundaries = np.flatnonzero(np.diff(flat)) + 1
        edges = np.concatenate([[0], boundaries, [flat.size]])
        return np.diff(edges).astype('<u4')

    def dump(self, path: Union[str, Path]) -> Tuple[Path, Path]:
        """Write ``<path>.json`` (header) and ``<path>.rle`` (run lengths)."""
        path = Path(path)
        header_path, data_path = path.with_suffix('.json'), path.with_suffix('.rle')
        header_path.write_text(json.dumps(self.header(), sort_keys=True, indent=2))
        data_path.write_bytes(self.run_lengths().tobytes())
        return header_path, data_path

    @classmethod
    def load(cls, path: Union[str, Path]) -> 'VoxelGrid':
        path = Path(path)
        header_path, data_path = path.with_suffix('.json'), path.with_suffix('.rle')
        try:
            header = json.loads(header_path.read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, offset=exc.pos, path=str(header_path)) from exc
        if header.get('format_version') != VOXEL_FORMAT_VERSION:
            raise VersionMismatch(f"unsupported voxel dump version {header.get('format_version')!r}")

        data = data_path.read_bytes()
        if len(data) % 4:
            raise ParseError("run-length data is not a whole number of uint32 values",
                             offset=len(data) - len(data) % 4, path=str(data_path))
        runs = np.frombuffer(data, dtype='<u4').astype(np.int64)
        dims = tuple(header['dims'])
        if runs.sum() != int(np.prod(dims)):
            raise ParseError(f"run lengths cover {runs.sum()} voxels, header declares {int(np.prod(dims))}",
                             path=str(data_path))
        values = (np.arange(len(runs)) % 2 == 1) ^ bool(header['first_value'])
        occupancy = np.repeat(values, runs).reshape(dims)
        return cls(np.asarray(header['origin']), float(header['resolution']), dims, occupancy,
                   Pose.from_list(header['frame']))


# =============================================================================
# COLLISION QUERIES
# =============================================================================

def _triangles_in_grid(grid: VoxelGrid, mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    to_grid = grid.frame.inverse() @ pose
    return to_grid.apply(mesh.corners.reshape(-1, 3)).reshape(-1, 3, 3)


def _candidate_voxels(grid: VoxelGrid, triangles: np.ndarray) -> np.ndarray:
    """Occupied voxel indices inside the AABB of the grid-frame triangles."""
    lo = np.floor((triangles.reshape(-1, 3).min(axis=0) - grid.origin) / grid.resolution).astype(int)
    hi = np.floor((triangles.reshape(-1, 3).max(axis=0) - grid.origin) / grid.resolution).astype(int)
    top = np.asarray(grid.dims) - 1
    if np.any(hi < 0) or np.any(lo > top):
        return np.zeros((0, 3), dtype=np.int64)
    lo, hi = np.clip(lo, 0, top), np.clip(hi, 0, top)
    window = grid.occupancy[lo[0]:hi[0] + 1, lo[1]:hi[1] + 1, lo[2]:hi[2] + 1]
    return np.argwhere(window) + lo


def _contained_voxels(grid: VoxelGrid, indices: np.ndarray, mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    if len(indices) == 0 or not mesh.is_closed:
        return np.zeros(len(indices), dtype=bool)
    centers = grid.frame.apply(grid.centers(indices))
    return contains_points(mesh, centers, pose)


def colliding_voxels(grid: VoxelGrid, mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    """
    Occupied voxels touched by the posed mesh: voxels crossed by a triangle
    plus voxels whose center lies inside a closed mesh.

    Returns:
        ``(K, 3)`` voxel indices in C order.
    """
    if grid.occupied_count == 0 or mesh.triangle_count == 0:
        return np.zeros((0, 3), dtype=np.int64)
    triangles = _triangles_in_grid(grid, mesh, pose)
    candidates = _candidate_voxels(grid, triangles)
    if len(candidates) == 0:
        return candidates

    # Voxel boxes mapped into the mesh frame become oriented boxes; their
    # enclosing AABBs give conservative BVH candidates.
    mesh_from_grid = pose.inverse() @ grid.frame
    half = 0.5 * grid.resolution
    local_centers = mesh_from_grid.apply(grid.centers(candidates))
    local_half = np.abs(mesh_from_grid.rotation.as_matrix()) @ np.full(3, half)
    voxel_ids, tri_ids = mesh.bvh.box_pairs(local_centers - local_half, local_centers + local_half)

    hit = np.zeros(len(candidates), dtype=bool)
    if len(voxel_ids):
        overlap = triangle_box_overlap(triangles[tri_ids], grid.centers(candidates[voxel_ids]), np.full(3, half))
        hit[voxel_ids[overlap]] = True
    remaining = ~hit
    hit[remaining] = _contained_voxels(grid, candidates[remaining], mesh, pose)
    return candidates[hit]


def voxel_overlap_count(grid: VoxelGrid, mesh: TriangleMesh, pose: Pose) -> int:
    return int(len(colliding_voxels(grid, mesh, pose)))


def voxels_collide(grid: VoxelGrid, mesh: TriangleMesh, pose: Pose) -> bool:
    """True iff any occupied voxel intersects the posed mesh."""
    return voxel_overlap_count(grid, mesh, pose) > 0


def colliding_voxels_brute_force(grid: VoxelGrid, mesh: TriangleMesh, pose: Pose) -> np.ndarray:
    """Every occupied voxel against every triangle, plus center containment."""
    indices = grid.occupied_indices()
    if len(indices) == 0 or mesh.triangle_count == 0:
        return np.zeros((0, 3), dtype=np.int64)
    triangles = _triangles_in_grid(grid, mesh, pose)
    n_vox, n_tri = len(indices), len(triangles)
    voxel_ids = np.repeat(np.arange(n_vox), n_tri)
    tri_ids = np.tile(np.arange(n_tri), n_vox)
    overlap = triangle_box_overlap(triangles[tri_ids], grid.centers(indices[voxel_ids]),
                                   np.full(3, 0.5 * grid.resolution))
    hit = np.zeros(n_vox, dtype=bool)
    hit[voxel_ids[overlap]] = True
    hit |= _contained_voxels(grid, indices, mesh, pose)
    return indices[hit]


def voxels_collide_brute_force(grid: VoxelGrid, mesh: TriangleMesh, pose: Pose) -> bool:
    return len(colliding_voxels_brute_force(grid, mesh, pose)) > 0
