"""
Mesh Queries
------------

Ray casting, surface sampling, point distances, point containment and
mesh/mesh intersection. Every query takes an optional world ``Pose`` of the
mesh; rays and points are mapped into the mesh frame so one BVH serves every
placement of the same model.

Each accelerated query has a ``*_brute_force`` twin that evaluates all pairs
with the same kernels. The twins exist as oracles for tests and reports.
"""

import logging
from typing import NamedTuple, Optional

import numpy as np

from src.errors import EmptyMesh, InvalidInput
from src.geometry import Pose
from src.mesh.kernels import (
    EPS_RAY,
    point_triangle_distance,
    ray_triangle,
    triangles_intersect,
)
from src.mesh.triangle_mesh import RayHit, TriangleMesh

logger = logging.getLogger(__name__)

# Parity rays use a direction unlikely to graze edges of axis-aligned parts.
_PARITY_DIRECTION = np.array([0.4873, 0.3391, 0.8049]) / np.linalg.norm([0.4873, 0.3391, 0.8049])

# Upper bound on candidate pairs resolved in one vectorized batch.
_PAIR_CHUNK = 250_000


class RayBatch(NamedTuple):
    """Nearest hits for a batch of rays; misses have ``inf`` distance and triangle ``-1``."""
    distance: np.ndarray
    triangle: np.ndarray
    points: np.ndarray
    normals: np.ndarray

    @property
    def hit(self) -> np.ndarray:
        return np.isfinite(self.distance)


class SurfaceSamples(NamedTuple):
    points: np.ndarray
    normals: np.ndarray
    triangles: np.ndarray

    def __len__(self) -> int:
        return int(self.points.shape[0])


# =============================================================================
# HELPERS
# =============================================================================

def _unit_directions(directions: np.ndarray) -> np.ndarray:
    directions = np.asarray(directions, dtype=float).reshape(-1, 3)
    norms = np.linalg.norm(directions, axis=1)
    if np.any(norms <= 0) or not np.all(np.isfinite(norms)):
        raise InvalidInput("ray direction must be finite and nonzero")
    return directions / norms[:, None]


def _to_local(pose: Optional[Pose], origins: np.ndarray, directions: np.ndarray):
    if pose is None:
        return origins, directions
    inverse = pose.inverse()
    return inverse.apply(origins), inverse.apply_direction(directions)


def _nearest_hits(mesh: TriangleMesh, origins, directions, ray_ids, tri_ids,
                  n_rays: int, pose: Optional[Pose], eps: float) -> RayBatch:
    distance = np.full(n_rays, np.inf)
    triangle = np.full(n_rays, -1, dtype=np.int64)
    if len(ray_ids):
        t_all = np.concatenate([
            ray_triangle(origins[ray_ids[s:s + _PAIR_CHUNK]], directions[ray_ids[s:s + _PAIR_CHUNK]],
                         *np.moveaxis(mesh.corners[tri_ids[s:s + _PAIR_CHUNK]], 1, 0), eps=eps)
            for s in range(0, len(ray_ids), _PAIR_CHUNK)
        ])
        found = np.isfinite(t_all)
        rays, tris, ts = ray_ids[found], tri_ids[found], t_all[found]
        # Nearest first, ties broken by the lowest triangle index.
        ordering = np.lexsort((tris, ts, rays))
        rays, tris, ts = rays[ordering], tris[ordering], ts[ordering]
        first = np.unique(rays, return_index=True)[1]
        distance[rays[first]] = ts[first]
        triangle[rays[first]] = tris[first]

    hit = triangle >= 0
    points = np.full((n_rays, 3), np.nan)
    normals = np.full((n_rays, 3), np.nan)
    points[hit] = origins[hit] + directions[hit] * distance[hit, None]
    normals[hit] = mesh.normals[triangle[hit]]
    if pose is not None and hit.any():
        points[hit] = pose.apply(points[hit])
        normals[hit] = pose.apply_direction(normals[hit])
    return RayBatch(distance, triangle, points, normals)


# =============================================================================
# RAY CASTING
# =============================================================================

def raycast_many(mesh: TriangleMesh, origins, directions, pose: Optional[Pose] = None,
                 eps: float = EPS_RAY) -> RayBatch:
    """
    Nearest hit for each ray; directions are normalized so distances are metric.

    Raises:
        InvalidInput: If a direction is zero.
    """
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    directions = _unit_directions(directions)
    local_o, local_d = _to_local(pose, origins, directions)
    ray_ids, tri_ids = mesh.bvh.ray_pairs(local_o, local_d)
    return _nearest_hits(mesh, local_o, local_d, ray_ids, tri_ids, len(origins), pose, eps)


def raycast(mesh: TriangleMesh, origin, direction, pose: Optional[Pose] = None,
            eps: float = EPS_RAY) -> Optional[RayHit]:
    """Nearest intersection beyond ``eps``, or ``None`` on a miss."""
    batch = raycast_many(mesh, origin, direction, pose, eps)
    if not batch.hit[0]:
        return None
    return RayHit(float(batch.distance[0]), int(batch.triangle[0]), batch.points[0], batch.normals[0])


def raycast_brute_force(mesh: TriangleMesh, origins, directions, pose: Optional[Pose] = None,
                        eps: float = EPS_RAY) -> RayBatch:
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    directions = _unit_directions(directions)
    local_o, local_d = _to_local(pose, origins, directions)
    n_rays, n_tris = len(origins), mesh.triangle_count
    ray_ids = np.repeat(np.arange(n_rays), n_tris)
    tri_ids = np.tile(np.arange(n_tris), n_rays)
    return _nearest_hits(mesh, local_o, local_d, ray_ids, tri_ids, n_rays, pose, eps)


def count_crossings(mesh: TriangleMesh, origins, directions, pose: Optional[Pose] = None,
                    eps: float = EPS_RAY) -> np.ndarray:
    """Number of triangles each ray crosses beyond ``eps``."""
    origins = np.asarray(origins, dtype=float).reshape(-1, 3)
    directions = _unit_directions(directions)
    local_o, local_d = _to_local(pose, origins, directions)
    ray_ids, tri_ids = mesh.bvh.ray_pairs(local_o, local_d)
    if len(ray_ids) == 0:
        return np.zeros(len(origins), dtype=np.int64)
    corners = mesh.corners[tri_ids]
    t = ray_triangle(local_o[ray_ids], local_d[ray_ids], corners[:, 0], corners[:, 1], corners[:, 2], eps=eps)
    return np.bincount(ray_ids[np.isfinite(t)], minlength=len(origins))


def contains_points(mesh: TriangleMesh, points, pose: Optional[Pose] = None) -> np.ndarray:
    """
    Parity test for points inside a closed mesh. Open meshes contain nothing.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    if not mesh.is_closed:
        return np.zeros(len(points), dtype=bool)
    direction = _PARITY_DIRECTION if pose is None else pose.apply_direction(_PARITY_DIRECTION)
    directions = np.broadcast_to(direction, points.shape)
    return count_crossings(mesh, points, directions, pose, eps=0.0) % 2 == 1


# =============================================================================
# SURFACE SAMPLING
# =============================================================================

def sample_surface(mesh: TriangleMesh, n: int, seed: Optional[int] = None) -> SurfaceSamples:
    """
    Area-weighted uniform samples of the surface with their face normals.

    Raises:
        InvalidInput: If ``n < 1``.
        EmptyMesh: If the mesh has no area.
    """
    if n < 1:
        raise InvalidInput(f"sample count must be >= 1, got {n}")
    total = float(mesh.areas.sum()) if mesh.triangle_count else 0.0
    if total <= 0:
        raise EmptyMesh(f"mesh {mesh.name!r} has no surface area to sample")

    rng = np.random.default_rng(seed)
    triangles = rng.choice(mesh.triangle_count, size=n, p=mesh.areas / total)
    r1 = np.sqrt(rng.random(n))
    r2 = rng.random(n)
    corners = mesh.corners[triangles]
    points = ((1.0 - r1)[:, None] * corners[:, 0]
              + (r1 * (1.0 - r2))[:, None] * corners[:, 1]
              + (r1 * r2)[:, None] * corners[:, 2])
    return SurfaceSamples(points, mesh.normals[triangles], triangles)


# =============================================================================
# DISTANCES
# =============================================================================

def distance_to_mesh(mesh: TriangleMesh, points, pose: Optional[Pose] = None,
                     max_distance: float = np.inf) -> np.ndarray:
    """
    Unsigned distance from each point to the mesh surface.

    Points farther than ``max_distance`` report ``inf``; a finite bound lets the
    BVH skip distant triangles.
    """
    points = np.asarray(points, dtype=float).reshape(-1, 3)
    local = points if pose is None else pose.inverse().apply(points)
    result = np.full(len(points), np.inf)
    if len(points) == 0:
        return result
    if np.isfinite(max_distance):
        point_ids, tri_ids = mesh.bvh.box_pairs(local - max_distance, local + max_distance)
    else:
        point_ids = np.repeat(np.arange(len(points)), mesh.triangle_count)
        tri_ids = np.tile(np.arange(mesh.triangle_count), len(points))
    for s in range(0, len(point_ids), _PAIR_CHUNK):
        p_ids, t_ids = point_ids[s:s + _PAIR_CHUNK], tri_ids[s:s + _PAIR_CHUNK]
        d = point_triangle_distance(local[p_ids], mesh.corners[t_ids])
        np.minimum.at(result, p_ids, d)
    result[result > max_distance] = np.inf
    return result


def distance_to_mesh_brute_force(mesh: TriangleMesh, points, pose: Optional[Pose] = None) -> np.ndarray:
    return distance_to_mesh(mesh, points, pose, max_distance=np.inf)


# =============================================================================
# MESH / MESH INTERSECTION
# =============================================================================

def _any_pair_intersects(a_corners: np.ndarray, b_corners: np.ndarray,
                         a_ids: np.ndarray, b_ids: np.ndarray) -> bool:
    for s in range(0, len(a_ids), _PAIR_CHUNK):
        if triangles_intersect(a_corners[a_ids[s:s + _PAIR_CHUNK]], b_corners[b_ids[s:s + _PAIR_CHUNK]]).any():
            return True
    return False


def _contained(a: TriangleMesh, a_in_b: Pose, b: TriangleMesh) -> bool:
    if b.is_closed and contains_points(b, a_in_b.apply(a.vertices[:1]))[0]:
        return True
    if a.is_closed and contains_points(a, a_in_b.inverse().apply(b.vertices[:1]))[0]:
        return True
    return False


def meshes_intersect(a: TriangleMesh, pose_a: Pose, b: TriangleMesh, pose_b: Pose) -> bool:
    """
    True iff the posed surfaces touch, or one closed mesh lies entirely inside
    the other.
    """
    a_in_b = pose_b.inverse() @ pose_a
    a_corners = a_in_b.apply(a.corners.reshape(-1, 3)).reshape(-1, 3, 3)
    lo = a_corners.min(axis=1)
    hi = a_corners.max(axis=1)
    b_lo, b_hi = b.bounds
    if np.any(lo.min(axis=0) > b_hi + 1e-12) or np.any(hi.max(axis=0) < b_lo - 1e-12):
        return False
    query_ids, b_ids = b.bvh.box_pairs(lo, hi)
    if _any_pair_intersects(a_corners, b.corners, query_ids, b_ids):
        return True
    return _contained(a, a_in_b, b)


def meshes_intersect_brute_force(a: TriangleMesh, pose_a: Pose, b: TriangleMesh, pose_b: Pose) -> bool:
    a_in_b = pose_b.inverse() @ pose_a
    a_corners = a_in_b.apply(a.corners.reshape(-1, 3)).reshape(-1, 3, 3)
    a_ids = np.repeat(np.arange(a.triangle_count), b.triangle_count)
    b_ids = np.tile(np.arange(b.triangle_count), a.triangle_count)
    if _any_pair_intersects(a_corners, b.corners, a_ids, b_ids):
        return True
    return _contained(a, a_in_b, b)
