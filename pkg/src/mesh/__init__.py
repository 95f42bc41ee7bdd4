"""Triangle meshes: file I/O, BVH, ray casting, sampling and intersection."""

from src.mesh.triangle_mesh import RayHit, TriangleMesh
from src.mesh.io import MeshFormat, load_mesh, write_stl
from src.mesh.queries import (
    RayBatch,
    SurfaceSamples,
    contains_points,
    count_crossings,
    distance_to_mesh,
    distance_to_mesh_brute_force,
    meshes_intersect,
    meshes_intersect_brute_force,
    raycast,
    raycast_brute_force,
    raycast_many,
    sample_surface,
)

__all__ = [
    'MeshFormat',
    'RayBatch',
    'RayHit',
    'SurfaceSamples',
    'TriangleMesh',
    'contains_points',
    'count_crossings',
    'distance_to_mesh',
    'distance_to_mesh_brute_force',
    'load_mesh',
    'meshes_intersect',
    'meshes_intersect_brute_force',
    'raycast',
    'raycast_brute_force',
    'raycast_many',
    'sample_surface',
    'write_stl',
]
