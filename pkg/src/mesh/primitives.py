"""
Primitive Meshes
----------------

Watertight primitives, built with ``trimesh.creation`` where it has one and
wrapped as ``TriangleMesh``. Every primitive is centered on its own origin.
"""

from typing import Sequence

import numpy as np
import trimesh

from src.mesh.triangle_mesh import TriangleMesh


def box(extents: Sequence[float], center: Sequence[float] = (0.0, 0.0, 0.0), name: str = 'box') -> TriangleMesh:
    transform = np.eye(4)
    transform[:3, 3] = center
    return TriangleMesh.from_trimesh(trimesh.creation.box(extents=extents, transform=transform), name)


def cylinder(radius: float, height: float, sections: int = 32, name: str = 'cylinder') -> TriangleMesh:
    """Cylinder along z, spanning ``[-height/2, height/2]``."""
    return TriangleMesh.from_trimesh(
        trimesh.creation.cylinder(radius=radius, height=height, sections=sections), name)


def sphere(radius: float, subdivisions: int = 3, name: str = 'sphere') -> TriangleMesh:
    return TriangleMesh.from_trimesh(
        trimesh.creation.icosphere(subdivisions=subdivisions, radius=radius), name)


def union(parts: Sequence[TriangleMesh], name: str) -> TriangleMesh:
    """
    Concatenate disjoint closed parts into one mesh. Parts must not overlap,
    otherwise parity containment tests become unreliable.
    """
    vertices, triangles, offset = [], [], 0
    for part in parts:
        vertices.append(part.vertices)
        triangles.append(part.triangles + offset)
        offset += len(part.vertices)
    return TriangleMesh.from_arrays(np.concatenate(vertices), np.concatenate(triangles), name)


def l_bracket(length: float, width: float, height: float, thickness: float,
              name: str = 'bracket') -> TriangleMesh:
    """
    Non-convex L profile extruded along y: a base plate of ``length`` along x
    and an upright flange of ``height`` along z at the ``-x`` end. The result
    is centered on its bounding box.
    """
    outline = np.array([
        [0.0, 0.0],
        [length, 0.0],
        [length, thickness],
        [thickness, thickness],
        [thickness, height],
        [0.0, height],
    ])
    n = len(outline)
    front = np.column_stack([outline[:, 0], np.zeros(n), outline[:, 1]])
    back = front + np.array([0.0, width, 0.0])
    vertices = np.concatenate([front, back])

    # The L outline is star-shaped from its corner vertex 0.
    triangles = [[0, k, k + 1] for k in range(1, n - 1)]
    triangles += [[n, n + k + 1, n + k] for k in range(1, n - 1)]
    for i in range(n):
        j = (i + 1) % n
        triangles += [[i, n + i, n + j], [i, n + j, j]]

    center = 0.5 * (vertices.min(axis=0) + vertices.max(axis=0))
    return TriangleMesh.from_arrays(vertices - center, triangles, name)
