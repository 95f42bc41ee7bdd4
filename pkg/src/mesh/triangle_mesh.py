"""
Triangle Mesh
-------------

Immutable indexed triangle mesh. Construction cleans the raw arrays: duplicate
vertices are merged, degenerate and repeated triangles are dropped and unused
vertices are compacted away. Derived quantities (corners, normals, areas,
bounds, BVH) are computed lazily and cached; none of them is ever mutated.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple, Optional

import numpy as np

from src.errors import EmptyMesh, InvalidInput

logger = logging.getLogger(__name__)

# Twice the triangle area below this fraction of the squared bounding-box
# diagonal counts as degenerate.
DEGENERATE_RELATIVE_AREA = 1e-12


class RayHit(NamedTuple):
    """Nearest ray intersection with a mesh."""
    distance: float         # meters along the unit ray direction
    triangle: int
    point: np.ndarray
    normal: np.ndarray      # face normal of the hit triangle


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """
    Indexed triangle mesh in meters.

    Use ``TriangleMesh.from_arrays`` to build a cleaned mesh; the raw
    constructor assumes arrays that are already clean.
    """
    vertices: np.ndarray    # (V, 3) float64
    triangles: np.ndarray   # (T, 3) int64
    name: str = ''

    def __post_init__(self):
        vertices = np.array(self.vertices, dtype=float).reshape(-1, 3)
        triangles = np.array(self.triangles, dtype=np.int64).reshape(-1, 3)
        vertices.setflags(write=False)
        triangles.setflags(write=False)
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'triangles', triangles)

    # -------------------------------------------------------------------------
    # Construction
    # -------------------------------------------------------------------------

    @classmethod
    def from_arrays(cls, vertices, triangles, name: str = '') -> 'TriangleMesh':
        """
        Build a cleaned mesh from raw vertex and index arrays.

        Raises:
            InvalidInput: If an index is out of range.
            EmptyMesh: If no usable triangle remains after cleanup.
        """
        vertices = np.asarray(vertices, dtype=float).reshape(-1, 3)
        triangles = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
        if triangles.size and (triangles.min() < 0 or triangles.max() >= len(vertices)):
            raise InvalidInput(f"triangle index out of range for {len(vertices)} vertices")
        if len(triangles) == 0:
            raise EmptyMesh(f"mesh {name!r} has no triangles")
        if not np.all(np.isfinite(vertices)):
            raise InvalidInput(f"mesh {name!r} has non-finite vertices")

        unique_vertices, inverse = np.unique(vertices, axis=0, return_inverse=True)
        triangles = inverse.reshape(-1)[triangles]

        keep = _non_degenerate(unique_vertices, triangles)
        dropped_degenerate = int((~keep).sum())
        triangles = triangles[keep]

        # Same vertex set means the same facet, whatever the winding.
        _, first = np.unique(np.sort(triangles, axis=1), axis=0, return_index=True)
        first = np.sort(first)
        dropped_duplicate = len(triangles) - len(first)
        triangles = triangles[first]

        if len(triangles) == 0:
            raise EmptyMesh(f"mesh {name!r} has no non-degenerate triangles")
        if dropped_degenerate or dropped_duplicate:
            logger.debug("mesh %r: dropped %d degenerate and %d duplicate triangles",
                         name, dropped_degenerate, dropped_duplicate)

        used, compact = np.unique(triangles, return_inverse=True)
        return cls(unique_vertices[used], compact.reshape(-1, 3), name)

    @classmethod
    def from_trimesh(cls, mesh, name: str = '') -> 'TriangleMesh':
        """Wrap a ``trimesh.Trimesh`` (used for the built-in primitives)."""
        return cls.from_arrays(np.asarray(mesh.vertices), np.asarray(mesh.faces), name)

    # -------------------------------------------------------------------------
    # Derived geometry
    # -------------------------------------------------------------------------

    @property
    def triangle_count(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def corners(self) -> np.ndarray:
        """(T, 3, 3) triangle corner coordinates."""
        return self.vertices[self.triangles]

    @cached_property
    def _cross(self) -> np.ndarray:
        c = self.corners
        return np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return 0.5 * np.linalg.norm(self._cross, axis=1)

    @cached_property
    def normals(self) -> np.ndarray:
        """Unit face normals from the vertex winding (counter-clockwise = outward)."""
        cross = self._cross
        return cross / np.linalg.norm(cross, axis=1, keepdims=True)

    @cached_property
    def bounds(self) -> np.ndarray:
        """(2, 3) array ``[min, max]``."""
        return np.stack([self.vertices.min(axis=0), self.vertices.max(axis=0)])

    @property
    def extents(self) -> np.ndarray:
        return self.bounds[1] - self.bounds[0]

    @cached_property
    def centroid(self) -> np.ndarray:
        """Area-weighted centroid of the surface, used as the geometric center."""
        centers = self.corners.mean(axis=1)
        return (centers * self.areas[:, None]).sum(axis=0) / self.areas.sum()

    @cached_property
    def is_closed(self) -> bool:
        """True when every edge is shared by exactly two triangles."""
        edges = np.concatenate([self.triangles[:, [0, 1]],
                                self.triangles[:, [1, 2]],
                                self.triangles[:, [2, 0]]])
        _, counts = np.unique(np.sort(edges, axis=1), axis=0, return_counts=True)
        return bool(np.all(counts == 2))

    @cached_property
    def bvh(self):
        from src.mesh.bvh import BVH
        return BVH.build(self.corners)

    def transformed(self, matrix: np.ndarray, name: Optional[str] = None) -> 'TriangleMesh':
        """Copy with vertices mapped through a 4x4 rigid transform."""
        matrix = np.asarray(matrix, dtype=float)
        vertices = self.vertices @ matrix[:3, :3].T + matrix[:3, 3]
        return TriangleMesh(vertices, self.triangles, self.name if name is None else name)

    def __repr__(self) -> str:
        return f"TriangleMesh({self.name!r}, vertices={len(self.vertices)}, triangles={self.triangle_count})"


def _non_degenerate(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    repeated = ((triangles[:, 0] == triangles[:, 1])
                | (triangles[:, 1] == triangles[:, 2])
                | (triangles[:, 0] == triangles[:, 2]))
    corners = vertices[triangles]
    twice_area = np.linalg.norm(np.cross(corners[:, 1] - corners[:, 0],
                                         corners[:, 2] - corners[:, 0]), axis=1)
    diagonal = float(np.linalg.norm(vertices.max(axis=0) - vertices.min(axis=0))) if len(vertices) else 0.0
    return ~repeated & (twice_area > DEGENERATE_RELATIVE_AREA * max(diagonal, 1e-12) ** 2)
