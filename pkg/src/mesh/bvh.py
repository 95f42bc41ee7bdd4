"""
Bounding Volume Hierarchy
-------------------------

Median-split BVH over triangle centroids stored as flat arrays. Queries are
batched: a frontier of ``(query, node)`` pairs is expanded level by level with
numpy, and the result is the set of candidate ``(query, triangle)`` pairs that
the exact kernels then resolve.
"""

from dataclasses import dataclass
from typing import Tuple

import numpy as np

from src.mesh.kernels import ray_box_interval

LEAF_SIZE = 8


@dataclass(frozen=True)
class BVH:
    """Flat BVH. ``left == -1`` marks a leaf owning ``order[start:start+count]``."""
    lo: np.ndarray
    hi: np.ndarray
    left: np.ndarray
    right: np.ndarray
    start: np.ndarray
    count: np.ndarray
    order: np.ndarray

    @classmethod
    def build(cls, corners: np.ndarray, leaf_size: int = LEAF_SIZE) -> 'BVH':
        corners = np.asarray(corners, dtype=float)
        tri_lo = corners.min(axis=1)
        tri_hi = corners.max(axis=1)
        centroids = corners.mean(axis=1)
        order = np.arange(len(corners))

        lo, hi, left, right, start, count = [], [], [], [], [], []

        def new_node() -> int:
            for column in (lo, hi):
                column.append(None)
            for column in (left, right, start, count):
                column.append(-1)
            return len(left) - 1

        stack = [(new_node(), 0, len(corners))]
        while stack:
            node, begin, end = stack.pop()
            members = order[begin:end]
            lo[node] = tri_lo[members].min(axis=0)
            hi[node] = tri_hi[members].max(axis=0)
            spread = centroids[members].max(axis=0) - centroids[members].min(axis=0)
            if end - begin <= leaf_size or spread.max() <= 0.0:
                start[node], count[node] = begin, end - begin
                continue
            axis = int(np.argmax(spread))
            order[begin:end] = members[np.argsort(centroids[members, axis], kind='stable')]
            mid = begin + (end - begin) // 2
            left[node], right[node] = new_node(), new_node()
            stack.append((right[node], mid, end))
            stack.append((left[node], begin, mid))

        lo = np.array(lo)
        hi = np.array(hi)
        # Pad boxes so that rounding in the slab test never culls a boundary hit.
        pad = 1e-9 * max(float(np.linalg.norm(hi[0] - lo[0])), 1e-3)
        return cls(lo - pad, hi + pad, np.array(left), np.array(right),
                   np.array(start), np.array(count), order)

    @property
    def node_count(self) -> int:
        return int(self.left.shape[0])

    # -------------------------------------------------------------------------
    # Traversal
    # -------------------------------------------------------------------------

    def _traverse(self, n_queries: int, overlaps) -> Tuple[np.ndarray, np.ndarray]:
        queries = np.arange(n_queries)
        nodes = np.zeros(n_queries, dtype=np.int64)
        out_queries, out_triangles = [], []
        while queries.size:
            hit = overlaps(queries, nodes)
            queries, nodes = queries[hit], nodes[hit]
            leaf = self.left[nodes] < 0
            if leaf.any():
                leaf_queries, leaf_nodes = queries[leaf], nodes[leaf]
                counts = self.count[leaf_nodes]
                offsets = np.arange(counts.sum()) - np.repeat(np.cumsum(counts) - counts, counts)
                out_queries.append(np.repeat(leaf_queries, counts))
                out_triangles.append(self.order[np.repeat(self.start[leaf_nodes], counts) + offsets])
            inner = ~leaf
            queries = np.concatenate([queries[inner], queries[inner]])
            nodes = np.concatenate([self.left[nodes[inner]], self.right[nodes[inner]]])
        if not out_queries:
            return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
        return np.concatenate(out_queries), np.concatenate(out_triangles)

    def ray_pairs(self, origins: np.ndarray, directions: np.ndarray,
                  t_max: float = np.inf) -> Tuple[np.ndarray, np.ndarray]:
        """Candidate ``(ray, triangle)`` pairs for rays ``(Q, 3)``."""
        origins = np.asarray(origins, dtype=float).reshape(-1, 3)
        directions = np.asarray(directions, dtype=float).reshape(-1, 3)

        def overlaps(queries, nodes):
            t_enter, t_exit = ray_box_interval(origins[queries], directions[queries],
                                               self.lo[nodes], self.hi[nodes])
            return (t_exit >= np.maximum(t_enter, 0.0)) & (t_enter <= t_max)

        return self._traverse(len(origins), overlaps)

    def box_pairs(self, lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Candidate ``(box, triangle)`` pairs for axis-aligned query boxes ``(Q, 3)``."""
        lo = np.asarray(lo, dtype=float).reshape(-1, 3)
        hi = np.asarray(hi, dtype=float).reshape(-1, 3)

        def overlaps(queries, nodes):
            return np.all((lo[queries] <= self.hi[nodes]) & (hi[queries] >= self.lo[nodes]), axis=1)

        return self._traverse(len(lo), overlaps)
