"""
Geometric Kernels
-----------------

Vectorized primitive tests over paired arrays: ray/slab, ray/triangle,
segment/triangle, triangle/triangle, triangle/box and point/triangle distance.

Every kernel is elementwise over its leading axis and uses explicit component
arithmetic, so a pair evaluated inside a large batch gives bit-for-bit the same
result as the same pair evaluated alone. The BVH queries rely on that to match
their brute-force counterparts exactly.
"""

from typing import Tuple

import numpy as np

# Ray self-intersection epsilon (meters).
EPS_RAY = 1e-6

# Vertex-to-plane distance (meters) under which two triangles are coplanar.
COPLANAR_TOL = 1e-10


def dot(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 0] + a[..., 1] * b[..., 1] + a[..., 2] * b[..., 2]


def cross(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.stack([
        a[..., 1] * b[..., 2] - a[..., 2] * b[..., 1],
        a[..., 2] * b[..., 0] - a[..., 0] * b[..., 2],
        a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0],
    ], axis=-1)


# =============================================================================
# RAYS
# =============================================================================

def ray_box_interval(origins: np.ndarray, directions: np.ndarray,
                     lo: np.ndarray, hi: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Slab test. Returns ``(t_enter, t_exit)``; the ray meets the box iff
    ``t_exit >= max(t_enter, 0)``. Axis-parallel rays are handled explicitly.
    """
    parallel = directions == 0.0
    safe = np.where(parallel, 1.0, directions)
    t1 = (lo - origins) / safe
    t2 = (hi - origins) / safe
    t_near = np.minimum(t1, t2)
    t_far = np.maximum(t1, t2)
    inside = (origins >= lo) & (origins <= hi)
    t_near = np.where(parallel, np.where(inside, -np.inf, np.inf), t_near)
    t_far = np.where(parallel, np.where(inside, np.inf, -np.inf), t_far)
    return t_near.max(axis=-1), t_far.min(axis=-1)


def _moller_trumbore(origins, directions, v0, v1, v2):
    e1 = v1 - v0
    e2 = v2 - v0
    p = cross(directions, e2)
    det = dot(e1, p)
    scale = np.sqrt(dot(directions, directions) * dot(e1, e1) * dot(e2, e2))
    valid = np.abs(det) > 1e-12 * scale
    inv = 1.0 / np.where(valid, det, 1.0)
    s = origins - v0
    u = dot(s, p) * inv
    q = cross(s, e1)
    v = dot(directions, q) * inv
    t = dot(e2, q) * inv
    inside = valid & (u >= 0.0) & (v >= 0.0) & (u + v <= 1.0)
    return inside, t


def ray_triangle(origins: np.ndarray, directions: np.ndarray,
                 v0: np.ndarray, v1: np.ndarray, v2: np.ndarray,
                 eps: float = EPS_RAY) -> np.ndarray:
    """
    Moller-Trumbore for paired rays and triangles.

    Returns:
        Hit parameter ``t`` along each direction, ``inf`` on a miss or when
        ``t <= eps``.
    """
    inside, t = _moller_trumbore(origins, directions, v0, v1, v2)
    return np.where(inside & (t > eps), t, np.inf)


def segment_triangle(p: np.ndarray, q: np.ndarray,
                     v0: np.ndarray, v1: np.ndarray, v2: np.ndarray) -> np.ndarray:
    """True where the closed segment ``p -> q`` touches the closed triangle."""
    inside, t = _moller_trumbore(p, q - p, v0, v1, v2)
    return inside & (t >= 0.0) & (t <= 1.0)


# =============================================================================
# TRIANGLE / TRIANGLE
# =============================================================================

def _orient2d(a, b, c):
    return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])


def _segments_cross_2d(a, b, c, d):
    o1 = _orient2d(a, b, c)
    o2 = _orient2d(a, b, d)
    o3 = _orient2d(c, d, a)
    o4 = _orient2d(c, d, b)
    proper = (o1 * o2 <= 0) & (o3 * o4 <= 0)
    # Collinear segments only count when their extents overlap.
    collinear = (o1 == 0) & (o2 == 0)
    overlap = np.all((np.minimum(a, b) <= np.maximum(c, d)) & (np.minimum(c, d) <= np.maximum(a, b)), axis=-1)
    return np.where(collinear, overlap, proper)


def _point_in_triangle_2d(p, a, b, c):
    d1 = _orient2d(a, b, p)
    d2 = _orient2d(b, c, p)
    d3 = _orient2d(c, a, p)
    has_neg = (d1 < 0) | (d2 < 0) | (d3 < 0)
    has_pos = (d1 > 0) | (d2 > 0) | (d3 > 0)
    return ~(has_neg & has_pos)


def _coplanar_intersect(A: np.ndarray, B: np.ndarray, normal: np.ndarray) -> np.ndarray:
    drop = np.argmax(np.abs(normal), axis=-1)
    keep = np.array([[1, 2], [0, 2], [0, 1]])[drop]
    a2 = np.take_along_axis(A, keep[:, None, :].repeat(3, axis=1), axis=2)
    b2 = np.take_along_axis(B, keep[:, None, :].repeat(3, axis=1), axis=2)
    hit = _point_in_triangle_2d(a2[:, 0], b2[:, 0], b2[:, 1], b2[:, 2])
    hit |= _point_in_triangle_2d(b2[:, 0], a2[:, 0], a2[:, 1], a2[:, 2])
    for i in range(3):
        for j in range(3):
            hit |= _segments_cross_2d(a2[:, i], a2[:, (i + 1) % 3], b2[:, j], b2[:, (j + 1) % 3])
    return hit


def triangles_intersect(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """
    Closed triangle/triangle intersection for paired ``(P, 3, 3)`` arrays.

    Non-coplanar pairs intersect iff an edge of one crosses the other; coplanar
    pairs fall back to a 2D edge-crossing and containment test.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if A.shape[0] == 0:
        return np.zeros(0, dtype=bool)
    hit = np.zeros(A.shape[0], dtype=bool)
    for i in range(3):
        hit |= segment_triangle(A[:, i], A[:, (i + 1) % 3], B[:, 0], B[:, 1], B[:, 2])
        hit |= segment_triangle(B[:, i], B[:, (i + 1) % 3], A[:, 0], A[:, 1], A[:, 2])

    normal = cross(A[:, 1] - A[:, 0], A[:, 2] - A[:, 0])
    unit = normal / np.linalg.norm(normal, axis=-1, keepdims=True)
    offsets = np.abs(dot(B - A[:, None, 0], unit[:, None, :]))
    coplanar = ~hit & np.all(offsets <= COPLANAR_TOL, axis=1)
    if coplanar.any():
        hit[coplanar] = _coplanar_intersect(A[coplanar], B[coplanar], normal[coplanar])
    return hit


# =============================================================================
# TRIANGLE / BOX
# =============================================================================

_UNIT_AXES = np.eye(3)


def triangle_box_overlap(triangles: np.ndarray, centers: np.ndarray, half: np.ndarray) -> np.ndarray:
    """
    Separating-axis test between triangles ``(P, 3, 3)`` and axis-aligned boxes
    given by ``centers`` ``(P, 3)`` and half extents ``(P, 3)`` or ``(3,)``.
    Touching counts as overlap.
    """
    v = np.asarray(triangles, dtype=float) - np.asarray(centers, dtype=float)[:, None, :]
    h = np.broadcast_to(np.asarray(half, dtype=float), (v.shape[0], 3))
    separated = np.any((v.min(axis=1) > h) | (v.max(axis=1) < -h), axis=1)

    edges = [v[:, 1] - v[:, 0], v[:, 2] - v[:, 1], v[:, 0] - v[:, 2]]
    normal = cross(edges[0], edges[1])
    radius = dot(h, np.abs(normal))
    separated |= np.abs(dot(normal, v[:, 0])) > radius

    for axis in _UNIT_AXES:
        for edge in edges:
            a = cross(np.broadcast_to(axis, edge.shape), edge)
            proj = np.stack([dot(v[:, k], a) for k in range(3)], axis=1)
            radius = dot(h, np.abs(a))
            separated |= (proj.min(axis=1) > radius) | (proj.max(axis=1) < -radius)
    return ~separated


# =============================================================================
# POINT / TRIANGLE
# =============================================================================

def closest_point_on_triangle(p: np.ndarray, a: np.ndarray, b: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Closest point on each triangle to the paired query point (Voronoi regions)."""
    ab = b - a
    ac = c - a
    ap = p - a
    bp = p - b
    cp = p - c
    d1, d2 = dot(ab, ap), dot(ac, ap)
    d3, d4 = dot(ab, bp), dot(ac, bp)
    d5, d6 = dot(ab, cp), dot(ac, cp)
    va = d3 * d6 - d5 * d4
    vb = d5 * d2 - d1 * d6
    vc = d1 * d4 - d3 * d2

    def _ratio(num, den):
        return num / np.where(den == 0, 1.0, den)

    denom = va + vb + vc
    result = a + ab * _ratio(vb, denom)[:, None] + ac * _ratio(vc, denom)[:, None]

    # Later assignments take priority, mirroring the usual early-return order.
    region = (va <= 0) & (d4 - d3 >= 0) & (d5 - d6 >= 0)
    w = _ratio(d4 - d3, (d4 - d3) + (d5 - d6))
    result = np.where(region[:, None], b + (c - b) * w[:, None], result)

    region = (vb <= 0) & (d2 >= 0) & (d6 <= 0)
    w = _ratio(d2, d2 - d6)
    result = np.where(region[:, None], a + ac * w[:, None], result)

    region = (d6 >= 0) & (d5 <= d6)
    result = np.where(region[:, None], c, result)

    region = (vc <= 0) & (d1 >= 0) & (d3 <= 0)
    v = _ratio(d1, d1 - d3)
    result = np.where(region[:, None], a + ab * v[:, None], result)

    region = (d3 >= 0) & (d4 <= d3)
    result = np.where(region[:, None], b, result)

    region = (d1 <= 0) & (d2 <= 0)
    result = np.where(region[:, None], a, result)
    return result


def point_triangle_distance(p: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Euclidean distance from paired points ``(P, 3)`` to triangles ``(P, 3, 3)``."""
    closest = closest_point_on_triangle(p, triangles[:, 0], triangles[:, 1], triangles[:, 2])
    diff = p - closest
    return np.sqrt(dot(diff, diff))
