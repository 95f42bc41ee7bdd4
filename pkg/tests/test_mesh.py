import struct

import numpy as np
import pytest

from src.errors import EmptyMesh, InvalidInput, ParseError
from src.geometry import Pose, Rotation
from src.mesh import (
    TriangleMesh,
    contains_points,
    distance_to_mesh,
    distance_to_mesh_brute_force,
    load_mesh,
    meshes_intersect,
    meshes_intersect_brute_force,
    raycast,
    raycast_brute_force,
    raycast_many,
    sample_surface,
    write_stl,
)
from src.mesh import primitives


def _random_rays(rng, n, spread=1.5):
    origins = rng.uniform(-spread, spread, size=(n, 3))
    targets = rng.uniform(-0.4, 0.4, size=(n, 3))
    return origins, targets - origins


# =============================================================================
# CONSTRUCTION
# =============================================================================

def test_cleanup_merges_and_drops():
    vertices = np.array([
        [0, 0, 0], [1, 0, 0], [0, 1, 0],
        [0, 0, 0],                          # duplicate of vertex 0
        [5, 5, 5],                          # unused
    ], dtype=float)
    triangles = np.array([
        [0, 1, 2],
        [3, 2, 1],                          # same facet, reversed winding
        [0, 0, 1],                          # degenerate
    ])
    mesh = TriangleMesh.from_arrays(vertices, triangles)
    assert mesh.triangle_count == 1
    assert len(mesh.vertices) == 3


def test_construction_errors():
    with pytest.raises(InvalidInput):
        TriangleMesh.from_arrays(np.zeros((3, 3)), [[0, 1, 3]])
    with pytest.raises(EmptyMesh):
        TriangleMesh.from_arrays(np.zeros((3, 3)), np.zeros((0, 3), dtype=int))
    with pytest.raises(EmptyMesh):
        TriangleMesh.from_arrays([[0, 0, 0], [1, 0, 0], [2, 0, 0]], [[0, 1, 2]])


def test_primitives_are_closed(unit_cube, bracket_mesh):
    for mesh in (unit_cube, bracket_mesh, primitives.cylinder(0.015, 0.04), primitives.sphere(0.02)):
        assert mesh.is_closed
    assert np.allclose(unit_cube.bounds, [[-0.5] * 3, [0.5] * 3])


def test_normals_point_outward(unit_cube):
    centers = unit_cube.corners.mean(axis=1)
    assert np.all(np.einsum('ij,ij->i', unit_cube.normals, centers) > 0)


def test_transformed_moves_vertices(unit_cube):
    matrix = Pose.from_translation((1.0, 2.0, 3.0)).as_matrix()
    moved = unit_cube.transformed(matrix)
    assert np.allclose(moved.bounds, unit_cube.bounds + np.array([1.0, 2.0, 3.0]))


# =============================================================================
# RAY CASTING
# =============================================================================

def test_raycast_hits_top_face(unit_cube):
    hit = raycast(unit_cube, [0.1, 0.2, 5.0], [0.0, 0.0, -1.0])
    assert hit is not None
    assert hit.distance == pytest.approx(4.5)
    assert np.allclose(hit.point, [0.1, 0.2, 0.5])
    assert np.allclose(hit.normal, [0.0, 0.0, 1.0])


def test_raycast_miss_and_unnormalized_direction(unit_cube):
    assert raycast(unit_cube, [2.0, 2.0, 5.0], [0.0, 0.0, -1.0]) is None
    hit = raycast(unit_cube, [0.0, 0.0, 5.0], [0.0, 0.0, -10.0])
    assert hit.distance == pytest.approx(4.5)


def test_raycast_respects_pose(unit_cube):
    pose = Pose(Rotation.from_axis_angle((0, 0, 1), 0.3), (0.0, 0.0, 2.0))
    hit = raycast(unit_cube, [0.0, 0.0, 5.0], [0.0, 0.0, -1.0], pose)
    assert hit.distance == pytest.approx(2.5)
    assert np.allclose(hit.normal, [0.0, 0.0, 1.0])


def test_raycast_matches_brute_force(bracket_mesh, rng):
    origins, directions = _random_rays(rng, 400, spread=0.06)
    pose = Pose(Rotation.random(rng), rng.normal(scale=0.01, size=3))
    fast = raycast_many(bracket_mesh, origins, directions, pose)
    slow = raycast_brute_force(bracket_mesh, origins, directions, pose)
    assert np.array_equal(fast.hit, slow.hit)
    assert np.allclose(fast.distance[fast.hit], slow.distance[slow.hit])
    assert np.array_equal(fast.triangle, slow.triangle)
    assert fast.hit.any()


def test_raycast_ignores_triangle_order(bracket_mesh, rng):
    order = rng.permutation(bracket_mesh.triangle_count)
    shuffled = TriangleMesh(bracket_mesh.vertices, bracket_mesh.triangles[order], bracket_mesh.name)
    origins, directions = _random_rays(rng, 300, spread=0.06)
    before = raycast_many(bracket_mesh, origins, directions)
    after = raycast_many(shuffled, origins, directions)
    assert np.array_equal(before.hit, after.hit)
    assert np.allclose(before.distance[before.hit], after.distance[after.hit], atol=1e-12)
    assert np.allclose(before.points[before.hit], after.points[after.hit], atol=1e-12)
    assert before.hit.any()


def test_raycast_zero_direction_rejected(unit_cube):
    with pytest.raises(InvalidInput):
        raycast(unit_cube, [0.0, 0.0, 5.0], [0.0, 0.0, 0.0])


# =============================================================================
# CONTAINMENT, DISTANCE, INTERSECTION
# =============================================================================

def test_contains_points(unit_cube):
    inside = contains_points(unit_cube, [[0.0, 0.0, 0.0], [0.4, -0.4, 0.4], [0.6, 0.0, 0.0], [0.0, 0.0, -2.0]])
    assert inside.tolist() == [True, True, False, False]


def test_contains_points_in_bracket_notch(bracket_mesh):
    # The base plate occupies the bottom 6 mm; above it at +x is the open notch.
    inside = contains_points(bracket_mesh, [[0.020, 0.0, -0.012], [0.020, 0.0, 0.010]])
    assert inside.tolist() == [True, False]


def test_open_mesh_contains_nothing():
    sheet = TriangleMesh.from_arrays([[0, 0, 0], [1, 0, 0], [0, 1, 0]], [[0, 1, 2]])
    assert not sheet.is_closed
    assert not contains_points(sheet, [[0.1, 0.1, 0.0]]).any()


def test_distance_to_mesh(unit_cube):
    d = distance_to_mesh(unit_cube, [[0.0, 0.0, 1.5], [0.0, 0.0, 0.0], [1.5, 1.5, 0.0]])
    assert d == pytest.approx([1.0, 0.5, np.sqrt(2.0)])
    capped = distance_to_mesh(unit_cube, [[0.0, 0.0, 1.5]], max_distance=0.5)
    assert np.isinf(capped[0])


def test_distance_matches_brute_force(bracket_mesh, rng):
    points = rng.uniform(-0.04, 0.04, size=(200, 3))
    fast = distance_to_mesh(bracket_mesh, points, max_distance=0.02)
    slow = distance_to_mesh_brute_force(bracket_mesh, points)
    close = slow <= 0.02
    assert np.allclose(fast[close], slow[close])
    assert np.all(np.isinf(fast[~close]))


def test_sample_surface_lies_on_surface(bracket_mesh):
    samples = sample_surface(bracket_mesh, 300, seed=3)
    assert samples.points.shape == (300, 3)
    assert np.all(distance_to_mesh(bracket_mesh, samples.points) < 1e-9)
    with pytest.raises(InvalidInput):
        sample_surface(bracket_mesh, 0)


def test_sample_surface_follows_triangle_area(bracket_mesh):
    n = 40000
    samples = sample_surface(bracket_mesh, n, seed=8)
    counts = np.bincount(samples.triangles, minlength=bracket_mesh.triangle_count)
    expected = n * bracket_mesh.areas / bracket_mesh.areas.sum()
    assert np.all(np.abs(counts - expected) <= 5.0 * np.sqrt(expected) + 1.0)


def test_meshes_intersect_cases(unit_cube):
    small = primitives.box((0.2, 0.2, 0.2))
    identity = Pose.identity()
    assert meshes_intersect(unit_cube, identity, unit_cube, Pose.from_translation((0.9, 0.0, 0.0)))
    assert not meshes_intersect(unit_cube, identity, unit_cube, Pose.from_translation((1.1, 0.0, 0.0)))
    # Fully contained: no surface crossing, still an intersection.
    assert meshes_intersect(small, identity, unit_cube, identity)
    assert meshes_intersect(unit_cube, identity, small, identity)


def test_meshes_intersect_matches_brute_force(bracket_mesh, rng):
    cube = primitives.box((0.02, 0.02, 0.02))
    for _ in range(20):
        pose = Pose(Rotation.random(rng), rng.uniform(-0.04, 0.04, size=3))
        assert (meshes_intersect(cube, pose, bracket_mesh, Pose.identity())
                == meshes_intersect_brute_force(cube, pose, bracket_mesh, Pose.identity()))


# =============================================================================
# FILE I/O
# =============================================================================

def test_stl_write_then_load(tmp_path, bracket_mesh):
    path = tmp_path / 'bracket.stl'
    write_stl(path, bracket_mesh)
    loaded = load_mesh(path)
    assert loaded.triangle_count == bracket_mesh.triangle_count
    assert np.allclose(loaded.bounds, bracket_mesh.bounds, atol=1e-7)
    assert loaded.name == 'bracket'


def test_ascii_stl_and_scale(tmp_path):
    text = """solid tri
facet normal 0 0 1
 outer loop
  vertex 0 0 0
  vertex 10 0 0
  vertex 0 10 0
 endloop
endfacet
endsolid tri
"""
    path = tmp_path / 'tri.stl'
    path.write_text(text)
    mesh = load_mesh(path, scale=0.001)
    assert mesh.triangle_count == 1
    assert np.allclose(mesh.bounds[1], [0.01, 0.01, 0.0])


def test_truncated_binary_stl_reports_offset(tmp_path):
    path = tmp_path / 'short.stl'
    path.write_bytes(b'\0' * 80 + struct.pack('<I', 4) + b'\0' * 60)
    with pytest.raises(ParseError) as info:
        load_mesh(path)
    assert info.value.offset is not None
    assert info.value.path == str(path)


def test_ascii_stl_with_short_facet(tmp_path):
    path = tmp_path / 'bad.stl'
    path.write_text("solid x\nfacet normal 0 0 1\nouter loop\nvertex 0 0 0\nvertex 1 0 0\nendloop\nendfacet\n")
    with pytest.raises(ParseError):
        load_mesh(path)


def test_obj_polygons_are_fan_triangulated(tmp_path):
    path = tmp_path / 'quad.obj'
    path.write_text("# quad\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nvn 0 0 1\nf 1//1 2//1 3//1 4//1\n")
    mesh = load_mesh(path)
    assert mesh.triangle_count == 2


def test_obj_negative_indices(tmp_path):
    path = tmp_path / 'tri.obj'
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf -3 -2 -1\n")
    assert load_mesh(path).triangle_count == 1


def test_obj_bad_index(tmp_path):
    path = tmp_path / 'bad.obj'
    path.write_text("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 7\n")
    with pytest.raises(ParseError) as info:
        load_mesh(path)
    assert info.value.offset == len("v 0 0 0\nv 1 0 0\nv 0 1 0\n")


def test_obj_without_faces(tmp_path):
    path = tmp_path / 'points.obj'
    path.write_text("v 0 0 0\nv 1 0 0\n")
    with pytest.raises(EmptyMesh):
        load_mesh(path)


def test_unknown_suffix(tmp_path):
    path = tmp_path / 'part.ply'
    path.write_text("ply\n")
    with pytest.raises(ParseError):
        load_mesh(path)
