"""
Mesh File I/O
-------------

STL (binary and ASCII) and OBJ readers. STL facet normals are ignored and
recomputed from the vertex winding. OBJ support covers ``v`` and ``f``
records; polygons are fan-triangulated and other record types are skipped.
"""

import logging
import struct
from enum import Enum
from pathlib import Path
from typing import List, Optional, Union

import numpy as np

from src.errors import EmptyMesh, ParseError
from src.mesh.triangle_mesh import TriangleMesh

logger = logging.getLogger(__name__)

_STL_HEADER_BYTES = 80
_STL_FACET_DTYPE = np.dtype([
    ('normal', '<f4', (3,)),
    ('corners', '<f4', (3, 3)),
    ('attribute', '<u2'),
])


class MeshFormat(Enum):
    """Supported mesh file formats"""
    STL = "stl"
    OBJ = "obj"

    @classmethod
    def from_path(cls, path: Union[str, Path]) -> 'MeshFormat':
        suffix = Path(path).suffix.lower().lstrip('.')
        try:
            return cls(suffix)
        except ValueError:
            raise ParseError(f"unknown mesh format {suffix!r}", path=str(path)) from None


def load_mesh(path: Union[str, Path], fmt: Optional[Union[MeshFormat, str]] = None,
              scale: float = 1.0, name: Optional[str] = None) -> TriangleMesh:
    """
    Read a mesh file.

    Args:
        path: STL or OBJ file.
        fmt: Format override; inferred from the suffix when omitted.
        scale: Factor applied to every coordinate (files are assumed in meters).
        name: Mesh name; defaults to the file stem.

    Returns:
        The cleaned ``TriangleMesh``.

    Raises:
        ParseError: Unreadable file, or malformed content with the byte offset
            of the problem.
        EmptyMesh: No usable triangle.
    """
    path = Path(path)
    fmt = MeshFormat.from_path(path) if fmt is None else MeshFormat(fmt)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ParseError(f"cannot read mesh file: {exc.strerror}", path=str(path)) from exc
    if fmt is MeshFormat.STL:
        corners = parse_stl(data, str(path))
        vertices = corners.reshape(-1, 3)
        triangles = np.arange(len(vertices)).reshape(-1, 3)
    else:
        vertices, triangles = parse_obj(data, str(path))

    if len(triangles) == 0:
        raise EmptyMesh(f"{path}: no faces")
    mesh = TriangleMesh.from_arrays(np.asarray(vertices, dtype=float) * scale, triangles,
                                    name or path.stem)
    logger.debug("loaded %s: %d vertices, %d triangles (from %d raw)",
                 path.name, len(mesh.vertices), mesh.triangle_count, len(triangles))
    return mesh


# =============================================================================
# STL
# =============================================================================

def _is_binary_stl(data: bytes) -> bool:
    if len(data) < _STL_HEADER_BYTES + 4:
        return False
    count = struct.unpack_from('<I', data, _STL_HEADER_BYTES)[0]
    return len(data) == _STL_HEADER_BYTES + 4 + count * _STL_FACET_DTYPE.itemsize


def parse_stl(data: bytes, path: Optional[str] = None) -> np.ndarray:
    """Return ``(T, 3, 3)`` facet corners from binary or ASCII STL bytes."""
    if _is_binary_stl(data):
        count = struct.unpack_from('<I', data, _STL_HEADER_BYTES)[0]
        facets = np.frombuffer(data, dtype=_STL_FACET_DTYPE, count=count, offset=_STL_HEADER_BYTES + 4)
        return facets['corners'].astype(float)
    if data.lstrip()[:5].lower() == b'solid':
        return _parse_ascii_stl(data, path)
    if len(data) >= _STL_HEADER_BYTES + 4:
        count = struct.unpack_from('<I', data, _STL_HEADER_BYTES)[0]
        expected = _STL_HEADER_BYTES + 4 + count * _STL_FACET_DTYPE.itemsize
        raise ParseError(f"binary STL declares {count} facets ({expected} bytes) but has {len(data)} bytes",
                         offset=min(len(data), expected), path=path)
    raise ParseError("file too short for a binary STL header", offset=len(data), path=path)


def _parse_ascii_stl(data: bytes, path: Optional[str]) -> np.ndarray:
    vertices: List[List[float]] = []
    offset = 0
    in_loop = 0
    for raw_line in data.splitlines(keepends=True):
        tokens = raw_line.split()
        if tokens:
            keyword = tokens[0].lower()
            if keyword == b'vertex':
                if len(tokens) != 4:
                    raise ParseError("vertex record needs 3 coordinates", offset=offset, path=path)
                try:
                    vertices.append([float(t) for t in tokens[1:]])
                except ValueError:
                    raise ParseError("malformed vertex coordinate", offset=offset, path=path) from None
                in_loop += 1
            elif keyword == b'outer':
                in_loop = 0
            elif keyword == b'endloop' and in_loop != 3:
                raise ParseError(f"facet has {in_loop} vertices, expected 3", offset=offset, path=path)
        offset += len(raw_line)
    if len(vertices) % 3:
        raise ParseError("vertex count is not a multiple of 3", offset=len(data), path=path)
    return np.array(vertices, dtype=float).reshape(-1, 3, 3)


def write_stl(path: Union[str, Path], mesh: TriangleMesh) -> None:
    """Write a binary STL with freshly computed facet normals."""
    facets = np.zeros(mesh.triangle_count, dtype=_STL_FACET_DTYPE)
    facets['normal'] = mesh.normals
    facets['corners'] = mesh.corners
    header = mesh.name.encode('ascii', 'replace')[:_STL_HEADER_BYTES].ljust(_STL_HEADER_BYTES, b' ')
    with open(path, 'wb') as handle:
        handle.write(header)
        handle.write(struct.pack('<I', mesh.triangle_count))
        handle.write(facets.tobytes())


# =============================================================================
# OBJ
# =============================================================================

def _resolve_index(token: bytes, n_vertices: int, offset: int, path: Optional[str]) -> int:
    try:
        index = int(token.split(b'/')[0])
    except ValueError:
        raise ParseError(f"malformed face index {token!r}", offset=offset, path=path) from None
    resolved = index - 1 if index > 0 else n_vertices + index
    if index == 0 or not 0 <= resolved < n_vertices:
        raise ParseError(f"face index {index} out of range for {n_vertices} vertices", offset=offset, path=path)
    return resolved


def parse_obj(data: bytes, path: Optional[str] = None):
    """Return ``(vertices, triangles)`` from OBJ bytes; 1-based and negative indices supported."""
    vertices: List[List[float]] = []
    triangles: List[List[int]] = []
    offset = 0
    for raw_line in data.splitlines(keepends=True):
        tokens = raw_line.split(b'#', 1)[0].split()
        if tokens and tokens[0] == b'v':
            if len(tokens) < 4:
                raise ParseError("vertex record needs 3 coordinates", offset=offset, path=path)
            try:
                vertices.append([float(t) for t in tokens[1:4]])
            except ValueError:
                raise ParseError("malformed vertex coordinate", offset=offset, path=path) from None
        elif tokens and tokens[0] == b'f':
            if len(tokens) < 4:
                raise ParseError("face needs at least 3 vertices", offset=offset, path=path)
            face = [_resolve_index(t, len(vertices), offset, path) for t in tokens[1:]]
            for k in range(1, len(face) - 1):
                triangles.append([face[0], face[k], face[k + 1]])
        offset += len(raw_line)
    return (np.array(vertices, dtype=float).reshape(-1, 3),
            np.array(triangles, dtype=np.int64).reshape(-1, 3))
