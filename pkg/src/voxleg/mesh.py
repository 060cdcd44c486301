"""Voxel grids to printable triangle meshes (binary STL, ASCII OBJ).

Every exposed voxel face (face with an empty or out-of-bounds neighbor)
becomes two triangles with outward normals and counter-clockwise winding.
Vertices are shared within each surface sheet but duplicated where two
diagonally touching voxels would otherwise pinch the surface along an edge,
so the edge-pairing watertightness audit holds for the emitted meshes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from voxleg.voxels import EmptyGridError, VoxelGrid

# (axis, direction, quad corner offsets in voxel units). Corners are ordered
# counter-clockwise as seen from outside the cube.
_FACES = (
    (0, +1, ((1, 0, 0), (1, 1, 0), (1, 1, 1), (1, 0, 1))),
    (0, -1, ((0, 0, 0), (0, 0, 1), (0, 1, 1), (0, 1, 0))),
    (1, +1, ((0, 1, 0), (0, 1, 1), (1, 1, 1), (1, 1, 0))),
    (1, -1, ((0, 0, 0), (1, 0, 0), (1, 0, 1), (0, 0, 1))),
    (2, +1, ((0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1))),
    (2, -1, ((0, 0, 0), (0, 1, 0), (1, 1, 0), (1, 0, 0))),
)


class IoFailureError(OSError):
    """Mesh file could not be written."""


@dataclass(frozen=True)
class TriangleMesh:
    """Indexed triangle soup; vertices in mm, unit per-triangle normals."""

    vertices: np.ndarray  # (V, 3) float
    triangles: np.ndarray  # (T, 3) int
    normals: np.ndarray  # (T, 3) float

    def __post_init__(self) -> None:
        v = np.asarray(self.vertices, dtype=float)
        t = np.asarray(self.triangles, dtype=np.int64)
        n = np.asarray(self.normals, dtype=float)
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValueError("triangle index out of range")
        for name, arr in (("vertices", v), ("triangles", t), ("normals", n)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def triangle_count(self) -> int:
        return len(self.triangles)


def _triangle_normals(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    a = vertices[triangles[:, 0]]
    b = vertices[triangles[:, 1]]
    c = vertices[triangles[:, 2]]
    n = np.cross(b - a, c - a)
    lengths = np.linalg.norm(n, axis=1, keepdims=True)
    return n / np.maximum(lengths, 1e-300)


class _UnionFind:
    def __init__(self) -> None:
        self.parent: dict[int, int] = {}

    def find(self, item: int) -> int:
        root = item
        while self.parent.setdefault(root, root) != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a: int, b: int) -> None:
        self.parent[self.find(a)] = self.find(b)


def voxel_to_mesh(grid: VoxelGrid) -> TriangleMesh:
    """Exposed-face surface extraction; coordinates scale by voxel_size.

    Faces meeting along a geometric edge are paired into surface sheets:
    two faces pair normally, while the four faces around a diagonal voxel
    contact pair up per owning voxel.  Vertices are shared only within the
    sheet fan around each corner, which keeps every edge on exactly two
    triangles even at those pinch configurations.
    """
    if grid.occupied_count == 0:
        raise EmptyGridError("cannot mesh an empty grid")
    occ = grid.occupancy
    scale = grid.dims.voxel_size
    shape = grid.dims.shape

    Corner = tuple[int, int, int]
    face_cells: list[Corner] = []
    face_quads: list[tuple[Corner, Corner, Corner, Corner]] = []
    # Geometric edge (sorted corner pair) -> indices of incident faces.
    edge_faces: dict[tuple[Corner, Corner], list[int]] = {}
    for x, y, z in np.argwhere(occ):
        cell = (int(x), int(y), int(z))
        for axis, direction, corners in _FACES:
            neighbor = list(cell)
            neighbor[axis] += direction
            if 0 <= neighbor[axis] < shape[axis] and occ[tuple(neighbor)]:
                continue
            quad = tuple(
                (cell[0] + dx, cell[1] + dy, cell[2] + dz) for dx, dy, dz in corners
            )
            idx = len(face_quads)
            face_cells.append(cell)
            face_quads.append(quad)
            for a in range(4):
                u, v = quad[a], quad[(a + 1) % 4]
                edge_faces.setdefault((min(u, v), max(u, v)), []).append(idx)

    # Pair faces across each geometric edge; four faces means a diagonal
    # voxel contact, where each voxel initially keeps its own pair.
    pairing: dict[tuple[Corner, Corner], list[tuple[int, int]]] = {}
    for (u, v), incident in edge_faces.items():
        if len(incident) == 2:
            pairing[(u, v)] = [(incident[0], incident[1])]
        else:
            by_cell: dict[Corner, list[int]] = {}
            for idx in incident:
                by_cell.setdefault(face_cells[idx], []).append(idx)
            (a1, a2), (b1, b2) = by_cell.values()
            pairing[(u, v)] = [(a1, a2), (b1, b2)]

    # Each pairing forces the two faces to share vertex copies at both edge
    # ends; the resulting classes are the surface sheets.  When a pinched
    # edge ends up with both of its face pairs on identical vertex copies
    # (the sheets rejoin around the corner), re-pair the four faces across
    # the voxels, which splits the fan and restores two-triangles-per-edge.
    for _ in range(16):
        classes = _UnionFind()
        node_ids: dict[tuple[Corner, int], int] = {}

        def node(corner: Corner, face_idx: int) -> int:
            return node_ids.setdefault((corner, face_idx), len(node_ids))

        for (u, v), pairs in pairing.items():
            for f1, f2 in pairs:
                classes.union(node(u, f1), node(u, f2))
                classes.union(node(v, f1), node(v, f2))
        collisions = []
        for (u, v), pairs in pairing.items():
            if len(pairs) == 2:
                keys = [
                    (classes.find(node(u, f1)), classes.find(node(v, f1)))
                    for f1, _ in pairs
                ]
                if keys[0] == keys[1]:
                    collisions.append((u, v))
        if not collisions:
            break
        for edge in collisions:
            (a1, a2), (b1, b2) = pairing[edge]
            # Rotate through the three perfect matchings of the four faces.
            pairing[edge] = [(a1, b2), (a2, b1)]
    else:
        raise AssertionError("mesh sheet resolution did not converge")

    vertices: list[Corner] = []
    vertex_of_class: dict[int, int] = {}
    for (corner, _), nid in node_ids.items():
        root = classes.find(nid)
        if root not in vertex_of_class:
            vertex_of_class[root] = len(vertices)
            vertices.append(corner)

    triangles: list[tuple[int, int, int]] = []
    for idx, quad in enumerate(face_quads):
        v0, v1, v2, v3 = (
            vertex_of_class[classes.find(node_ids[(corner, idx)])] for corner in quad
        )
        triangles.append((v0, v1, v2))
        triangles.append((v0, v2, v3))

    verts = np.asarray(vertices, dtype=float) * scale
    tris = np.asarray(triangles, dtype=np.int64)
    return TriangleMesh(verts, tris, _triangle_normals(verts, tris))


def _axis_angle_matrix(axis: np.ndarray, angle_rad: float) -> np.ndarray:
    axis = np.asarray(axis, dtype=float)
    norm = np.linalg.norm(axis)
    if norm == 0:
        raise ValueError("rotation axis must be non-zero")
    ux, uy, uz = axis / norm
    c, s = np.cos(angle_rad), np.sin(angle_rad)
    return np.array(
        [
            [c + ux * ux * (1 - c), ux * uy * (1 - c) - uz * s, ux * uz * (1 - c) + uy * s],
            [uy * ux * (1 - c) + uz * s, c + uy * uy * (1 - c), uy * uz * (1 - c) - ux * s],
            [uz * ux * (1 - c) - uy * s, uz * uy * (1 - c) + ux * s, c + uz * uz * (1 - c)],
        ]
    )


def transform(
    mesh: TriangleMesh,
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0),
    rotation_axis: tuple[float, float, float] = (0.0, 1.0, 0.0),
    rotation_angle_rad: float = 0.0,
    translation: tuple[float, float, float] = (0.0, 0.0, 0.0),
) -> TriangleMesh:
    """Apply scale, then axis-angle rotation, then translation."""
    if any(s <= 0 for s in scale):
        raise ValueError("scale factors must be positive")
    rot = _axis_angle_matrix(np.asarray(rotation_axis), rotation_angle_rad)
    verts = mesh.vertices * np.asarray(scale, dtype=float)
    verts = verts @ rot.T + np.asarray(translation, dtype=float)
    return TriangleMesh(verts, mesh.triangles, _triangle_normals(verts, mesh.triangles))


def write_stl(mesh: TriangleMesh, destination) -> int:
    """Binary STL (80-byte header + count + 50 bytes/triangle); returns bytes."""
    header = b"voxleg binary STL".ljust(80, b"\0")
    try:
        with open(destination, "wb") as fh:
            fh.write(header)
            fh.write(struct.pack("<I", mesh.triangle_count))
            for tri, normal in zip(mesh.triangles, mesh.normals):
                values = list(normal)
                for idx in tri:
                    values.extend(mesh.vertices[idx])
                fh.write(struct.pack("<12f", *values))
                fh.write(struct.pack("<H", 0))
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    return 84 + 50 * mesh.triangle_count


def write_obj(mesh: TriangleMesh, destination) -> int:
    """ASCII OBJ with 1-indexed faces and fixed 6-decimal vertices."""
    lines = [
        f"v {v[0]:.6f} {v[1]:.6f} {v[2]:.6f}" for v in mesh.vertices
    ] + [f"f {t[0] + 1} {t[1] + 1} {t[2] + 1}" for t in mesh.triangles]
    text = "\n".join(lines) + "\n"
    try:
        with open(destination, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailureError(str(exc)) from exc
    return len(text.encode("utf-8"))


def read_stl(source) -> TriangleMesh:
    """Round-trip parser for the binary STL written by :func:`write_stl`."""
    with open(source, "rb") as fh:
        fh.read(80)
        (count,) = struct.unpack("<I", fh.read(4))
        normals = np.empty((count, 3))
        vertices = np.empty((count * 3, 3))
        for i in range(count):
            values = struct.unpack("<12f", fh.read(48))
            fh.read(2)
            normals[i] = values[0:3]
            vertices[3 * i : 3 * i + 3] = np.reshape(values[3:], (3, 3))
    triangles = np.arange(count * 3, dtype=np.int64).reshape(count, 3)
    return TriangleMesh(vertices, triangles, normals)


def read_obj(source) -> tuple[np.ndarray, np.ndarray]:
    """Parse (vertices, triangles) back from an OBJ file."""
    vertices = []
    faces = []
    with open(source, "r", encoding="utf-8") as fh:
        for line in fh:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(p) for p in parts[1:4]])
            elif parts[0] == "f":
                faces.append([int(p) - 1 for p in parts[1:4]])
    return np.asarray(vertices, dtype=float), np.asarray(faces, dtype=np.int64)


def edge_pairing_audit(mesh: TriangleMesh) -> bool:
    """True iff every undirected edge is shared by exactly two triangles."""
    counts: dict[tuple[int, int], int] = {}
    for a, b, c in mesh.triangles:
        for u, v in ((a, b), (b, c), (c, a)):
            key = (int(min(u, v)), int(max(u, v)))
            counts[key] = counts.get(key, 0) + 1
    return all(n == 2 for n in counts.values())
