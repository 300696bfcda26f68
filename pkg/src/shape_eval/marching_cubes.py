"""Lattice isosurface extraction with the classic 256-case table.

Vertices sit on cell edges at linearly interpolated iso crossings and are
welded per grid edge, so shared faces index shared vertices. Triangles are
wound outward: normals point toward the outside of the object (positive SDF
side / low occupancy side). Face and interior ambiguities are resolved by the
table alone; rare non-manifold edges on ambiguous saddles are accepted.
"""

from __future__ import annotations

import numpy as np

from ._mc_tables import TRI_TABLE
from .core import OCCUPANCY, SDF, TriangleMesh, VoxelGrid

DEFAULT_ISO = {OCCUPANCY: 0.5, SDF: 0.0}

# local edge -> (axis, di, dj, dk) of the grid edge it lies on
_EDGE_SLOT = (
    (0, 0, 0, 0),  # e0:  c0-c1  x
    (1, 1, 0, 0),  # e1:  c1-c2  y
    (0, 0, 1, 0),  # e2:  c2-c3  x
    (1, 0, 0, 0),  # e3:  c3-c0  y
    (0, 0, 0, 1),  # e4:  c4-c5  x
    (1, 1, 0, 1),  # e5:  c5-c6  y
    (0, 0, 1, 1),  # e6:  c6-c7  x
    (1, 0, 0, 1),  # e7:  c7-c4  y
    (2, 0, 0, 0),  # e8:  c0-c4  z
    (2, 1, 0, 0),  # e9:  c1-c5  z
    (2, 1, 1, 0),  # e10: c2-c6  z
    (2, 0, 1, 0),  # e11: c3-c7  z
)


def _edge_vertices(g: np.ndarray, axis: int, coords) -> tuple[np.ndarray, np.ndarray]:
    """Interpolated crossing positions and an id grid (-1 where no crossing)."""
    inside = g < 0.0
    sl_lo = [slice(None)] * 3
    sl_hi = [slice(None)] * 3
    sl_lo[axis] = slice(0, -1)
    sl_hi[axis] = slice(1, None)
    a = g[tuple(sl_lo)]
    b = g[tuple(sl_hi)]
    crossing = inside[tuple(sl_lo)] != inside[tuple(sl_hi)]

    ids = np.full(crossing.shape, -1, dtype=np.int64)
    n = int(crossing.sum())
    ids[crossing] = np.arange(n)

    t = a[crossing] / (a[crossing] - b[crossing])
    ii, jj, kk = np.nonzero(crossing)
    base = np.stack(
        [coords[0][ii], coords[1][jj], coords[2][kk]], axis=1
    )
    step = coords[axis][1] - coords[axis][0] if len(coords[axis]) > 1 else 0.0
    base[:, axis] += t * step
    return base, ids


def marching_cubes(grid: VoxelGrid, iso_level: float | None = None) -> TriangleMesh:
    """Extract the iso_level surface of a voxel grid as a triangle mesh.

    ``iso_level`` defaults to 0.5 for occupancy grids and 0.0 for SDF grids.
    The mesh is empty iff no cell straddles the level.
    """
    if iso_level is None:
        iso_level = DEFAULT_ISO[grid.kind]
    # shift so that inside = negative regardless of field kind
    if grid.kind == OCCUPANCY:
        g = iso_level - grid.values
    else:
        g = grid.values - iso_level

    coords = grid.axis_coordinates()
    verts_by_axis = []
    ids_by_axis = []
    offset = 0
    for axis in range(3):
        pos, ids = _edge_vertices(g, axis, coords)
        ids = np.where(ids >= 0, ids + offset, -1)
        offset += len(pos)
        verts_by_axis.append(pos)
        ids_by_axis.append(ids)
    if offset == 0:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    vertices = np.concatenate(verts_by_axis, axis=0)

    inside = g < 0.0
    cube_index = np.zeros(tuple(n - 1 for n in grid.resolution), dtype=np.uint16)
    corner_offsets = (
        (0, 0, 0), (1, 0, 0), (1, 1, 0), (0, 1, 0),
        (0, 0, 1), (1, 0, 1), (1, 1, 1), (0, 1, 1),
    )
    for bit, (dx, dy, dz) in enumerate(corner_offsets):
        nx, ny, nz = cube_index.shape
        cube_index |= (
            inside[dx:dx + nx, dy:dy + ny, dz:dz + nz].astype(np.uint16) << bit
        )

    face_chunks = []
    for case in np.unique(cube_index):
        edges = TRI_TABLE[case]
        if not edges:
            continue
        ci, cj, ck = np.nonzero(cube_index == case)
        tri_vertex_ids = np.empty((len(ci), len(edges)), dtype=np.int64)
        for col, e in enumerate(edges):
            axis, di, dj, dk = _EDGE_SLOT[e]
            tri_vertex_ids[:, col] = ids_by_axis[axis][ci + di, cj + dj, ck + dk]
        face_chunks.append(tri_vertex_ids.reshape(-1, 3))
    faces = np.concatenate(face_chunks, axis=0) if face_chunks else np.zeros((0, 3), dtype=np.int64)
    # table winds toward the inside; flip for outward normals
    faces = faces[:, [0, 2, 1]]
    return TriangleMesh(vertices, faces)
