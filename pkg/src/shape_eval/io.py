"""Serialization: OBJ/PLY meshes, raw float grids with JSON sidecars, JSON records.

Grid files are raw 32-bit little-endian floats flattened with x fastest,
described by a JSON sidecar next to them. Meshes are ASCII OBJ (v/f records
only) or binary little-endian PLY with double-precision positions.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .core import CameraIntrinsics, DepthMap, ProjectionMap, RigidTransform, TriangleMesh, VoxelGrid


# ---------------------------------------------------------------------------
# meshes

def save_mesh_obj(mesh: TriangleMesh, path) -> None:
    path = Path(path)
    with path.open("w", encoding="ascii") as f:
        for v in mesh.vertices:
            f.write(f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}\n")
        for a, b, c in mesh.faces:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def load_mesh_obj(path) -> TriangleMesh:
    vertices, faces = [], []
    with Path(path).open("r", encoding="ascii", errors="replace") as f:
        for line in f:
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "v":
                vertices.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
                for k in range(1, len(idx) - 1):  # fan-triangulate polygons
                    faces.append([idx[0], idx[k], idx[k + 1]])
    if not vertices:
        raise ValueError(f"no vertex records in {path}")
    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64).reshape(-1, 3))


def save_mesh_ply(mesh: TriangleMesh, path) -> None:
    header = (
        "ply\n"
        "format binary_little_endian 1.0\n"
        f"element vertex {mesh.n_vertices}\n"
        "property double x\nproperty double y\nproperty double z\n"
        f"element face {mesh.n_faces}\n"
        "property list uchar int vertex_indices\n"
        "end_header\n"
    )
    with Path(path).open("wb") as f:
        f.write(header.encode("ascii"))
        f.write(mesh.vertices.astype("<f8").tobytes())
        if mesh.n_faces:
            counts = np.full((mesh.n_faces, 1), 3, dtype=np.uint8)
            idx = mesh.faces.astype("<i4")
            rec = np.zeros(mesh.n_faces, dtype=[("n", "u1"), ("v", "<i4", (3,))])
            rec["n"] = counts[:, 0]
            rec["v"] = idx
            f.write(rec.tobytes())


def load_mesh_ply(path) -> TriangleMesh:
    with Path(path).open("rb") as f:
        if f.readline().strip() != b"ply":
            raise ValueError(f"{path} is not a PLY file")
        fmt = None
        n_vertex = n_face = 0
        vertex_dtype = []
        current = None
        face_index_type = "<i4"
        while True:
            line = f.readline()
            if not line:
                raise ValueError(f"unterminated PLY header in {path}")
            parts = line.decode("ascii").split()
            if not parts:
                continue
            if parts[0] == "format":
                fmt = parts[1]
            elif parts[0] == "element":
                current = parts[1]
                if current == "vertex":
                    n_vertex = int(parts[2])
                elif current == "face":
                    n_face = int(parts[2])
            elif parts[0] == "property" and current == "vertex":
                types = {"float": "<f4", "float32": "<f4", "double": "<f8", "float64": "<f8"}
                vertex_dtype.append((parts[2], types[parts[1]]))
            elif parts[0] == "property" and current == "face" and parts[1] == "list":
                types = {"int": "<i4", "int32": "<i4", "uint": "<u4", "uint32": "<u4"}
                face_index_type = types[parts[3]]
            elif parts[0] == "end_header":
                break
        if fmt != "binary_little_endian":
            raise ValueError(f"unsupported PLY format {fmt!r} in {path}")
        vdata = np.frombuffer(f.read(n_vertex * np.dtype(vertex_dtype).itemsize), dtype=vertex_dtype)
        vertices = np.stack([vdata["x"], vdata["y"], vdata["z"]], axis=1).astype(np.float64)
        faces = np.zeros((n_face, 3), dtype=np.int64)
        isize = np.dtype(face_index_type).itemsize
        for i in range(n_face):
            (count,) = struct.unpack("<B", f.read(1))
            if count != 3:
                raise ValueError(f"PLY face {i} has {count} vertices; only triangles supported")
            faces[i] = np.frombuffer(f.read(3 * isize), dtype=face_index_type)
    return TriangleMesh(vertices, faces)


def load_mesh(path) -> TriangleMesh:
    path = Path(path)
    if path.suffix.lower() == ".obj":
        return load_mesh_obj(path)
    if path.suffix.lower() == ".ply":
        return load_mesh_ply(path)
    raise ValueError(f"unsupported mesh format {path.suffix!r}")


# ---------------------------------------------------------------------------
# raw float grids + sidecars

def _sidecar_path(raw_path: Path) -> Path:
    return raw_path.with_suffix(".json")


def save_voxel_grid(grid: VoxelGrid, raw_path) -> None:
    raw_path = Path(raw_path)
    flat = grid.values.transpose(2, 1, 0).astype("<f4").tobytes()  # x fastest
    raw_path.write_bytes(flat)
    sidecar = {
        "kind": grid.kind,
        "resolution": list(grid.resolution),
        "bounds": {"min": grid.bounds_min.tolist(), "max": grid.bounds_max.tolist()},
        "dtype": "float32",
        "order": "x-fastest",
        "mask": None,
    }
    _sidecar_path(raw_path).write_text(json.dumps(sidecar, indent=1))


def load_voxel_grid(raw_path) -> VoxelGrid:
    raw_path = Path(raw_path)
    meta = json.loads(_sidecar_path(raw_path).read_text())
    nx, ny, nz = meta["resolution"]
    values = np.frombuffer(raw_path.read_bytes(), dtype="<f4").reshape(nz, ny, nx)
    return VoxelGrid(
        (nx, ny, nz),
        (meta["bounds"]["min"], meta["bounds"]["max"]),
        values.transpose(2, 1, 0).astype(np.float64),
        meta["kind"],
    )


def save_depth_map(depth: DepthMap, raw_path) -> None:
    raw_path = Path(raw_path)
    raw_path.write_bytes(depth.values.astype("<f4").tobytes())
    mask_path = raw_path.with_name(raw_path.stem + "_mask.raw")
    mask_path.write_bytes(depth.mask.astype(np.uint8).tobytes())
    h, w = depth.shape
    sidecar = {
        "kind": "depth",
        "resolution": [w, h],
        "dtype": "float32",
        "order": "x-fastest",
        "mask": mask_path.name,
    }
    _sidecar_path(raw_path).write_text(json.dumps(sidecar, indent=1))


def load_depth_map(raw_path) -> DepthMap:
    raw_path = Path(raw_path)
    meta = json.loads(_sidecar_path(raw_path).read_text())
    w, h = meta["resolution"]
    values = np.frombuffer(raw_path.read_bytes(), dtype="<f4").reshape(h, w).astype(np.float64)
    mask = np.frombuffer(
        (raw_path.parent / meta["mask"]).read_bytes(), dtype=np.uint8
    ).reshape(h, w).astype(bool)
    return DepthMap(values, mask)


def save_projection_map(pmap: ProjectionMap, raw_path) -> None:
    raw_path = Path(raw_path)
    raw_path.write_bytes(pmap.points.astype("<f4").tobytes())
    mask_path = raw_path.with_name(raw_path.stem + "_mask.raw")
    mask_path.write_bytes(pmap.mask.astype(np.uint8).tobytes())
    h, w = pmap.shape
    sidecar = {
        "kind": "projection",
        "resolution": [w, h],
        "channels": 3,
        "dtype": "float32",
        "order": "x-fastest",
        "mask": mask_path.name,
    }
    _sidecar_path(raw_path).write_text(json.dumps(sidecar, indent=1))


def load_projection_map(raw_path) -> ProjectionMap:
    raw_path = Path(raw_path)
    meta = json.loads(_sidecar_path(raw_path).read_text())
    w, h = meta["resolution"]
    points = np.frombuffer(raw_path.read_bytes(), dtype="<f4").reshape(h, w, 3).astype(np.float64)
    mask = np.frombuffer(
        (raw_path.parent / meta["mask"]).read_bytes(), dtype=np.uint8
    ).reshape(h, w).astype(bool)
    return ProjectionMap(points, mask)


# ---------------------------------------------------------------------------
# JSON records

def intrinsics_to_dict(k: CameraIntrinsics) -> dict:
    return {"fx": k.fx, "fy": k.fy, "cx": k.cx, "cy": k.cy, "width": k.width, "height": k.height}


def intrinsics_from_dict(d: dict) -> CameraIntrinsics:
    return CameraIntrinsics(
        fx=float(d["fx"]), fy=float(d["fy"]), cx=float(d["cx"]), cy=float(d["cy"]),
        width=int(d["width"]), height=int(d["height"]),
    )


def transform_to_dict(t: RigidTransform) -> dict:
    return {
        "rotation": t.rotation.tolist(),
        "translation": t.translation.tolist(),
        "scale": t.scale,
    }


def transform_from_dict(d: dict) -> RigidTransform:
    return RigidTransform(
        rotation=np.array(d["rotation"], dtype=np.float64),
        translation=np.array(d["translation"], dtype=np.float64),
        scale=float(d.get("scale", 1.0)),
    )


def save_json(obj: dict, path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True))


def load_json(path) -> dict:
    return json.loads(Path(path).read_text())
