"""Shared geometry types and coordinate conventions.

Conventions used throughout the package:

* Pixel ``(i, j)`` means ``i`` = column index (x) and ``j`` = row index (y),
  with the sample point sitting at integer coordinates.
* The camera frame is right-handed with +z into the scene (depth positive),
  +x right and +y down, consistent with image indexing.
* Lengths are meters unless a normalization record says otherwise.

All types are immutable after construction: array fields are copied and
marked read-only, so instances are safe to share across workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

OCCUPANCY = "occupancy"
SDF = "sdf"
FIELD_KINDS = (OCCUPANCY, SDF)


def _frozen(a: np.ndarray, dtype, shape_hint: str, name: str) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True, order="C")
    out.setflags(write=False)
    if shape_hint and out.ndim != len(shape_hint.split("x")):
        raise ValueError(f"{name} must be {shape_hint}, got shape {out.shape}")
    return out


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole intrinsics; ``matrix()`` gives K = [[fx,0,cx],[0,fy,cy],[0,0,1]]."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int
    height: int

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx}, fy={self.fy}")
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image size must be >= 1x1, got {self.width}x{self.height}")
        if not (0 <= self.cx < self.width and 0 <= self.cy < self.height):
            raise ValueError(
                f"principal point ({self.cx}, {self.cy}) outside "
                f"{self.width}x{self.height} image"
            )

    def matrix(self) -> np.ndarray:
        return np.array(
            [[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]]
        )

    def inverse_matrix(self) -> np.ndarray:
        # closed form; composes with matrix() to identity within 1e-12
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


def intrinsics_matrix(k: CameraIntrinsics) -> np.ndarray:
    return k.matrix()


def intrinsics_inverse(k: CameraIntrinsics) -> np.ndarray:
    return k.inverse_matrix()


def adjust_intrinsics_for_crop_resize(
    k: CameraIntrinsics,
    crop_box: tuple[float, float, float, float],
    new_size: tuple[int, int],
) -> CameraIntrinsics:
    """Intrinsics after cropping ``crop_box`` = (x0, y0, w, h) and resizing.

    A 3D point projecting to pixel p in the original image projects to
    ``(p - crop_origin) * (new_size / crop_size)`` under the result.
    """
    x0, y0, cw, ch = (float(v) for v in crop_box)
    new_w, new_h = int(new_size[0]), int(new_size[1])
    if cw <= 0 or ch <= 0:
        raise ValueError(f"crop box must have positive size, got {crop_box}")
    if new_w < 1 or new_h < 1:
        raise ValueError(f"new size must be >= 1x1, got {new_size}")
    if x0 < 0 or y0 < 0 or x0 + cw > k.width or y0 + ch > k.height:
        raise ValueError(
            f"crop box {crop_box} outside {k.width}x{k.height} image bounds"
        )
    sx = new_w / cw
    sy = new_h / ch
    return CameraIntrinsics(
        fx=k.fx * sx,
        fy=k.fy * sy,
        cx=(k.cx - x0) * sx,
        cy=(k.cy - y0) * sy,
        width=new_w,
        height=new_h,
    )


class DepthMap:
    """Metric depth grid plus a foreground mask.

    Masked pixels carry finite positive camera-frame z; unmasked entries are
    zeroed and must be ignored by every consumer.
    """

    __slots__ = ("values", "mask")

    def __init__(self, values: np.ndarray, mask: np.ndarray):
        values = np.asarray(values, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if values.ndim != 2 or mask.shape != values.shape:
            raise ValueError(
                f"depth values and mask must be matching h x w grids, "
                f"got {values.shape} and {mask.shape}"
            )
        masked = values[mask]
        if masked.size and not (np.all(np.isfinite(masked)) and np.all(masked > 0)):
            raise ValueError("masked depth values must be finite and > 0")
        clean = np.where(mask, values, 0.0)
        clean.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "values", clean)
        object.__setattr__(self, "mask", mask)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("DepthMap is immutable")

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    @property
    def n_masked(self) -> int:
        return int(self.mask.sum())


class ProjectionMap:
    """h x w grid of camera-frame 3D points for the visible surface.

    Unmasked entries are the all-zero sentinel; consumers must consult the
    mask (avoids NaN propagation in vectorized kernels).
    """

    __slots__ = ("points", "mask")

    def __init__(self, points: np.ndarray, mask: np.ndarray):
        points = np.asarray(points, dtype=np.float64)
        mask = np.asarray(mask, dtype=bool)
        if points.ndim != 3 or points.shape[2] != 3 or mask.shape != points.shape[:2]:
            raise ValueError(
                f"projection map must be h x w x 3 with h x w mask, "
                f"got {points.shape} and {mask.shape}"
            )
        if not np.all(np.isfinite(points[mask])):
            raise ValueError("masked projection points must be finite")
        clean = np.where(mask[..., None], points, 0.0)
        clean.setflags(write=False)
        mask = mask.copy()
        mask.setflags(write=False)
        object.__setattr__(self, "points", clean)
        object.__setattr__(self, "mask", mask)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("ProjectionMap is immutable")

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def masked_points(self) -> np.ndarray:
        """(n, 3) array of the foreground points, row-major pixel order."""
        return self.points[self.mask]


class TriangleMesh:
    """Indexed triangle soup; zero-area faces are dropped at construction."""

    __slots__ = ("vertices", "faces")

    def __init__(self, vertices: np.ndarray, faces: np.ndarray):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(vertices)):
            raise ValueError("mesh vertices must be finite")
        if faces.size:
            if faces.min() < 0 or faces.max() >= len(vertices):
                raise ValueError(
                    f"face indices out of range [0, {len(vertices)}) "
                    f"(min {faces.min()}, max {faces.max()})"
                )
            a = vertices[faces[:, 0]]
            cross = np.cross(vertices[faces[:, 1]] - a, vertices[faces[:, 2]] - a)
            keep = np.linalg.norm(cross, axis=1) > 0.0
            faces = faces[keep]
        vertices = vertices.copy()
        vertices.setflags(write=False)
        faces = faces.copy()
        faces.setflags(write=False)
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "faces", faces)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("TriangleMesh is immutable")

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    @property
    def is_empty(self) -> bool:
        return self.faces.shape[0] == 0

    def face_corners(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        v, f = self.vertices, self.faces
        return v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]

    def face_areas(self) -> np.ndarray:
        a, b, c = self.face_corners()
        return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        if self.n_vertices == 0:
            raise ValueError("empty mesh has no bounds")
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def euler_characteristic(self) -> int:
        """V - E + F over the welded connectivity (E = unique undirected edges)."""
        f = self.faces
        edges = np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]])
        edges = np.sort(edges, axis=1)
        n_edges = len(np.unique(edges, axis=0))
        used = np.unique(f)
        return int(len(used) - n_edges + len(f))


class PointCloud:
    __slots__ = ("points",)

    def __init__(self, points: np.ndarray):
        points = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(points)):
            raise ValueError("point cloud coordinates must be finite")
        points = points.copy()
        points.setflags(write=False)
        object.__setattr__(self, "points", points)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("PointCloud is immutable")

    def __len__(self) -> int:
        return len(self.points)


_ROT_TOL = 1e-9


@dataclass(frozen=True)
class RigidTransform:
    """Similarity transform x -> scale * R @ x + t with det(R) = +1."""

    rotation: np.ndarray
    translation: np.ndarray
    scale: float = 1.0

    def __post_init__(self):
        r = _frozen(self.rotation, np.float64, "3x3", "rotation")
        t = _frozen(self.translation, np.float64, "3", "translation")
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError(f"bad transform shapes {r.shape}, {t.shape}")
        if np.abs(r @ r.T - np.eye(3)).max() > _ROT_TOL:
            raise ValueError("rotation is not orthonormal within 1e-9")
        if abs(np.linalg.det(r) - 1.0) > _ROT_TOL:
            raise ValueError("rotation determinant must be +1 within 1e-9")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)
        object.__setattr__(self, "scale", float(self.scale))

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3), 1.0)

    def apply(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64)
        return self.scale * (pts @ self.rotation.T) + self.translation

    def compose(self, inner: "RigidTransform") -> "RigidTransform":
        """self ∘ inner: apply ``inner`` first, then ``self``."""
        return RigidTransform(
            rotation=self.rotation @ inner.rotation,
            translation=self.scale * (self.rotation @ inner.translation) + self.translation,
            scale=self.scale * inner.scale,
        )

    def inverse(self) -> "RigidTransform":
        rt = self.rotation.T
        return RigidTransform(
            rotation=rt,
            translation=-(rt @ self.translation) / self.scale,
            scale=1.0 / self.scale,
        )


class ScalarField:
    """Evaluation contract for implicit fields: point queries -> scalars.

    ``kind`` is "occupancy" (values in [0, 1], surface at 0.5) or "sdf"
    (negative inside, surface at 0). Implementations must be deterministic
    and safe for concurrent queries.
    """

    kind: str = OCCUPANCY

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class CallableField(ScalarField):
    def __init__(self, fn: Callable[[np.ndarray], np.ndarray], kind: str):
        if kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        self._fn = fn
        self.kind = kind

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(self._fn(np.asarray(points, dtype=np.float64)), dtype=np.float64)


class VoxelGrid:
    """Regular scalar lattice spanning an axis-aligned box inclusively.

    ``values[x, y, z]`` is the sample at lattice point (x, y, z); serialization
    flattens with x fastest.
    """

    __slots__ = ("resolution", "bounds_min", "bounds_max", "values", "kind")

    def __init__(self, resolution, bounds, values: np.ndarray, kind: str):
        resolution = tuple(int(n) for n in resolution)
        bmin = np.asarray(bounds[0], dtype=np.float64).reshape(3)
        bmax = np.asarray(bounds[1], dtype=np.float64).reshape(3)
        values = np.asarray(values, dtype=np.float64).reshape(resolution)
        if any(n < 2 for n in resolution):
            raise ValueError(f"resolution must be >= 2 per axis, got {resolution}")
        if not np.all(bmin < bmax):
            raise ValueError(f"bounds min {bmin} must be < max {bmax} per axis")
        if kind not in FIELD_KINDS:
            raise ValueError(f"unknown field kind {kind!r}")
        bmin.setflags(write=False)
        bmax.setflags(write=False)
        values = values.copy()
        values.setflags(write=False)
        object.__setattr__(self, "resolution", resolution)
        object.__setattr__(self, "bounds_min", bmin)
        object.__setattr__(self, "bounds_max", bmax)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "kind", kind)

    def __setattr__(self, *a):  # pragma: no cover
        raise AttributeError("VoxelGrid is immutable")

    def spacing(self) -> np.ndarray:
        res = np.array(self.resolution, dtype=np.float64)
        return (self.bounds_max - self.bounds_min) / (res - 1.0)

    def axis_coordinates(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return tuple(
            np.linspace(self.bounds_min[i], self.bounds_max[i], self.resolution[i])
            for i in range(3)
        )

    def lattice_points(self) -> np.ndarray:
        """(nx*ny*nz, 3) lattice coordinates pairing with ``values.reshape(-1)``."""
        xs, ys, zs = self.axis_coordinates()
        gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
        return np.stack([gx, gy, gz], axis=-1).reshape(-1, 3)

    def with_values(self, values: np.ndarray, kind: str | None = None) -> "VoxelGrid":
        return VoxelGrid(
            self.resolution,
            (self.bounds_min, self.bounds_max),
            values,
            self.kind if kind is None else kind,
        )
