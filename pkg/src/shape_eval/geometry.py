"""Depth unprojection, its analytic Jacobians, and surface normalization.

Unprojection lifts pixel (i, j) with depth d to the camera-frame point
``d * K^{-1} [i, j, 1]^T``; the camera frame doubles as the world frame for
reconstruction, so intrinsics alone close the loop.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import CameraIntrinsics, DepthMap, PointCloud, ProjectionMap, RigidTransform


def _pixel_grid(width: int, height: int) -> tuple[np.ndarray, np.ndarray]:
    """Column (x) and row (y) index grids, samples at integer coordinates."""
    jj, ii = np.mgrid[0:height, 0:width]
    return ii.astype(np.float64), jj.astype(np.float64)


def unproject(depth: DepthMap, k: CameraIntrinsics) -> ProjectionMap:
    """Lift a masked depth map to a camera-frame projection map.

    Unmasked entries take the all-zero sentinel; the mask is copied unchanged.
    """
    h, w = depth.shape
    if (w, h) != (k.width, k.height):
        raise ValueError(
            f"depth is {w}x{h} but intrinsics expect {k.width}x{k.height}"
        )
    ii, jj = _pixel_grid(w, h)
    d = depth.values
    points = np.stack(
        [d * (ii - k.cx) / k.fx, d * (jj - k.cy) / k.fy, d], axis=-1
    )
    points[~depth.mask] = 0.0
    return ProjectionMap(points, depth.mask)


def project_points(points: np.ndarray, k: CameraIntrinsics) -> np.ndarray:
    """Perspective-project camera-frame points to (n, 2) pixel coordinates."""
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    if np.any(pts[:, 2] <= 0):
        raise ValueError("cannot project points with non-positive depth")
    return np.stack(
        [k.fx * pts[:, 0] / pts[:, 2] + k.cx, k.fy * pts[:, 1] / pts[:, 2] + k.cy],
        axis=1,
    )


@dataclass(frozen=True)
class UnprojectionGradients:
    """Per-pixel partials of the projection map, zero outside the mask.

    ``d_depth[j, i]`` is dP_ij/dD_ij (a 3-vector); the intrinsics entries are
    dP_ij/dfx etc., each an (h, w, 3) grid.
    """

    d_depth: np.ndarray
    d_fx: np.ndarray
    d_fy: np.ndarray
    d_cx: np.ndarray
    d_cy: np.ndarray


def unproject_gradients(depth: DepthMap, k: CameraIntrinsics) -> UnprojectionGradients:
    """Analytic Jacobians of ``unproject`` w.r.t. depth and intrinsics.

    From P = (d*(i-cx)/fx, d*(j-cy)/fy, d):
    dP/dd = K^{-1} [i, j, 1]^T, dPx/dfx = -d*(i-cx)/fx^2, dPx/dcx = -d/fx,
    and the symmetric y-terms; Pz has no intrinsics dependence.
    """
    h, w = depth.shape
    if (w, h) != (k.width, k.height):
        raise ValueError(
            f"depth is {w}x{h} but intrinsics expect {k.width}x{k.height}"
        )
    ii, jj = _pixel_grid(w, h)
    d = depth.values
    m = depth.mask
    zeros = np.zeros((h, w))
    xi = (ii - k.cx) / k.fx
    yj = (jj - k.cy) / k.fy

    def stack3(x, y, z):
        g = np.stack([x, y, z], axis=-1)
        g[~m] = 0.0
        return g

    return UnprojectionGradients(
        d_depth=stack3(xi, yj, np.ones((h, w))),
        d_fx=stack3(-d * xi / k.fx, zeros, zeros),
        d_fy=stack3(zeros, -d * yj / k.fy, zeros),
        d_cx=stack3(-d / k.fx, zeros, zeros),
        d_cy=stack3(zeros, -d / k.fy, zeros),
    )


@dataclass(frozen=True)
class NormalizationRecord:
    """Centering plus the isotropic scale factor applied after centering.

    ``normalize`` maps x to scale * (x - centroid); ``denormalize`` inverts it.
    """

    centroid: np.ndarray
    scale: float

    def __post_init__(self):
        c = np.asarray(self.centroid, dtype=np.float64).reshape(3).copy()
        c.setflags(write=False)
        object.__setattr__(self, "centroid", c)
        object.__setattr__(self, "scale", float(self.scale))
        if not self.scale > 0:
            raise ValueError(f"normalization scale must be positive, got {self.scale}")

    def normalize(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) - self.centroid) * self.scale

    def denormalize(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale + self.centroid

    @classmethod
    def from_points(cls, points: np.ndarray) -> "NormalizationRecord":
        """Zero-mean, unit-scale record: max distance from the centroid -> 1."""
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        centroid = pts.mean(axis=0)
        radius = float(np.linalg.norm(pts - centroid, axis=1).max(initial=0.0))
        if radius <= 0.0:
            raise ValueError("degenerate surface: all points coincide")
        return cls(centroid=centroid, scale=1.0 / radius)


def normalize_surface(p: ProjectionMap) -> tuple[ProjectionMap, NormalizationRecord]:
    """Center the masked surface at zero and scale it into the unit ball."""
    if int(p.mask.sum()) < 3:
        raise ValueError("normalization needs at least 3 masked pixels")
    record = NormalizationRecord.from_points(p.masked_points())
    points = record.normalize(p.points)
    points[~p.mask] = 0.0
    return ProjectionMap(points, p.mask), record


def apply_transform(cloud: PointCloud, t: RigidTransform) -> PointCloud:
    return PointCloud(t.apply(cloud.points))
