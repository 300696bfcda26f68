"""Desk-scale synthetic data generation: cameras, ray-cast depth, crops.

Replaces an external renderer with one primary ray per pixel through the
integer pixel sample point (no anti-aliasing: supervision masks must be
crisp). The camera distribution mirrors the 35mm-equivalent focal range and
elevation band used for the training corpus; distance and look-at jitter are
engine parameters, not published values.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io
from .bvh import build_bvh, cast_rays
from .core import (
    CameraIntrinsics,
    DepthMap,
    ProjectionMap,
    RigidTransform,
    TriangleMesh,
    adjust_intrinsics_for_crop_resize,
)
from .fields import sdf_from_mesh
from .geometry import NormalizationRecord, normalize_surface, unproject


@dataclass(frozen=True)
class CameraSampleConfig:
    focal_mm_range: tuple[float, float] = (30.0, 70.0)
    sensor_width_mm: float = 36.0
    elevation_deg_range: tuple[float, float] = (5.0, 65.0)
    distance_range: tuple[float, float] = (1.5, 3.5)  # multiples of object radius
    lookat_jitter: float = 0.2  # ball radius, multiples of object radius
    image_size: tuple[int, int] = (600, 600)
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.focal_mm_range[0] < self.focal_mm_range[1]:
            raise ValueError(f"bad focal range {self.focal_mm_range}")
        if not self.distance_range[0] < self.distance_range[1]:
            raise ValueError(f"bad distance range {self.distance_range}")
        if not -90 < self.elevation_deg_range[0] < self.elevation_deg_range[1] < 90:
            raise ValueError(f"bad elevation range {self.elevation_deg_range}")

    def to_dict(self) -> dict:
        return {
            "focal_mm_range": list(self.focal_mm_range),
            "sensor_width_mm": self.sensor_width_mm,
            "elevation_deg_range": list(self.elevation_deg_range),
            "distance_range": list(self.distance_range),
            "lookat_jitter": self.lookat_jitter,
            "image_size": list(self.image_size),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "CameraSampleConfig":
        kwargs = {}
        for name in cls.__dataclass_fields__:
            if name in d:
                v = d[name]
                kwargs[name] = tuple(v) if isinstance(v, list) else v
        return cls(**kwargs)


@dataclass(frozen=True)
class RenderSample:
    intrinsics: CameraIntrinsics
    pose: RigidTransform  # world -> camera
    depth: DepthMap
    projection: ProjectionMap
    record: NormalizationRecord | None  # None when < 3 pixels hit
    mesh_path: str | None = None


def normalize_mesh(mesh: TriangleMesh) -> TriangleMesh:
    """Center the bounding box at the origin and scale its longest edge to 1."""
    if mesh.n_vertices == 0:
        raise ValueError("cannot normalize an empty mesh")
    bmin, bmax = mesh.bounds()
    extent = float((bmax - bmin).max())
    if extent <= 0.0:
        raise ValueError("cannot normalize a zero-extent mesh")
    center = (bmin + bmax) / 2.0
    return TriangleMesh((mesh.vertices - center) / extent, mesh.faces)


def mesh_radius(mesh: TriangleMesh) -> float:
    """Max vertex distance from the origin (the camera-distance unit)."""
    return float(np.linalg.norm(mesh.vertices, axis=1).max())


def look_at_pose(camera_center: np.ndarray, target: np.ndarray) -> RigidTransform:
    """World-to-camera transform with +z toward the target, world z as up."""
    forward = np.asarray(target, dtype=np.float64) - np.asarray(camera_center, dtype=np.float64)
    norm = np.linalg.norm(forward)
    if norm == 0.0:
        raise ValueError("camera center and target coincide")
    z = forward / norm
    right = np.cross(z, np.array([0.0, 0.0, 1.0]))
    rnorm = np.linalg.norm(right)
    if rnorm < 1e-12:
        raise ValueError("camera looks straight along the world up axis")
    x = right / rnorm
    y = np.cross(z, x)
    rot = np.stack([x, y, z], axis=0)
    return RigidTransform(rotation=rot, translation=-(rot @ camera_center))


def sample_camera(
    cfg: CameraSampleConfig, rng: np.random.Generator, object_radius: float = 0.5
) -> tuple[CameraIntrinsics, RigidTransform]:
    """Draw intrinsics and a look-at pose from the configured distribution."""
    w, h = cfg.image_size
    f_mm = rng.uniform(*cfg.focal_mm_range)
    fx = f_mm / cfg.sensor_width_mm * w
    k = CameraIntrinsics(fx=fx, fy=fx, cx=(w - 1) / 2.0, cy=(h - 1) / 2.0, width=w, height=h)

    elevation = np.deg2rad(rng.uniform(*cfg.elevation_deg_range))
    azimuth = rng.uniform(0.0, 2.0 * np.pi)
    distance = rng.uniform(*cfg.distance_range) * object_radius
    center = distance * np.array(
        [
            np.cos(elevation) * np.cos(azimuth),
            np.cos(elevation) * np.sin(azimuth),
            np.sin(elevation),
        ]
    )
    direction = rng.normal(size=3)
    direction /= np.linalg.norm(direction)
    radius = cfg.lookat_jitter * object_radius * np.cbrt(rng.uniform())
    target = radius * direction
    return k, look_at_pose(center, target)


def raycast_depth(mesh: TriangleMesh, k: CameraIntrinsics, pose: RigidTransform) -> DepthMap:
    """One nearest-hit ray per pixel; depth is camera-frame z, mask the hit set."""
    if mesh.is_empty:
        raise ValueError("cannot ray cast an empty mesh")
    if pose.scale != 1.0:
        raise ValueError("camera pose must have unit scale")
    jj, ii = np.mgrid[0 : k.height, 0 : k.width]
    dirs_cam = np.stack(
        [
            (ii.ravel() - k.cx) / k.fx,
            (jj.ravel() - k.cy) / k.fy,
            np.ones(ii.size),
        ],
        axis=1,
    )
    # camera-frame z equals the ray parameter because dirs_cam has unit z
    rot_inv = pose.rotation.T
    origin = -(rot_inv @ pose.translation)
    dirs_world = dirs_cam @ pose.rotation  # == (R^T @ d) per row
    t = cast_rays(build_bvh(mesh.vertices, mesh.faces), origin, dirs_world)
    t = t.reshape(k.height, k.width)
    mask = np.isfinite(t)
    return DepthMap(np.where(mask, t, 0.0), mask)


def render_sample(
    mesh: TriangleMesh,
    k: CameraIntrinsics,
    pose: RigidTransform,
    mesh_path: str | None = None,
) -> RenderSample:
    depth = raycast_depth(mesh, k, pose)
    projection = unproject(depth, k)
    record = None
    if depth.n_masked >= 3:
        _, record = normalize_surface(projection)
    return RenderSample(
        intrinsics=k, pose=pose, depth=depth, projection=projection,
        record=record, mesh_path=mesh_path,
    )


def crop_and_resize(
    sample: RenderSample, out_size: tuple[int, int] = (224, 224), margin: float = 0.1
) -> RenderSample:
    """Square crop centered on the mask bbox, nearest-neighbor depth resample.

    Nearest (never linear) resampling: interpolating across depth edges would
    fabricate phantom 3D points. Intrinsics are rewritten so unprojection of
    the crop lands on the same surface up to sub-pixel ray divergence.
    """
    mask = sample.depth.mask
    if not mask.any():
        raise ValueError("cannot crop a sample with an empty mask")
    h, w = mask.shape
    rows, cols = np.nonzero(mask)
    cx_box = (cols.min() + cols.max() + 1) / 2.0
    cy_box = (rows.min() + rows.max() + 1) / 2.0
    box = max(cols.max() - cols.min() + 1, rows.max() - rows.min() + 1)
    side = int(np.ceil(box * (1.0 + 2.0 * margin)))
    side = min(side, w, h)
    x0 = int(np.clip(round(cx_box - side / 2.0), 0, w - side))
    y0 = int(np.clip(round(cy_box - side / 2.0), 0, h - side))

    out_w, out_h = out_size
    sx = np.clip(np.round(x0 + np.arange(out_w) * side / out_w).astype(int), x0, x0 + side - 1)
    sy = np.clip(np.round(y0 + np.arange(out_h) * side / out_h).astype(int), y0, y0 + side - 1)
    depth_vals = sample.depth.values[np.ix_(sy, sx)]
    depth_mask = sample.depth.mask[np.ix_(sy, sx)]
    if not depth_mask.any():
        raise ValueError("crop resampling lost every masked pixel")

    k_new = adjust_intrinsics_for_crop_resize(
        sample.intrinsics, (x0, y0, side, side), out_size
    )
    depth_new = DepthMap(depth_vals, depth_mask)
    projection = unproject(depth_new, k_new)
    record = None
    if depth_new.n_masked >= 3:
        _, record = normalize_surface(projection)
    return RenderSample(
        intrinsics=k_new, pose=sample.pose, depth=depth_new,
        projection=projection, record=record, mesh_path=sample.mesh_path,
    )


SDF_GRID_RESOLUTION = 32


def generate_dataset(
    mesh_files: list,
    out_dir,
    cfg: CameraSampleConfig,
    views_per_object: int = 1,
    crop_size: tuple[int, int] | None = None,
) -> dict:
    """Render each mesh from sampled cameras and write a native benchmark dir.

    Per sample: depth + mask, projection map, intrinsics/pose JSON, and the
    32^3 SDF grid of the (normalized) source mesh. A manifest makes the
    output directly loadable by the benchmark harness.
    """
    out_dir = Path(out_dir)
    mesh_dir = out_dir / "meshes"
    mesh_dir.mkdir(parents=True, exist_ok=True)
    instances = []
    errors = []
    for obj_index, mesh_file in enumerate(sorted(str(p) for p in mesh_files)):
        stem = Path(mesh_file).stem
        mesh = normalize_mesh(io.load_mesh(mesh_file))
        mesh_rel = f"meshes/{stem}.obj"
        io.save_mesh_obj(mesh, out_dir / mesh_rel)
        half = 0.5 + 2.0 / (SDF_GRID_RESOLUTION - 1)  # unit cube plus ~2 cells
        sdf = sdf_from_mesh(
            mesh,
            resolution=(SDF_GRID_RESOLUTION,) * 3,
            bounds=(-half * np.ones(3), half * np.ones(3)),
        )
        radius = mesh_radius(mesh)
        rng = np.random.default_rng([cfg.seed, obj_index])
        for view in range(views_per_object):
            instance_id = f"{stem}_v{view:03d}"
            k, pose = sample_camera(cfg, rng, radius)
            sample = render_sample(mesh, k, pose, mesh_path=mesh_rel)
            if crop_size is not None and sample.depth.mask.any():
                sample = crop_and_resize(sample, crop_size)
            if not sample.depth.mask.any():
                errors.append({"instance_id": instance_id, "error": "object fully out of frame"})
                continue
            sdir = out_dir / instance_id
            sdir.mkdir(parents=True, exist_ok=True)
            io.save_depth_map(sample.depth, sdir / "depth.raw")
            io.save_projection_map(sample.projection, sdir / "projection.raw")
            io.save_voxel_grid(sdf, sdir / "sdf32.raw")
            io.save_json(io.intrinsics_to_dict(sample.intrinsics), sdir / "intrinsics.json")
            io.save_json(io.transform_to_dict(sample.pose), sdir / "pose.json")
            meta = {
                "instance_id": instance_id,
                "category": stem,
                "mesh": mesh_rel,
                "depth": "depth.raw",
                "source": "datagen",
                "view": view,
            }
            io.save_json(meta, sdir / "meta.json")
            instances.append(meta)
    manifest = {
        "format": "shape-eval-native",
        "convention": {"name": "native", "up_axis": "z", "unit_scale": 1.0},
        "camera_config": cfg.to_dict(),
        "instances": instances,
        "errors": errors,
    }
    io.save_json(manifest, out_dir / "manifest.json")
    return manifest
