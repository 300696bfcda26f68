"""Benchmark unification and the evaluation runner.

Heterogeneous (mesh, camera metadata) sources are ingested into one native
on-disk layout: an instance directory per view holding the mesh reference
plus optional depth/intrinsics/pose, indexed by a manifest. The runner drives
predictor -> grid sampling -> isosurface extraction -> alignment -> metrics
per instance, isolating failures so one corrupt mesh never kills a run.
"""

from __future__ import annotations

import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from . import io
from .alignment import AlignmentConfig
from .core import (
    OCCUPANCY,
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    RigidTransform,
    ScalarField,
    TriangleMesh,
)
from .fields import grid_sample
from .geometry import normalize_surface, unproject
from .marching_cubes import marching_cubes
from .metrics import DEFAULT_THRESHOLDS, EvalPairConfig, MetricResult, evaluate_pair
from .primitives import ConstantField, SphereOccupancy, TorusSdf

ENGINE_VERSION = "0.1.0"


# ---------------------------------------------------------------------------
# instances and ingestion

@dataclass(frozen=True)
class BenchmarkInstance:
    instance_id: str
    category: str
    mesh_path: str
    depth_path: str | None = None
    intrinsics: CameraIntrinsics | None = None
    pose: RigidTransform | None = None
    source: str = "unknown"

    def __post_init__(self):
        if (self.depth_path is None) != (self.intrinsics is None):
            raise ValueError(
                f"{self.instance_id}: intrinsics must be present iff depth is present"
            )

    def load_mesh(self) -> TriangleMesh:
        return io.load_mesh(self.mesh_path)

    def load_depth(self) -> DepthMap:
        if self.depth_path is None:
            raise ValueError(f"{self.instance_id} has no depth annotation")
        return io.load_depth_map(self.depth_path)


@dataclass(frozen=True)
class ConventionSpec:
    """Source-layout declaration: axis convention and length unit.

    ``up_axis`` is "z" (native) or "y"; ``unit_scale`` multiplies source
    units into meters. The source directory must hold one subdirectory per
    instance with a ``meta.json`` naming the mesh (and optional depth).
    """

    name: str = "native"
    up_axis: str = "z"
    unit_scale: float = 1.0

    def __post_init__(self):
        if self.up_axis not in ("z", "y"):
            raise ValueError(f"unsupported up axis {self.up_axis!r}")
        if not self.unit_scale > 0:
            raise ValueError(f"unit scale must be positive, got {self.unit_scale}")

    def axis_matrix(self) -> np.ndarray:
        if self.up_axis == "z":
            return np.eye(3)
        # rotate source +y up to engine +z up
        return np.array([[1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]])

    def to_dict(self) -> dict:
        return {"name": self.name, "up_axis": self.up_axis, "unit_scale": self.unit_scale}

    @classmethod
    def from_dict(cls, d: dict) -> "ConventionSpec":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})


def _convert_instance(
    inst_dir: Path, meta: dict, convention: ConventionSpec, out_dir: Path
) -> dict:
    instance_id = meta.get("instance_id", inst_dir.name)
    mesh_rel = meta["mesh"]
    mesh = io.load_mesh((inst_dir / mesh_rel).resolve())
    m = convention.axis_matrix()
    s = convention.unit_scale
    mesh = TriangleMesh(s * (mesh.vertices @ m.T), mesh.faces)

    odir = out_dir / instance_id
    odir.mkdir(parents=True, exist_ok=True)
    io.save_mesh_obj(mesh, odir / "mesh.obj")
    out_meta = {
        "instance_id": instance_id,
        "category": meta.get("category", "unknown"),
        "mesh": f"{instance_id}/mesh.obj",
        "source": meta.get("source", convention.name),
    }

    if meta.get("depth"):
        depth = io.load_depth_map(inst_dir / meta["depth"])
        depth = DepthMap(depth.values * s, depth.mask)
        io.save_depth_map(depth, odir / "depth.raw")
        out_meta["depth"] = f"{instance_id}/depth.raw"
        k = io.intrinsics_from_dict(io.load_json(inst_dir / meta.get("intrinsics", "intrinsics.json")))
        io.save_json(io.intrinsics_to_dict(k), odir / "intrinsics.json")
        out_meta["intrinsics"] = f"{instance_id}/intrinsics.json"
        pose_file = inst_dir / meta.get("pose", "pose.json")
        if pose_file.exists():
            pose = io.transform_from_dict(io.load_json(pose_file))
            pose = RigidTransform(
                rotation=pose.rotation @ m.T,
                translation=s * pose.translation,
                scale=pose.scale,
            )
            io.save_json(io.transform_to_dict(pose), odir / "pose.json")
            out_meta["pose"] = f"{instance_id}/pose.json"
    return out_meta


def ingest_dataset(source_dir, convention: ConventionSpec, out_dir) -> dict:
    """Convert a declared-layout source into the native benchmark format.

    Returns the manifest; unreadable instances are flagged there and the
    remainder is ingested.
    """
    source_dir = Path(source_dir)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    src_manifest = source_dir / "manifest.json"
    metas: list[tuple[Path, dict]] = []
    if src_manifest.exists():
        listed = io.load_json(src_manifest).get("instances", [])
        for meta in listed:
            metas.append((source_dir / meta["instance_id"], {**meta, "mesh": str(Path("..") / meta["mesh"])}))
    else:
        for inst_dir in sorted(p for p in source_dir.iterdir() if p.is_dir()):
            meta_file = inst_dir / "meta.json"
            if meta_file.exists():
                metas.append((inst_dir, io.load_json(meta_file)))
    instances, errors = [], []
    for inst_dir, meta in metas:
        try:
            instances.append(_convert_instance(inst_dir, meta, convention, out_dir))
        except Exception as exc:  # noqa: BLE001 - per-instance isolation
            errors.append({"instance_id": meta.get("instance_id", inst_dir.name), "error": str(exc)})
    manifest = {
        "format": "shape-eval-native",
        "convention": ConventionSpec().to_dict(),
        "source_convention": convention.to_dict(),
        "instances": instances,
        "errors": errors,
    }
    io.save_json(manifest, out_dir / "manifest.json")
    return manifest


def load_benchmark(bench_dir) -> list[BenchmarkInstance]:
    """Instances from a native benchmark directory (manifest-indexed)."""
    bench_dir = Path(bench_dir)
    manifest = io.load_json(bench_dir / "manifest.json")
    instances = []
    for meta in manifest["instances"]:
        inst_dir = bench_dir / meta["instance_id"]
        depth_rel = meta.get("depth")
        if depth_rel is not None and not Path(depth_rel).is_absolute():
            # datagen manifests store depth relative to the instance dir
            candidate = inst_dir / depth_rel
            depth_path = candidate if candidate.exists() else bench_dir / depth_rel
        else:
            depth_path = depth_rel
        intr = None
        if depth_path is not None:
            intr_rel = meta.get("intrinsics", f"{meta['instance_id']}/intrinsics.json")
            intr = io.intrinsics_from_dict(io.load_json(bench_dir / intr_rel))
        pose = None
        pose_rel = meta.get("pose")
        if pose_rel is None and (inst_dir / "pose.json").exists():
            pose_rel = f"{meta['instance_id']}/pose.json"
        if pose_rel is not None:
            pose = io.transform_from_dict(io.load_json(bench_dir / pose_rel))
        instances.append(
            BenchmarkInstance(
                instance_id=meta["instance_id"],
                category=meta.get("category", "unknown"),
                mesh_path=str(bench_dir / meta["mesh"]),
                depth_path=str(depth_path) if depth_path else None,
                intrinsics=intr,
                pose=pose,
                source=meta.get("source", "unknown"),
            )
        )
    return instances


# ---------------------------------------------------------------------------
# predictors

class VisibleShellField(ScalarField):
    """Occupancy 1 within ``eps`` of a fixed point set, else 0."""

    kind = OCCUPANCY

    def __init__(self, points: np.ndarray, eps: float):
        if not eps > 0:
            raise ValueError(f"shell epsilon must be positive, got {eps}")
        self._tree = cKDTree(np.asarray(points, dtype=np.float64).reshape(-1, 3))
        self.eps = float(eps)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        # bounded query: far lattice points prune immediately instead of
        # paying a full nearest-neighbor descent against the dense surface
        d, _ = self._tree.query(
            np.asarray(points, dtype=np.float64).reshape(-1, 3),
            distance_upper_bound=self.eps,
            workers=-1,
        )
        return np.isfinite(d).astype(np.float64)


def visible_shell_predictor(instance: BenchmarkInstance, shell_eps: float) -> ScalarField:
    """Reference predictor: an eps shell around the normalized visible surface."""
    if instance.depth_path is None or instance.intrinsics is None:
        raise ValueError(f"{instance.instance_id}: visible shell needs depth + intrinsics")
    projection = unproject(instance.load_depth(), instance.intrinsics)
    normalized, _ = normalize_surface(projection)
    return VisibleShellField(normalized.masked_points(), shell_eps)


@dataclass(frozen=True)
class PredictorSpec:
    """Declarative predictor: analytic-shape | visible-shell | constant | external-mesh-dir."""

    kind: str
    params: dict = field(default_factory=dict)

    _KINDS = ("analytic-shape", "visible-shell", "constant", "external-mesh-dir")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError(f"unknown predictor kind {self.kind!r}; expected one of {self._KINDS}")

    def to_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    @classmethod
    def from_dict(cls, d: dict) -> "PredictorSpec":
        return cls(kind=d["kind"], params=dict(d.get("params", {})))

    def predict(self, instance: BenchmarkInstance) -> ScalarField | TriangleMesh:
        p = self.params
        if self.kind == "analytic-shape":
            shape = p.get("shape", "sphere")
            center = p.get("center", (0.0, 0.0, 0.0))
            if shape == "sphere":
                return SphereOccupancy(radius=p.get("radius", 0.5), center=center)
            if shape == "torus":
                return TorusSdf(
                    major_radius=p.get("major_radius", 0.5),
                    minor_radius=p.get("minor_radius", 0.2),
                    center=center,
                )
            raise ValueError(f"unknown analytic shape {shape!r}")
        if self.kind == "visible-shell":
            return visible_shell_predictor(instance, p.get("shell_eps", 0.02))
        if self.kind == "constant":
            return ConstantField(p.get("value", 0.0), kind=OCCUPANCY)
        # external-mesh-dir: predictions stored as meshes keyed by instance id
        pattern = p.get("pattern", "{instance_id}.obj")
        mesh_path = Path(p["dir"]) / pattern.format(
            instance_id=instance.instance_id, category=instance.category
        )
        return io.load_mesh(mesh_path)


# ---------------------------------------------------------------------------
# runner

@dataclass(frozen=True)
class RunConfig:
    """One auditable snapshot of every protocol constant."""

    grid_resolution: int = 128
    grid_bounds: tuple = ((-1.0, -1.0, -1.0), (1.0, 1.0, 1.0))
    iso_level: float | None = None
    n_points: int = 10000
    seed: int = 0
    thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS
    normalize_by_gt: bool = True
    align: bool = True
    alignment: AlignmentConfig = field(default_factory=AlignmentConfig)
    n_workers: int = 1

    def to_dict(self) -> dict:
        return {
            "grid_resolution": self.grid_resolution,
            "grid_bounds": [list(b) for b in self.grid_bounds],
            "iso_level": self.iso_level,
            "n_points": self.n_points,
            "seed": self.seed,
            "thresholds": list(self.thresholds),
            "normalize_by_gt": self.normalize_by_gt,
            "align": self.align,
            "alignment": self.alignment.to_dict(),
            "n_workers": self.n_workers,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        kwargs = {}
        for name in cls.__dataclass_fields__:
            if name not in d:
                continue
            v = d[name]
            if name == "alignment":
                v = AlignmentConfig.from_dict(v)
            elif name == "grid_bounds":
                v = tuple(tuple(b) for b in v)
            elif name == "thresholds":
                v = tuple(v)
            kwargs[name] = v
        return cls(**kwargs)


@dataclass(frozen=True)
class InstanceRow:
    instance_id: str
    category: str
    status: str  # "ok" or a reason code
    metrics: MetricResult | None = None
    error: str | None = None


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[InstanceRow, ...]
    aggregates: dict | None  # None when no instance evaluated cleanly
    per_category: dict
    config: dict
    predictor: dict
    engine_version: str = ENGINE_VERSION

    def __post_init__(self):
        # aggregate-row consistency, checked on every construction
        valid = [r.metrics for r in self.rows if r.status == "ok"]
        if self.aggregates is None:
            if valid:
                raise ValueError("aggregates absent despite valid rows")
            return
        if abs(self.aggregates["cd"] - sum(m.cd for m in valid) / len(valid)) > 1e-12:
            raise ValueError("aggregate cd does not match the mean of its rows")
        for d, v in self.aggregates["fs"].items():
            if abs(v - sum(m.fs[d] for m in valid) / len(valid)) > 1e-12:
                raise ValueError(f"aggregate fs@{d} does not match the mean of its rows")

    @property
    def n_valid(self) -> int:
        return sum(1 for r in self.rows if r.status == "ok")


def _aggregate(rows: list[InstanceRow], thresholds) -> dict | None:
    valid = [r.metrics for r in rows if r.status == "ok"]
    if not valid:
        return None
    return {
        "n": len(valid),
        "cd": float(np.mean([m.cd for m in valid])),
        "fs": {d: float(np.mean([m.fs[d] for m in valid])) for d in thresholds},
    }


def instance_seed(run_seed: int, instance_id: str) -> tuple[int, int]:
    """Stable per-instance sampling seed: run seed mixed with the id's CRC."""
    return (run_seed, zlib.crc32(instance_id.encode("utf-8")))


def _evaluate_instance(
    instance: BenchmarkInstance,
    predictor: PredictorSpec,
    cfg: RunConfig,
    mesh_cache: dict,
) -> InstanceRow:
    try:
        gt_path = instance.mesh_path
        if gt_path not in mesh_cache:
            mesh_cache[gt_path] = io.load_mesh(gt_path)
        gt_mesh = mesh_cache[gt_path]
        if gt_mesh.is_empty:
            return InstanceRow(instance.instance_id, instance.category, "empty-gt-mesh",
                               error="ground-truth mesh has no faces")
    except Exception as exc:  # noqa: BLE001
        return InstanceRow(instance.instance_id, instance.category, "gt-load-error", error=str(exc))

    try:
        predicted = predictor.predict(instance)
    except Exception as exc:  # noqa: BLE001
        return InstanceRow(instance.instance_id, instance.category, "predictor-error", error=str(exc))

    try:
        if isinstance(predicted, ScalarField):
            grid = grid_sample(predicted, (cfg.grid_resolution,) * 3, cfg.grid_bounds)
            pred_mesh = marching_cubes(grid, cfg.iso_level)
        else:
            pred_mesh = predicted
        if pred_mesh.is_empty:
            return InstanceRow(instance.instance_id, instance.category, "empty-extraction",
                               error="no isosurface crossing in the sampled grid")
        pair_cfg = EvalPairConfig(
            n_points=cfg.n_points,
            seed=instance_seed(cfg.seed, instance.instance_id),
            thresholds=cfg.thresholds,
            normalize_by_gt=cfg.normalize_by_gt,
            alignment=cfg.alignment if cfg.align else None,
        )
        metrics = evaluate_pair(pred_mesh, gt_mesh, pair_cfg)
        return InstanceRow(instance.instance_id, instance.category, "ok", metrics=metrics)
    except Exception as exc:  # noqa: BLE001
        return InstanceRow(instance.instance_id, instance.category, "metric-error", error=str(exc))


def run_benchmark(
    instances: list[BenchmarkInstance], predictor: PredictorSpec, cfg: RunConfig | None = None
) -> EvalReport:
    """Evaluate a predictor over a benchmark; failures stay per-instance."""
    cfg = cfg or RunConfig()
    if not instances:
        raise ValueError("benchmark instance list is empty")
    ordered = sorted(instances, key=lambda i: i.instance_id)
    mesh_cache: dict = {}
    if cfg.n_workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.n_workers) as pool:
            rows = list(
                pool.map(lambda i: _evaluate_instance(i, predictor, cfg, mesh_cache), ordered)
            )
    else:
        rows = [_evaluate_instance(i, predictor, cfg, mesh_cache) for i in ordered]
    rows.sort(key=lambda r: r.instance_id)

    per_category: dict = {}
    for cat in sorted({r.category for r in rows}):
        agg = _aggregate([r for r in rows if r.category == cat], cfg.thresholds)
        if agg is not None:
            per_category[cat] = agg
    return EvalReport(
        rows=tuple(rows),
        aggregates=_aggregate(rows, cfg.thresholds),
        per_category=per_category,
        config=cfg.to_dict(),
        predictor=predictor.to_dict(),
    )
