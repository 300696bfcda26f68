"""Deterministic geometry kernels and a benchmark runner for single-view
3D shape reconstruction: depth unprojection, implicit-field handling,
isosurface extraction, Chamfer/F-score with brute-force frame alignment,
the training losses, and synthetic data generation."""

from .core import (
    CameraIntrinsics,
    DepthMap,
    PointCloud,
    ProjectionMap,
    RigidTransform,
    ScalarField,
    TriangleMesh,
    VoxelGrid,
    adjust_intrinsics_for_crop_resize,
    intrinsics_inverse,
    intrinsics_matrix,
)
from .geometry import (
    NormalizationRecord,
    apply_transform,
    normalize_surface,
    project_points,
    unproject,
    unproject_gradients,
)
from .fields import grid_sample, inside_mesh, occupancy_from_sdf, sdf_from_mesh
from .marching_cubes import marching_cubes
from .metrics import (
    EvalPairConfig,
    MetricResult,
    chamfer,
    evaluate_pair,
    fscore,
    sample_surface,
)
from .alignment import AlignmentConfig, align_frames, icp_refine
from .losses import occupancy_bce, projection_loss, ssimae_depth_loss
from .harness import (
    BenchmarkInstance,
    ConventionSpec,
    EvalReport,
    PredictorSpec,
    RunConfig,
    ingest_dataset,
    load_benchmark,
    run_benchmark,
    visible_shell_predictor,
)

__version__ = "0.1.0"
