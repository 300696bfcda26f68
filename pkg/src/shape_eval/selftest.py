"""Fast oracle suites behind ``shape-eval selftest``.

Each suite re-derives expected values through an independent route (brute
force, finite differences, analytic geometry) and checks the engine against
it, printing one pass/fail line per suite.
"""

from __future__ import annotations

import time

import numpy as np
from scipy.spatial.distance import cdist

from .alignment import AlignmentConfig, align_frames
from .core import CameraIntrinsics, DepthMap, PointCloud
from .fields import grid_sample, inside_mesh, sdf_from_mesh
from .geometry import apply_transform, project_points, unproject
from .losses import occupancy_bce, projection_loss_depth_intrinsics, ssimae_depth_loss
from .marching_cubes import marching_cubes
from .metrics import chamfer, fscore, sample_surface
from .primitives import SphereSdf, cube_mesh, icosphere_mesh
from .core import RigidTransform


def _check_unprojection(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(20):
        w, h = int(rng.integers(8, 40)), int(rng.integers(8, 40))
        k = CameraIntrinsics(
            fx=float(rng.uniform(20, 400)), fy=float(rng.uniform(20, 400)),
            cx=float(rng.uniform(0, w - 1)), cy=float(rng.uniform(0, h - 1)),
            width=w, height=h,
        )
        depth = DepthMap(rng.uniform(0.2, 5.0, (h, w)), rng.random((h, w)) < 0.7)
        p = unproject(depth, k)
        if depth.n_masked == 0:
            continue
        pix = project_points(p.points[depth.mask], k)
        jj, ii = np.nonzero(depth.mask)
        worst = max(worst, float(np.abs(pix - np.stack([ii, jj], 1)).max()))
    return worst < 1e-9, f"max reprojection error {worst:.2e} px"


def _check_metrics(rng) -> tuple[bool, str]:
    worst = 0.0
    for _ in range(20):
        x = PointCloud(rng.normal(size=(int(rng.integers(5, 400)), 3)))
        y = PointCloud(rng.normal(size=(int(rng.integers(5, 400)), 3)))
        d = cdist(x.points, y.points)
        cd_brute = 0.5 * d.min(axis=1).mean() + 0.5 * d.min(axis=0).mean()
        worst = max(worst, abs(chamfer(x, y) - cd_brute))
        thr = float(rng.uniform(0.05, 1.0))
        entry = fscore(x, y, thr)
        p_brute = float(np.mean(d.min(axis=1) <= thr))
        r_brute = float(np.mean(d.min(axis=0) <= thr))
        worst = max(worst, abs(entry.precision - p_brute), abs(entry.recall - r_brute))
    return worst < 1e-12, f"max |accelerated - brute force| = {worst:.2e}"


def _check_marching_cubes(_rng) -> tuple[bool, str]:
    grid = grid_sample(SphereSdf(0.5), (49, 49, 49), ([-1, -1, -1], [1, 1, 1]))
    mesh = marching_cubes(grid)
    cell = 2.0 / 48.0
    dev = float(np.abs(np.linalg.norm(mesh.vertices, axis=1) - 0.5).max())
    inside = inside_mesh(mesh, np.zeros((1, 3)))[0]
    return dev < 2 * cell and bool(inside), f"sphere vertex deviation {dev:.2e} (< 2 cells)"


def _check_sdf(_rng) -> tuple[bool, str]:
    # the cube mesh has an exact closed-form signed distance
    mesh = cube_mesh(1.0)
    grid = sdf_from_mesh(mesh, resolution=(16, 16, 16), bounds=([-0.9] * 3, [0.9] * 3))
    pts = grid.lattice_points()
    q = np.abs(pts) - 0.5
    outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
    inside = np.minimum(q.max(axis=1), 0.0)
    analytic = outside + inside
    err = float(np.abs(grid.values.reshape(-1) - analytic).max())
    return err < 1e-9, f"max |engine - closed-form box sdf| = {err:.2e}"


def _check_alignment(rng) -> tuple[bool, str]:
    cfg = AlignmentConfig(refine_icp=True, seed=3)
    grid = cfg.rotation_grid()
    worst = np.inf
    ok = True
    for _ in range(3):
        cloud = PointCloud(rng.uniform(-1, 1, size=(300, 3)))
        planted = grid[int(rng.integers(len(grid)))]
        pred = apply_transform(cloud, RigidTransform(planted.T, np.zeros(3)))
        res = align_frames(pred, cloud, cfg)
        ok &= res.aligned_cd < 1e-9
        worst = min(worst, res.aligned_cd)
    return bool(ok), f"planted rotations recovered, cd {worst:.1e}"


def _check_losses(rng) -> tuple[bool, str]:
    h, w = 6, 7
    mask = rng.random((h, w)) < 0.8
    mask.flat[:2] = True
    gt = DepthMap(rng.uniform(1, 3, (h, w)), mask)
    pred = DepthMap(3.0 * gt.values + 7.0, mask)
    affine = ssimae_depth_loss(pred, gt).value

    k = CameraIntrinsics(fx=80.0, fy=90.0, cx=3.0, cy=2.5, width=w, height=h)
    d2 = DepthMap(rng.uniform(1, 3, (h, w)), mask)
    gt_map = unproject(DepthMap(rng.uniform(1, 3, (h, w)), mask), k)
    loss = projection_loss_depth_intrinsics(d2, k, gt_map)
    eps = 1e-5
    kp = CameraIntrinsics(fx=k.fx + eps, fy=k.fy, cx=k.cx, cy=k.cy, width=w, height=h)
    km = CameraIntrinsics(fx=k.fx - eps, fy=k.fy, cx=k.cx, cy=k.cy, width=w, height=h)
    fd_fx = (
        projection_loss_depth_intrinsics(d2, kp, gt_map).value
        - projection_loss_depth_intrinsics(d2, km, gt_map).value
    ) / (2 * eps)
    rel_fx = abs(loss.gradients["fx"] - fd_fx) / max(abs(fd_fx), 1e-12)

    p = rng.uniform(0.05, 0.95, 50)
    y = (rng.random(50) < 0.5).astype(float)
    bce = occupancy_bce(p, y, with_gradients=True)
    j = 7
    pp, pm = p.copy(), p.copy()
    pp[j] += 1e-6
    pm[j] -= 1e-6
    fd = (occupancy_bce(pp, y).value - occupancy_bce(pm, y).value) / 2e-6
    rel_bce = abs(bce.gradients["prob"][j] - fd) / max(abs(fd), 1e-12)
    ok = affine < 1e-9 and rel_fx < 1e-4 and rel_bce < 1e-4
    return ok, f"affine inv {affine:.1e}, FD rel err fx {rel_fx:.1e}, bce {rel_bce:.1e}"


def _check_sampling(rng) -> tuple[bool, str]:
    mesh = icosphere_mesh(1.0, 2)
    a = sample_surface(mesh, 5000, seed=11)
    b = sample_surface(mesh, 5000, seed=11)
    identical = np.array_equal(a.points, b.points)
    radial = np.abs(np.linalg.norm(a.points, axis=1) - 1.0).max()
    return identical and radial < 0.02, f"deterministic, radial dev {radial:.3f}"


SUITES = (
    ("unprojection round trip", _check_unprojection),
    ("metric brute-force oracle", _check_metrics),
    ("marching cubes fidelity", _check_marching_cubes),
    ("mesh sdf signed distance", _check_sdf),
    ("alignment planted rotations", _check_alignment),
    ("loss gradients + invariance", _check_losses),
    ("surface sampling", _check_sampling),
)


def run_selftest(seed: int = 0) -> int:
    rng = np.random.default_rng(seed)
    failures = 0
    for name, fn in SUITES:
        start = time.perf_counter()
        try:
            ok, detail = fn(rng)
        except Exception as exc:  # noqa: BLE001
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        failures += not ok
        status = "PASS" if ok else "FAIL"
        print(f"[{status}] {name}: {detail} ({time.perf_counter() - start:.2f}s)")
    print(f"{len(SUITES) - failures}/{len(SUITES)} suites passed")
    return 1 if failures else 0
