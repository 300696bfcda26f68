"""Unprojection unit: Eq.-exact lifting, Jacobians, normalization."""

import numpy as np
import pytest

from shape_eval.core import CameraIntrinsics, DepthMap, PointCloud, ProjectionMap, RigidTransform
from shape_eval.geometry import (
    NormalizationRecord,
    apply_transform,
    normalize_surface,
    project_points,
    unproject,
    unproject_gradients,
)

from conftest import random_depth, random_intrinsics, random_rotation


def full_depth(values):
    values = np.asarray(values, dtype=float)
    return DepthMap(values, np.ones(values.shape, bool))


class TestUnproject:
    def test_identity_intrinsics_center_pixel(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=2, height=2)
        p = unproject(full_depth(np.ones((2, 2))), k)
        assert np.allclose(p.points[0, 0], [0.0, 0.0, 1.0], atol=0)

    def test_direct_substitution(self):
        # pixel (i=75, j=50) at depth 2 under fx=fy=100, cx=cy=50
        k = CameraIntrinsics(fx=100, fy=100, cx=50, cy=50, width=100, height=100)
        values = np.zeros((100, 100))
        mask = np.zeros((100, 100), bool)
        values[50, 75] = 2.0
        mask[50, 75] = True
        p = unproject(DepthMap(values, mask), k)
        assert np.array_equal(p.points[50, 75], [0.5, 0.0, 2.0])

    def test_projection_round_trip_oracle(self, rng):
        for _ in range(30):
            k = random_intrinsics(rng)
            depth = random_depth(rng, k)
            if depth.n_masked == 0:
                continue
            p = unproject(depth, k)
            pix = project_points(p.points[depth.mask], k)
            jj, ii = np.nonzero(depth.mask)
            assert np.abs(pix - np.stack([ii, jj], axis=1)).max() < 1e-9

    def test_depth_linearity_exact(self, rng):
        k = random_intrinsics(rng)
        depth = random_depth(rng, k)
        doubled = DepthMap(2.0 * depth.values, depth.mask)
        a = unproject(depth, k).points
        b = unproject(doubled, k).points
        assert np.array_equal(2.0 * a, b)

    def test_mask_copied_and_sentinel_zero(self, rng):
        k = random_intrinsics(rng)
        depth = random_depth(rng, k, fill=0.3)
        p = unproject(depth, k)
        assert np.array_equal(p.mask, depth.mask)
        assert np.all(p.points[~p.mask] == 0.0)

    def test_dimension_mismatch_rejected(self):
        k = CameraIntrinsics(fx=10, fy=10, cx=2, cy=2, width=6, height=5)
        with pytest.raises(ValueError):
            unproject(full_depth(np.ones((6, 6))), k)

    def test_intrinsics_skew_scales_x_extent(self):
        # fronto-parallel plane unprojected with alpha*fx shrinks x by 1/alpha
        w, h = 32, 24
        k = CameraIntrinsics(fx=60, fy=60, cx=15.5, cy=11.5, width=w, height=h)
        plane = full_depth(np.full((h, w), 3.0))
        base = unproject(plane, k).points
        for alpha in (0.5, 2.0):
            skewed_k = CameraIntrinsics(
                fx=alpha * k.fx, fy=k.fy, cx=k.cx, cy=k.cy, width=w, height=h
            )
            skewed = unproject(plane, skewed_k).points
            base_extent = base[..., 0].max() - base[..., 0].min()
            skew_extent = skewed[..., 0].max() - skewed[..., 0].min()
            assert skew_extent / base_extent == pytest.approx(1.0 / alpha, abs=1e-12)
            # y untouched
            assert np.array_equal(skewed[..., 1], base[..., 1])


class TestUnprojectGradients:
    def test_depth_gradient_is_inverse_column(self):
        k = CameraIntrinsics(fx=1, fy=1, cx=0, cy=0, width=3, height=3)
        g = unproject_gradients(full_depth(np.ones((3, 3))), k)
        assert np.array_equal(g.d_depth[0, 0], [0.0, 0.0, 1.0])

    def test_cx_gradient_closed_form(self):
        k = CameraIntrinsics(fx=50, fy=40, cx=3, cy=2, width=8, height=6)
        depth = full_depth(np.full((6, 8), 2.5))
        g = unproject_gradients(depth, k)
        assert np.allclose(g.d_cx[..., 0], -2.5 / 50.0, atol=0)
        assert np.all(g.d_cx[..., 1:] == 0.0)

    def test_all_partials_match_finite_differences(self, rng):
        h_fd = 1e-4
        for _ in range(5):
            k = random_intrinsics(rng, width=9, height=7)
            depth = random_depth(rng, k, fill=0.8)
            if depth.n_masked == 0:
                continue
            g = unproject_gradients(depth, k)

            # depth partial at one masked pixel
            jj, ii = np.nonzero(depth.mask)
            j, i = int(jj[0]), int(ii[0])
            vp, vm = depth.values.copy(), depth.values.copy()
            vp[j, i] += h_fd
            vm[j, i] -= h_fd
            fd = (
                unproject(DepthMap(vp, depth.mask), k).points[j, i]
                - unproject(DepthMap(vm, depth.mask), k).points[j, i]
            ) / (2 * h_fd)
            assert np.abs(fd - g.d_depth[j, i]).max() <= 1e-5 * max(1.0, np.abs(fd).max())

            # intrinsics partials over the whole masked grid
            for name, grad in (("fx", g.d_fx), ("fy", g.d_fy), ("cx", g.d_cx), ("cy", g.d_cy)):
                kw = {f: getattr(k, f) for f in ("fx", "fy", "cx", "cy")}
                kp, km = dict(kw), dict(kw)
                kp[name] += h_fd
                km[name] -= h_fd
                pp = unproject(depth, CameraIntrinsics(**kp, width=k.width, height=k.height))
                pm = unproject(depth, CameraIntrinsics(**km, width=k.width, height=k.height))
                fd = (pp.points - pm.points) / (2 * h_fd)
                denom = max(1.0, np.abs(fd[depth.mask]).max())
                assert np.abs((fd - grad)[depth.mask]).max() <= 1e-5 * denom


class TestNormalizeSurface:
    def _pmap(self, points):
        pts = np.asarray(points, dtype=float).reshape(1, -1, 3)
        return ProjectionMap(pts, np.ones(pts.shape[:2], bool))

    def test_already_normalized_is_fixed_point(self):
        pts = np.array([[1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0]], dtype=float)
        _, rec = normalize_surface(self._pmap(pts))
        assert np.abs(rec.centroid).max() < 1e-12
        assert rec.scale == pytest.approx(1.0, abs=1e-12)

    def test_symmetric_pair_scaled_by_five(self):
        pts = np.array([[5, 0, 0], [-5, 0, 0], [5, 0, 0], [-5, 0, 0]], dtype=float)
        _, rec = normalize_surface(self._pmap(pts))
        assert np.abs(rec.centroid).max() < 1e-12
        assert rec.scale == pytest.approx(1.0 / 5.0, abs=1e-12)

    def test_round_trip_and_postconditions(self, rng):
        for _ in range(10):
            k = random_intrinsics(rng)
            depth = random_depth(rng, k)
            if depth.n_masked < 3:
                continue
            surface = unproject(depth, k)
            normalized, rec = normalize_surface(surface)
            masked = normalized.masked_points()
            assert np.abs(masked.mean(axis=0)).max() < 1e-9
            assert abs(np.linalg.norm(masked, axis=1).max() - 1.0) < 1e-9
            restored = rec.denormalize(masked)
            assert np.abs(restored - surface.masked_points()).max() < 1e-9

    def test_idempotence(self, rng):
        pts = rng.normal(size=(1, 50, 3))
        normalized, _ = normalize_surface(ProjectionMap(pts, np.ones((1, 50), bool)))
        again, rec2 = normalize_surface(normalized)
        assert np.abs(rec2.centroid).max() < 1e-9
        assert rec2.scale == pytest.approx(1.0, abs=1e-9)
        assert np.abs(again.points - normalized.points).max() < 1e-9

    def test_too_few_masked_pixels_rejected(self):
        pts = np.zeros((1, 2, 3))
        with pytest.raises(ValueError):
            normalize_surface(ProjectionMap(pts, np.ones((1, 2), bool)))

    def test_degenerate_coincident_points_rejected(self):
        pts = np.ones((1, 5, 3))
        with pytest.raises(ValueError):
            normalize_surface(ProjectionMap(pts, np.ones((1, 5), bool)))


class TestApplyTransform:
    def test_identity(self, rng):
        cloud = PointCloud(rng.normal(size=(10, 3)))
        out = apply_transform(cloud, RigidTransform.identity())
        assert np.array_equal(out.points, cloud.points)

    def test_quarter_turn_about_z(self):
        rot = np.array([[0.0, -1.0, 0.0], [1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
        out = apply_transform(
            PointCloud([[1.0, 0.0, 0.0]]), RigidTransform(rot, np.zeros(3))
        )
        assert np.abs(out.points[0] - [0.0, 1.0, 0.0]).max() < 1e-15

    def test_composition_law(self, rng):
        cloud = PointCloud(rng.normal(size=(25, 3)))
        t1 = RigidTransform(random_rotation(rng), rng.normal(size=3), 1.3)
        t2 = RigidTransform(random_rotation(rng), rng.normal(size=3), 0.6)
        once = apply_transform(cloud, t2.compose(t1))
        twice = apply_transform(apply_transform(cloud, t1), t2)
        assert np.abs(once.points - twice.points).max() < 1e-12

    def test_distances_scale_exactly(self, rng):
        cloud = PointCloud(rng.normal(size=(12, 3)))
        t = RigidTransform(random_rotation(rng), rng.normal(size=3), 2.0)
        out = apply_transform(cloud, t)
        d_in = np.linalg.norm(cloud.points[:, None] - cloud.points[None], axis=-1)
        d_out = np.linalg.norm(out.points[:, None] - out.points[None], axis=-1)
        assert np.abs(d_out - 2.0 * d_in).max() < 1e-9
