"""Training losses: invariances, hand-built oracles, gradient checks."""

import numpy as np
import pytest

from shape_eval.core import CameraIntrinsics, DepthMap, ProjectionMap
from shape_eval.geometry import unproject
from shape_eval.losses import (
    BCE_EPS,
    occupancy_bce,
    projection_loss,
    projection_loss_depth_intrinsics,
    ssimae_depth_loss,
)


def depth(values, mask=None):
    values = np.asarray(values, dtype=float)
    if mask is None:
        mask = np.ones(values.shape, bool)
    return DepthMap(values, np.asarray(mask, bool))


class TestSsimaeDepthLoss:
    def test_identical_maps_zero(self, rng):
        d = depth(rng.uniform(1, 5, (6, 6)))
        assert ssimae_depth_loss(d, d).value == 0.0

    def test_affine_map_absorbed(self, rng):
        g = depth(rng.uniform(1, 5, (8, 8)))
        p = depth(3.0 * g.values + 7.0)
        assert ssimae_depth_loss(p, g).value < 1e-9

    def test_affine_invariance_grid(self, rng):
        g = depth(rng.uniform(0.5, 4.0, (10, 10)))
        for a in (0.5, 3.0):
            for b in (-7.0, 7.0):
                vals = a * g.values + b
                vals = vals - vals.min() + 0.1  # keep depths positive
                # shifting by a constant after the affine map is still affine
                assert ssimae_depth_loss(depth(vals), g).value < 1e-9

    def test_hand_built_step_by_step_oracle(self):
        # 4x4 maps; oracle recomputes median/MAD/MAE explicitly
        pred_vals = np.array(
            [
                [1.0, 2.0, 3.0, 4.0],
                [2.5, 1.5, 3.5, 2.0],
                [4.5, 1.2, 2.2, 3.3],
                [1.8, 2.8, 3.8, 4.8],
            ]
        )
        gt_vals = np.array(
            [
                [2.0, 2.1, 2.9, 4.1],
                [2.4, 1.4, 3.6, 2.2],
                [4.4, 1.1, 2.1, 3.1],
                [1.9, 2.9, 3.9, 4.9],
            ]
        )
        mask = np.ones((4, 4), bool)
        mask[0, 0] = False
        mask[3, 3] = False

        def align(v):
            t = np.median(v)
            s = np.mean(np.abs(v - t))
            return (v - t) / max(s, 1e-8)

        p, g = pred_vals[mask], gt_vals[mask]
        expected = float(np.mean(np.abs(align(p) - align(g))))
        got = ssimae_depth_loss(depth(pred_vals, mask), depth(gt_vals, mask)).value
        assert got == pytest.approx(expected, abs=1e-12)

    def test_constant_maps_both_sides_zero_by_convention(self):
        p = depth(np.full((3, 3), 2.0))
        g = depth(np.full((3, 3), 5.0))
        assert ssimae_depth_loss(p, g).value == 0.0

    def test_mask_mismatch_rejected(self, rng):
        a = depth(rng.uniform(1, 2, (4, 4)))
        mask = np.ones((4, 4), bool)
        mask[0, 0] = False
        b = depth(rng.uniform(1, 2, (4, 4)), mask)
        with pytest.raises(ValueError):
            ssimae_depth_loss(a, b)

    def test_too_few_pixels_rejected(self):
        mask = np.zeros((3, 3), bool)
        mask[0, 0] = True
        d = depth(np.ones((3, 3)), mask)
        with pytest.raises(ValueError):
            ssimae_depth_loss(d, d)

    def test_least_squares_alignment_switch(self, rng):
        g = depth(rng.uniform(1, 5, (6, 6)))
        p = depth(0.5 * g.values + 2.0)
        assert ssimae_depth_loss(p, g, alignment="least-squares").value < 1e-9
        with pytest.raises(ValueError):
            ssimae_depth_loss(p, g, alignment="nearest")

    def test_gradient_matches_finite_differences_away_from_ties(self, rng):
        h, w = 5, 5
        for _ in range(10):
            base = rng.uniform(1.0, 4.0, (h, w))
            gt = depth(rng.uniform(1.0, 4.0, (h, w)))
            loss = ssimae_depth_loss(depth(base), gt, with_gradients=True)
            grad = loss.gradients["depth"]
            j, i = int(rng.integers(h)), int(rng.integers(w))
            eps = 1e-7
            vp, vm = base.copy(), base.copy()
            vp[j, i] += eps
            vm[j, i] -= eps
            fd = (
                ssimae_depth_loss(depth(vp), gt).value
                - ssimae_depth_loss(depth(vm), gt).value
            ) / (2 * eps)
            # random continuous inputs keep us away from median ties
            assert grad[j, i] == pytest.approx(fd, rel=1e-4, abs=1e-8)


class TestProjectionLoss:
    def _pmap(self, pts, mask=None):
        pts = np.asarray(pts, dtype=float)
        if mask is None:
            mask = np.ones(pts.shape[:2], bool)
        return ProjectionMap(pts, mask)

    def test_identity_zero(self, rng):
        p = self._pmap(rng.normal(size=(4, 5, 3)))
        assert projection_loss(p, p).value == 0.0

    def test_single_pixel_unit_offset(self):
        mask = np.zeros((3, 3), bool)
        mask[1, 1] = True
        a = np.zeros((3, 3, 3))
        b = np.zeros((3, 3, 3))
        b[1, 1] = [1.0, 0.0, 0.0]
        assert projection_loss(self._pmap(a, mask), self._pmap(b, mask)).value == 1.0

    def test_symmetric_and_zero_iff_identical(self, rng):
        mask = rng.random((6, 6)) < 0.8
        mask[0, 0] = True
        a = self._pmap(rng.normal(size=(6, 6, 3)), mask)
        b = self._pmap(rng.normal(size=(6, 6, 3)), mask)
        assert projection_loss(a, b).value == projection_loss(b, a).value
        assert projection_loss(a, b).value > 0.0

    def test_gradients_match_finite_differences(self, rng):
        w, h = 7, 6
        k = CameraIntrinsics(fx=90.0, fy=75.0, cx=3.0, cy=2.5, width=w, height=h)
        mask = rng.random((h, w)) < 0.8
        mask[0, :2] = True
        d = DepthMap(rng.uniform(0.5, 3.0, (h, w)), mask)
        gt = unproject(DepthMap(rng.uniform(0.5, 3.0, (h, w)), mask), k)
        loss = projection_loss_depth_intrinsics(d, k, gt)
        eps = 1e-5

        # d(loss)/d(depth) at a masked pixel
        jj, ii = np.nonzero(mask)
        j, i = int(jj[3]), int(ii[3])
        vp, vm = d.values.copy(), d.values.copy()
        vp[j, i] += eps
        vm[j, i] -= eps
        fd = (
            projection_loss_depth_intrinsics(DepthMap(vp, mask), k, gt).value
            - projection_loss_depth_intrinsics(DepthMap(vm, mask), k, gt).value
        ) / (2 * eps)
        assert loss.gradients["depth"][j, i] == pytest.approx(fd, rel=1e-4)

        # d(loss)/d(intrinsics)
        for name in ("fx", "fy", "cx", "cy"):
            kw = {f: getattr(k, f) for f in ("fx", "fy", "cx", "cy")}
            kp, km = dict(kw), dict(kw)
            kp[name] += eps
            km[name] -= eps
            fd = (
                projection_loss_depth_intrinsics(d, CameraIntrinsics(**kp, width=w, height=h), gt).value
                - projection_loss_depth_intrinsics(d, CameraIntrinsics(**km, width=w, height=h), gt).value
            ) / (2 * eps)
            assert loss.gradients[name] == pytest.approx(fd, rel=1e-4, abs=1e-10)

    def test_empty_mask_rejected(self):
        empty = np.zeros((2, 2), bool)
        a = self._pmap(np.zeros((2, 2, 3)), empty)
        with pytest.raises(ValueError):
            projection_loss(a, a)


class TestOccupancyBce:
    def test_saturated_correct_predictions(self):
        y = np.array([1.0, 0.0, 1.0])
        p = np.array([1.0, 0.0, 1.0])
        loss = occupancy_bce(p, y).value
        assert loss <= -np.log(1.0 - BCE_EPS) + 1e-15

    def test_maximum_entropy_is_ln2(self):
        p = np.full(16, 0.5)
        y = (np.arange(16) % 2).astype(float)
        assert occupancy_bce(p, y).value == pytest.approx(np.log(2.0), abs=1e-15)

    def test_elementwise_oracle(self, rng):
        p = rng.uniform(0.01, 0.99, 200)
        y = (rng.random(200) < 0.4).astype(float)
        expected = float(np.mean(-(y * np.log(p) + (1 - y) * np.log(1 - p))))
        assert occupancy_bce(p, y).value == pytest.approx(expected, abs=1e-12)

    def test_gradient_matches_finite_differences(self, rng):
        p = rng.uniform(0.05, 0.95, 64)
        y = (rng.random(64) < 0.5).astype(float)
        loss = occupancy_bce(p, y, with_gradients=True)
        for j in (0, 17, 63):
            pp, pm = p.copy(), p.copy()
            pp[j] += 1e-6
            pm[j] -= 1e-6
            fd = (occupancy_bce(pp, y).value - occupancy_bce(pm, y).value) / 2e-6
            assert loss.gradients["prob"][j] == pytest.approx(fd, rel=1e-6)

    def test_non_binary_labels_rejected(self):
        with pytest.raises(ValueError):
            occupancy_bce(np.array([0.5]), np.array([0.3]))

    def test_gradient_formula(self, rng):
        p = rng.uniform(0.1, 0.9, 10)
        y = (rng.random(10) < 0.5).astype(float)
        g = occupancy_bce(p, y, with_gradients=True).gradients["prob"]
        expected = (p - y) / (p * (1 - p)) / 10
        assert np.abs(g - expected).max() < 1e-15
