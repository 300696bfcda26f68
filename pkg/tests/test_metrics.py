"""Chamfer, F-score, area-weighted sampling, and the pair protocol."""

import numpy as np
import pytest

from shape_eval.core import PointCloud, RigidTransform, TriangleMesh
from shape_eval.metrics import (
    EvalPairConfig,
    chamfer,
    compute_metrics,
    evaluate_pair,
    fscore,
    sample_surface,
)
from shape_eval.primitives import cube_mesh, icosphere_mesh

import oracles
from conftest import random_rotation


def thin_box_mesh():
    """Elongated sliver: tiny surface area after unit-ball normalization,
    so 10K samples cover it densely and self-evaluation F-scores saturate."""
    base = cube_mesh(1.0)
    return TriangleMesh(base.vertices * np.array([2.0, 0.05, 0.05]), base.faces)


class TestSampleSurface:
    def test_single_triangle_samples_stay_in_plane(self):
        mesh = TriangleMesh(
            np.array([[0, 0, 0], [2, 0, 0], [0, 3, 0]], dtype=float), np.array([[0, 1, 2]])
        )
        pts = sample_surface(mesh, 500, seed=7).points
        assert np.abs(pts[:, 2]).max() < 1e-12
        assert np.all(pts[:, 0] >= -1e-12) and np.all(pts[:, 1] >= -1e-12)
        assert np.all(pts[:, 0] / 2 + pts[:, 1] / 3 <= 1 + 1e-12)

    def test_area_weighting_binomial(self):
        # areas 1 and 3: the big face draws 75% of samples within 3 sigma
        verts = np.array(
            [[0, 0, 0], [2, 0, 0], [0, 1, 0], [10, 0, 0], [10, 3, 0], [10, 0, 2]],
            dtype=float,
        )
        faces = np.array([[0, 1, 2], [3, 4, 5]])
        mesh = TriangleMesh(verts, faces)
        n = 100_000
        pts = sample_surface(mesh, n, seed=3).points
        frac_big = float((pts[:, 0] >= 9.0).mean())
        sigma = np.sqrt(0.75 * 0.25 / n)
        assert abs(frac_big - 0.75) <= 3 * sigma

    def test_cube_faces_uniform(self):
        mesh = cube_mesh(1.0)
        n = 60_000
        pts = sample_surface(mesh, n, seed=11).points
        p = 1.0 / 6.0
        sigma = np.sqrt(p * (1 - p) / n)
        for axis in range(3):
            for side in (-0.5, 0.5):
                frac = float(np.isclose(pts[:, axis], side).mean())
                assert abs(frac - p) <= 3 * sigma

    def test_deterministic_given_seed(self):
        mesh = icosphere_mesh(1.0, 1)
        a = sample_surface(mesh, 1000, seed=5).points
        b = sample_surface(mesh, 1000, seed=5).points
        c = sample_surface(mesh, 1000, seed=6).points
        assert np.array_equal(a, b)
        assert not np.array_equal(a, c)

    def test_empty_mesh_rejected(self):
        empty = TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), int))
        with pytest.raises(ValueError):
            sample_surface(empty, 10, seed=0)


class TestChamfer:
    def test_identity_is_zero(self, rng):
        x = PointCloud(rng.normal(size=(50, 3)))
        assert chamfer(x, x) == 0.0

    def test_single_point_pair(self):
        assert chamfer(PointCloud([[0, 0, 0]]), PointCloud([[1, 0, 0]])) == 1.0

    def test_symmetry(self, rng):
        x = PointCloud(rng.normal(size=(40, 3)))
        y = PointCloud(rng.normal(size=(60, 3)))
        assert chamfer(x, y) == chamfer(y, x)

    def test_brute_force_oracle(self, rng):
        for _ in range(20):
            x = rng.normal(size=(int(rng.integers(2, 50)), 3))
            y = rng.normal(size=(int(rng.integers(2, 50)), 3))
            fast = chamfer(PointCloud(x), PointCloud(y))
            assert abs(fast - oracles.brute_chamfer(x, y)) < 1e-12

    def test_empty_cloud_rejected(self):
        with pytest.raises(ValueError):
            chamfer(PointCloud(np.zeros((0, 3))), PointCloud([[0, 0, 0]]))


class TestFscore:
    def test_identity_is_one(self, rng):
        x = PointCloud(rng.normal(size=(30, 3)))
        for d in (1e-9, 0.5, 10.0):
            assert fscore(x, x, d).fscore == 1.0

    def test_threshold_straddle(self):
        x = PointCloud([[0, 0, 0]])
        y = PointCloud([[1, 0, 0]])
        assert fscore(x, y, 0.5).fscore == 0.0
        assert fscore(x, y, 1.5).fscore == 1.0

    def test_threshold_boundary_inclusive(self):
        x = PointCloud([[0, 0, 0]])
        y = PointCloud([[1, 0, 0]])
        assert fscore(x, y, 1.0).fscore == 1.0

    def test_brute_force_oracle(self, rng):
        for _ in range(20):
            x = rng.normal(size=(int(rng.integers(2, 60)), 3))
            y = rng.normal(size=(int(rng.integers(2, 60)), 3))
            d = float(rng.uniform(0.1, 2.0))
            entry = fscore(PointCloud(x), PointCloud(y), d)
            p, r = oracles.brute_precision_recall(x, y, d)
            assert abs(entry.precision - p) < 1e-12
            assert abs(entry.recall - r) < 1e-12

    def test_monotone_in_threshold(self, rng):
        x = PointCloud(rng.normal(size=(80, 3)))
        y = PointCloud(rng.normal(size=(70, 3)))
        thresholds = np.linspace(0.01, 3.0, 25)
        values = [fscore(x, y, d).fscore for d in thresholds]
        assert np.all(np.diff(values) >= 0)

    def test_non_positive_threshold_rejected(self, rng):
        x = PointCloud(rng.normal(size=(5, 3)))
        with pytest.raises(ValueError):
            fscore(x, x, 0.0)


class TestMetricProperties:
    def test_rigid_invariance(self, rng):
        x = rng.normal(size=(60, 3))
        y = rng.normal(size=(50, 3))
        t = RigidTransform(random_rotation(rng), rng.normal(size=3))
        cd0 = chamfer(PointCloud(x), PointCloud(y))
        cd1 = chamfer(PointCloud(t.apply(x)), PointCloud(t.apply(y)))
        assert abs(cd0 - cd1) < 1e-9
        f0 = fscore(PointCloud(x), PointCloud(y), 0.7)
        f1 = fscore(PointCloud(t.apply(x)), PointCloud(t.apply(y)), 0.7)
        assert f0.precision == pytest.approx(f1.precision, abs=1e-12)

    def test_scaling_maps_cd_and_thresholds(self, rng):
        x = rng.normal(size=(40, 3))
        y = rng.normal(size=(45, 3))
        s = 3.7
        cd0 = chamfer(PointCloud(x), PointCloud(y))
        cd1 = chamfer(PointCloud(s * x), PointCloud(s * y))
        assert cd1 == pytest.approx(s * cd0, rel=1e-12)
        d = 0.42
        f0 = fscore(PointCloud(x), PointCloud(y), d)
        f1 = fscore(PointCloud(s * x), PointCloud(s * y), s * d)
        assert f0.fscore == pytest.approx(f1.fscore, abs=1e-12)

    def test_accelerated_vs_brute_on_2k_clouds(self, rng):
        x = rng.normal(size=(2000, 3))
        y = rng.normal(size=(2000, 3))
        assert abs(chamfer(PointCloud(x), PointCloud(y)) - oracles.brute_chamfer(x, y)) < 1e-12


class TestEvaluatePair:
    def test_identical_meshes_self_evaluation(self):
        mesh = thin_box_mesh()
        result = evaluate_pair(mesh, mesh, EvalPairConfig(seed=4))
        # noise bound: chamfer between two fresh samplings of the same mesh
        a = sample_surface(mesh, 10000, seed=(99, 0)).points
        b = sample_surface(mesh, 10000, seed=(99, 1)).points
        from shape_eval.geometry import NormalizationRecord

        rec = NormalizationRecord.from_points(b)
        noise = oracles.brute_chamfer(rec.normalize(a)[:2000], rec.normalize(b)[:2000])
        assert result.cd < 2 * noise
        assert result.fs[0.01] >= 0.99

    def test_translation_invariance_with_alignment(self):
        from shape_eval.alignment import AlignmentConfig

        mesh = thin_box_mesh()
        moved = TriangleMesh(mesh.vertices + np.array([5.0, 0.0, 0.0]), mesh.faces)
        cfg = EvalPairConfig(seed=4, alignment=AlignmentConfig(subsample=512, seed=1))
        base = evaluate_pair(mesh, mesh, EvalPairConfig(seed=4))
        shifted = evaluate_pair(moved, mesh, cfg)
        assert shifted.fs[0.01] >= base.fs[0.01] - 0.01
        assert shifted.cd <= base.cd * 1.5 + 1e-6

    def test_disjoint_supports_zero_fscore(self):
        a = icosphere_mesh(1.0, 1, center=(0, 0, 0))
        b = icosphere_mesh(1.0, 1, center=(10, 0, 0))
        result = evaluate_pair(a, b, EvalPairConfig(seed=0, normalize_by_gt=False))
        assert result.fs[0.05] == 0.0

    def test_normalization_makes_metrics_size_invariant(self):
        small = icosphere_mesh(0.3, 2)
        large = icosphere_mesh(30.0, 2)
        m_small = evaluate_pair(small, small, EvalPairConfig(seed=1))
        m_large = evaluate_pair(large, large, EvalPairConfig(seed=1))
        assert m_small.cd == pytest.approx(m_large.cd, rel=1e-9)
        assert m_small.fs[0.02] == pytest.approx(m_large.fs[0.02], abs=1e-12)

    def test_compute_metrics_result_fields(self, rng):
        x = PointCloud(rng.normal(size=(100, 3)))
        y = PointCloud(rng.normal(size=(100, 3)))
        m = compute_metrics(x, y, thresholds=(0.1, 0.5, 2.0))
        assert set(m.fs) == {0.1, 0.5, 2.0}
        assert all(m.fs[d] <= m.fs[e] for d, e in ((0.1, 0.5), (0.5, 2.0)))
        assert m.n_points == 100
