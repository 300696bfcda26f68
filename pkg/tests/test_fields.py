"""Field machinery: grid sampling, winding-number inside test, mesh SDF."""

import numpy as np
import pytest

from shape_eval.core import CallableField, PointCloud, VoxelGrid
from shape_eval.fields import (
    NonWatertightMeshError,
    grid_sample,
    inside_mesh,
    occupancy_from_sdf,
    sdf_from_mesh,
    winding_numbers,
)
from shape_eval.core import TriangleMesh
from shape_eval.primitives import (
    ConstantField,
    SphereOccupancy,
    SphereSdf,
    cube_mesh,
    icosphere_mesh,
    uv_sphere_mesh,
)

import oracles

UNIT_BOUNDS = ([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])


class TestGridSample:
    def test_constant_zero_field(self):
        g = grid_sample(ConstantField(0.0, kind="sdf"), (4, 4, 4), UNIT_BOUNDS)
        assert np.all(g.values == 0.0)

    def test_linear_field_lattice_values(self):
        g = grid_sample(CallableField(lambda p: p[:, 0], "sdf"), (3, 3, 3), UNIT_BOUNDS)
        for xi, expected in enumerate((-1.0, 0.0, 1.0)):
            assert np.all(g.values[xi] == expected)

    def test_sphere_occupancy_count_matches_lattice_oracle(self):
        # oracle: count lattice points inside the analytic ball directly
        n = 32
        g = grid_sample(SphereOccupancy(0.5), (n, n, n), UNIT_BOUNDS)
        axis = np.linspace(-1, 1, n)
        gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
        oracle_count = int((gx**2 + gy**2 + gz**2 <= 0.25).sum())
        assert int(g.values.sum()) == oracle_count

    def test_sphere_occupied_volume_fraction(self):
        # occupied lattice cells approximate the ball volume; at 64^3 the
        # cell-measure estimate sits well inside 2% of (4/3) pi r^3
        n = 64
        g = grid_sample(SphereOccupancy(0.5), (n, n, n), UNIT_BOUNDS)
        cell = (2.0 / (n - 1)) ** 3
        volume = g.values.sum() * cell
        exact = 4.0 / 3.0 * np.pi * 0.5**3
        assert abs(volume - exact) / exact < 0.02

    def test_non_finite_field_rejected(self):
        bad = CallableField(lambda p: np.full(len(p), np.nan), "sdf")
        with pytest.raises(ValueError):
            grid_sample(bad, (3, 3, 3), UNIT_BOUNDS)

    def test_occupancy_range_enforced(self):
        bad = CallableField(lambda p: np.full(len(p), 1.5), "occupancy")
        with pytest.raises(ValueError):
            grid_sample(bad, (3, 3, 3), UNIT_BOUNDS)


class TestInsideMesh:
    def test_cube_center_inside(self):
        assert inside_mesh(cube_mesh(1.0), np.zeros((1, 3)))[0]

    def test_far_point_outside_icosphere(self):
        assert not inside_mesh(icosphere_mesh(1.0, 2), np.array([[2.0, 0.0, 0.0]]))[0]

    def test_thousand_random_points_vs_ray_parity_oracle(self, rng):
        mesh = icosphere_mesh(0.8, 2, center=(0.05, -0.03, 0.08))
        pts = rng.uniform(-1.2, 1.2, (1000, 3))
        labels = inside_mesh(mesh, PointCloud(pts))
        oracle = oracles.inside_by_ray_parity(mesh, pts, rng)
        # agreement outside a thin boundary band
        dist = oracles.closest_distance_brute(mesh, pts)
        compare = dist > 1e-6
        assert np.array_equal(labels[compare], oracle[compare])

    def test_winding_number_is_integer_off_surface(self, rng):
        mesh = cube_mesh(1.0)
        pts = rng.uniform(-0.45, 0.45, (50, 3))
        w = winding_numbers(mesh, pts)
        assert np.abs(w - 1.0).max() < 1e-9


class TestSdfFromMesh:
    def test_cube_center_value(self):
        g = sdf_from_mesh(cube_mesh(1.0), resolution=(3, 3, 3), bounds=([-0.2] * 3, [0.2] * 3))
        center = g.values[1, 1, 1]
        assert center == pytest.approx(-0.5, abs=1e-12)

    def test_far_exterior_point_positive(self):
        mesh = cube_mesh(1.0)
        g = sdf_from_mesh(mesh, resolution=(2, 2, 2), bounds=([2.0] * 3, [3.0] * 3),
                          check_watertight=False)
        # corner (2,2,2) sits sqrt(3*1.5^2) from the cube corner (.5,.5,.5)
        assert g.values[0, 0, 0] == pytest.approx(np.sqrt(3 * 1.5**2), abs=1e-12)
        assert np.all(g.values > 0)

    def test_32_grid_matches_brute_force_oracle(self, rng):
        # 500-face sphere: all-triangles distance + ray-parity sign, 1e-9
        mesh = uv_sphere_mesh(0.62, segments=25, rings=11, center=(0.03, -0.02, 0.05))
        assert mesh.n_faces == 500
        grid = sdf_from_mesh(mesh, resolution=(32, 32, 32), bounds=UNIT_BOUNDS)
        pts = grid.lattice_points()
        oracle = oracles.signed_distance_brute(mesh, pts, rng)
        assert np.abs(grid.values.reshape(-1) - oracle).max() < 1e-9

    def test_rigid_motion_symmetry(self, rng):
        from conftest import random_rotation
        from shape_eval.core import RigidTransform, TriangleMesh

        mesh = icosphere_mesh(0.5, 1)
        t = RigidTransform(random_rotation(rng), rng.normal(size=3) * 0.2)
        moved = TriangleMesh(t.apply(mesh.vertices), mesh.faces)
        base = sdf_from_mesh(mesh, resolution=(8, 8, 8), bounds=([-0.8] * 3, [0.8] * 3))
        pts = base.lattice_points()
        moved_vals = np.empty(len(pts))
        from shape_eval.bvh import build_bvh, closest_distances
        from shape_eval.fields import winding_numbers as wn

        moved_pts = t.apply(pts)
        dist = closest_distances(build_bvh(moved.vertices, moved.faces), moved_pts)
        sign = np.where(wn(moved, moved_pts) > 0.5, -1.0, 1.0)
        moved_vals = sign * dist
        assert np.abs(base.values.reshape(-1) - moved_vals).max() < 1e-9

    def test_non_watertight_mesh_reported(self):
        mesh = cube_mesh(1.0)
        open_mesh = TriangleMesh(mesh.vertices, mesh.faces[:-4])  # drop two sides
        with pytest.raises(NonWatertightMeshError):
            sdf_from_mesh(open_mesh, resolution=(8, 8, 8), bounds=UNIT_BOUNDS)

    def test_default_resolution_is_32(self):
        g = sdf_from_mesh(icosphere_mesh(0.4, 0))
        assert g.resolution == (32, 32, 32)


class TestOccupancyFromSdf:
    def test_all_positive_gives_empty_occupancy(self):
        g = VoxelGrid((3, 3, 3), UNIT_BOUNDS, np.ones((3, 3, 3)), "sdf")
        assert np.all(occupancy_from_sdf(g).values == 0.0)

    def test_sign_flip_flips_occupancy(self, rng):
        vals = rng.normal(size=(4, 4, 4))
        g = VoxelGrid((4, 4, 4), UNIT_BOUNDS, vals, "sdf")
        flipped = VoxelGrid((4, 4, 4), UNIT_BOUNDS, -vals, "sdf")
        a = occupancy_from_sdf(g).values
        b = occupancy_from_sdf(flipped).values
        boundary = vals == 0.0
        assert np.array_equal(a[~boundary] == 1.0, b[~boundary] == 0.0)

    def test_sphere_occupancy_count_equals_lattice_count(self):
        n = 24
        g = grid_sample(SphereSdf(0.5), (n, n, n), UNIT_BOUNDS)
        occ = occupancy_from_sdf(g)
        axis = np.linspace(-1, 1, n)
        gx, gy, gz = np.meshgrid(axis, axis, axis, indexing="ij")
        oracle = int((np.sqrt(gx**2 + gy**2 + gz**2) <= 0.5).sum())
        assert int(occ.values.sum()) == oracle

    def test_requires_sdf_kind(self):
        g = VoxelGrid((3, 3, 3), UNIT_BOUNDS, np.zeros((3, 3, 3)), "occupancy")
        with pytest.raises(ValueError):
            occupancy_from_sdf(g)
