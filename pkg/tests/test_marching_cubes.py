"""Isosurface extraction: geometric fidelity, topology, orientation."""

import numpy as np
import pytest

from shape_eval.core import CallableField, VoxelGrid
from shape_eval.fields import grid_sample, inside_mesh
from shape_eval.marching_cubes import marching_cubes
from shape_eval.primitives import SphereOccupancy, SphereSdf, TorusSdf

UNIT_BOUNDS = ([-1.0, -1.0, -1.0], [1.0, 1.0, 1.0])


class TestMarchingCubes:
    def test_grid_entirely_below_iso_gives_empty_mesh(self):
        g = VoxelGrid((4, 4, 4), UNIT_BOUNDS, np.full((4, 4, 4), -3.0), "sdf")
        mesh = marching_cubes(g, iso_level=0.0)
        assert mesh.is_empty
        g2 = VoxelGrid((4, 4, 4), UNIT_BOUNDS, np.full((4, 4, 4), 3.0), "sdf")
        assert marching_cubes(g2, iso_level=0.0).is_empty

    def test_mesh_nonempty_iff_cells_straddle(self):
        vals = np.full((3, 3, 3), 1.0)
        vals[0, 0, 0] = -1.0
        g = VoxelGrid((3, 3, 3), UNIT_BOUNDS, vals, "sdf")
        assert not marching_cubes(g).is_empty

    def test_sphere_vertices_within_two_cells(self):
        n = 64
        g = grid_sample(SphereSdf(0.5), (n, n, n), UNIT_BOUNDS)
        mesh = marching_cubes(g, iso_level=0.0)
        cell = 2.0 / (n - 1)
        deviation = np.abs(np.linalg.norm(mesh.vertices, axis=1) - 0.5)
        assert deviation.max() < 2 * cell
        assert mesh.euler_characteristic() == 2

    def test_torus_euler_characteristic_zero(self):
        n = 96
        g = grid_sample(TorusSdf(0.5, 0.25), (n, n, n), UNIT_BOUNDS)
        mesh = marching_cubes(g, iso_level=0.0)
        assert not mesh.is_empty
        assert mesh.euler_characteristic() == 0

    def test_iso_shift_equivalence(self, rng):
        # extracting f at level c equals extracting f - c at level 0
        vals = rng.normal(size=(7, 7, 7))
        c = 0.37
        g1 = VoxelGrid((7, 7, 7), UNIT_BOUNDS, vals, "sdf")
        g2 = VoxelGrid((7, 7, 7), UNIT_BOUNDS, vals - c, "sdf")
        m1 = marching_cubes(g1, iso_level=c)
        m2 = marching_cubes(g2, iso_level=0.0)
        assert m1.n_vertices == m2.n_vertices
        assert np.abs(m1.vertices - m2.vertices).max() < 1e-12
        assert np.array_equal(m1.faces, m2.faces)

    def test_occupancy_default_level_and_orientation(self):
        n = 48
        g = grid_sample(SphereOccupancy(0.5), (n, n, n), UNIT_BOUNDS)
        mesh = marching_cubes(g)  # occupancy default iso = 0.5
        r = np.linalg.norm(mesh.vertices, axis=1)
        cell = 2.0 / (n - 1)
        assert np.abs(r - 0.5).max() < cell  # binary field: half-cell snapping
        # outward orientation: winding number 1 at the center
        assert inside_mesh(mesh, np.zeros((1, 3)))[0]

    def test_sdf_orientation_outward(self):
        g = grid_sample(SphereSdf(0.5), (32, 32, 32), UNIT_BOUNDS)
        mesh = marching_cubes(g)
        assert inside_mesh(mesh, np.zeros((1, 3)))[0]
        assert not inside_mesh(mesh, np.array([[0.9, 0.0, 0.0]]))[0]

    def test_extract_then_test_consistency(self, rng):
        # inside test on the extracted occupancy surface agrees with the
        # analytic ball outside a 2-cell boundary band
        n = 40
        cell = 2.0 / (n - 1)
        g = grid_sample(SphereOccupancy(0.5), (n, n, n), UNIT_BOUNDS)
        mesh = marching_cubes(g)
        pts = rng.uniform(-0.9, 0.9, (400, 3))
        analytic = np.linalg.norm(pts, axis=1) <= 0.5
        band = np.abs(np.linalg.norm(pts, axis=1) - 0.5) < 2 * cell
        labels = inside_mesh(mesh, pts)
        assert np.array_equal(labels[~band], analytic[~band])

    def test_vertices_lie_on_cell_edges(self, rng):
        vals = rng.normal(size=(5, 5, 5))
        g = VoxelGrid((5, 5, 5), UNIT_BOUNDS, vals, "sdf")
        mesh = marching_cubes(g)
        axis = np.linspace(-1, 1, 5)
        # every vertex matches lattice coordinates on at least two axes
        on_axis = np.isclose(mesh.vertices[:, :, None], axis[None, None, :], atol=1e-12).any(axis=2)
        assert np.all(on_axis.sum(axis=1) >= 2)

    def test_welding_shares_vertices_across_cells(self):
        g = grid_sample(SphereSdf(0.5), (16, 16, 16), UNIT_BOUNDS)
        mesh = marching_cubes(g)
        # closed surface: every edge shared by exactly two faces
        f = mesh.faces
        edges = np.sort(np.concatenate([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]]), axis=1)
        _, counts = np.unique(edges, axis=0, return_counts=True)
        assert np.all(counts == 2)
