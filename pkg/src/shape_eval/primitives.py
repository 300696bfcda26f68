"""Procedural meshes and analytic implicit fields.

All meshes are closed and wound outward (generalized winding number 1
inside), which the field/SDF machinery and the tests rely on.
"""

from __future__ import annotations

import numpy as np

from .core import OCCUPANCY, SDF, ScalarField, TriangleMesh


def cube_mesh(side: float = 1.0, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    h = side / 2.0
    c = np.asarray(center, dtype=np.float64)
    corners = np.array(
        [
            [-h, -h, -h], [h, -h, -h], [h, h, -h], [-h, h, -h],
            [-h, -h, h], [h, -h, h], [h, h, h], [-h, h, h],
        ]
    )
    faces = np.array(
        [
            [0, 3, 2], [0, 2, 1],  # bottom (z-)
            [4, 5, 6], [4, 6, 7],  # top (z+)
            [0, 1, 5], [0, 5, 4],  # y-
            [2, 3, 7], [2, 7, 6],  # y+
            [0, 4, 7], [0, 7, 3],  # x-
            [1, 2, 6], [1, 6, 5],  # x+
        ]
    )
    return TriangleMesh(corners + c, faces)


def icosphere_mesh(radius: float = 1.0, subdivisions: int = 2, center=(0.0, 0.0, 0.0)) -> TriangleMesh:
    t = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=np.float64,
    )
    verts /= np.linalg.norm(verts, axis=1, keepdims=True)
    faces = [
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ]
    verts = [v for v in verts]
    for _ in range(subdivisions):
        cache: dict[tuple[int, int], int] = {}

        def midpoint(a: int, b: int) -> int:
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        next_faces = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            next_faces += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = next_faces
    verts = np.array(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


def uv_sphere_mesh(
    radius: float = 1.0, segments: int = 24, rings: int = 12, center=(0.0, 0.0, 0.0)
) -> TriangleMesh:
    """Latitude/longitude sphere with 2 * segments * (rings - 1) faces."""
    if segments < 3 or rings < 2:
        raise ValueError("uv sphere needs segments >= 3 and rings >= 2")
    c = np.asarray(center, dtype=np.float64)
    verts = [np.array([0.0, 0.0, radius])]
    for k in range(1, rings):
        theta = np.pi * k / rings
        for m in range(segments):
            phi = 2.0 * np.pi * m / segments
            verts.append(
                radius * np.array(
                    [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)]
                )
            )
    verts.append(np.array([0.0, 0.0, -radius]))
    south = len(verts) - 1

    def ring(k: int, m: int) -> int:
        return 1 + (k - 1) * segments + (m % segments)

    faces = []
    for m in range(segments):
        faces.append((0, ring(1, m), ring(1, m + 1)))
    for k in range(1, rings - 1):
        for m in range(segments):
            a, b = ring(k, m), ring(k, m + 1)
            d, cc = ring(k + 1, m), ring(k + 1, m + 1)
            faces += [(a, d, cc), (a, cc, b)]
    for m in range(segments):
        faces.append((south, ring(rings - 1, m + 1), ring(rings - 1, m)))
    return TriangleMesh(np.array(verts) + c, np.array(faces, dtype=np.int64))


def torus_mesh(
    major_radius: float = 0.7,
    minor_radius: float = 0.3,
    major_segments: int = 48,
    minor_segments: int = 24,
    center=(0.0, 0.0, 0.0),
) -> TriangleMesh:
    """Torus around the z axis: tube of radius r swept at distance R."""
    if not 0 < minor_radius < major_radius:
        raise ValueError("torus needs 0 < minor_radius < major_radius")
    c = np.asarray(center, dtype=np.float64)
    u = 2.0 * np.pi * np.arange(major_segments) / major_segments
    v = 2.0 * np.pi * np.arange(minor_segments) / minor_segments
    uu, vv = np.meshgrid(u, v, indexing="ij")
    ring_r = major_radius + minor_radius * np.cos(vv)
    verts = np.stack(
        [ring_r * np.cos(uu), ring_r * np.sin(uu), minor_radius * np.sin(vv)], axis=-1
    ).reshape(-1, 3)

    def vid(i: int, j: int) -> int:
        return (i % major_segments) * minor_segments + (j % minor_segments)

    faces = []
    for i in range(major_segments):
        for j in range(minor_segments):
            a, b = vid(i, j), vid(i + 1, j)
            cc, d = vid(i + 1, j + 1), vid(i, j + 1)
            faces += [(a, b, cc), (a, cc, d)]
    return TriangleMesh(verts + c, np.array(faces, dtype=np.int64))


# ---------------------------------------------------------------------------
# analytic fields

class SphereSdf(ScalarField):
    kind = SDF

    def __init__(self, radius: float, center=(0.0, 0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return np.linalg.norm(pts - self.center, axis=1) - self.radius


class SphereOccupancy(ScalarField):
    kind = OCCUPANCY

    def __init__(self, radius: float, center=(0.0, 0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=np.float64)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        inside = np.linalg.norm(pts - self.center, axis=1) <= self.radius
        return inside.astype(np.float64)


class SmoothSphereOccupancy(ScalarField):
    """Sphere occupancy with a linear ramp across the surface.

    The ramp keeps sub-cell surface information that a hard 0/1 field throws
    away, so isosurface extraction can localize the boundary between lattice
    points; the 0.5 level sits exactly on the sphere.
    """

    kind = OCCUPANCY

    def __init__(self, radius: float, ramp: float, center=(0.0, 0.0, 0.0)):
        if not ramp > 0:
            raise ValueError(f"ramp width must be positive, got {ramp}")
        self.radius = float(radius)
        self.ramp = float(ramp)
        self.center = np.asarray(center, dtype=np.float64)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        sdf = np.linalg.norm(pts - self.center, axis=1) - self.radius
        return np.clip(0.5 - sdf / self.ramp, 0.0, 1.0)


class TorusSdf(ScalarField):
    kind = SDF

    def __init__(self, major_radius: float, minor_radius: float, center=(0.0, 0.0, 0.0)):
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)
        self.center = np.asarray(center, dtype=np.float64)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        pts = np.asarray(points, dtype=np.float64).reshape(-1, 3) - self.center
        ring = np.hypot(pts[:, 0], pts[:, 1]) - self.major_radius
        return np.hypot(ring, pts[:, 2]) - self.minor_radius


class ConstantField(ScalarField):
    def __init__(self, value: float, kind: str = OCCUPANCY):
        self.value = float(value)
        self.kind = kind

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.full(np.asarray(points).reshape(-1, 3).shape[0], self.value)
