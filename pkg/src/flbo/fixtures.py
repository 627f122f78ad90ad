"""Procedural test meshes.

These are the bundled fixtures the CLI accepts as ``fixture:<name>``; all are
generated deterministically so no data files are needed.
"""

from __future__ import annotations

import re

import numpy as np

from .exceptions import MeshError
from .mesh import TriangleMesh


def icosahedron():
    t = (1.0 + np.sqrt(5.0)) / 2.0
    v = np.array(
        [
            [-1, t, 0], [1, t, 0], [-1, -t, 0], [1, -t, 0],
            [0, -1, t], [0, 1, t], [0, -1, -t], [0, 1, -t],
            [t, 0, -1], [t, 0, 1], [-t, 0, -1], [-t, 0, 1],
        ],
        dtype=float,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere(level=3, radius=1.0):
    """Subdivided icosahedron on a sphere: ``10 * 4**level + 2`` vertices."""
    v, f = icosahedron()
    verts = list(v)
    for _ in range(level):
        cache = {}

        def midpoint(a, b):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                p = verts[a] + verts[b]
                verts.append(p / np.linalg.norm(p))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in f:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]
        f = np.array(new)
    return TriangleMesh(radius * np.array(verts), f)


def grid(nx=10, ny=10, length=1.0, width=1.0, alternate=True):
    """Flat rectangle ``[0, length] x [0, width]`` in the plane ``z = 0``."""
    xs = np.linspace(0.0, length, nx + 1)
    ys = np.linspace(0.0, width, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    v = np.column_stack([X.ravel(), Y.ravel(), np.zeros(X.size)])
    idx = np.arange(v.shape[0]).reshape(nx + 1, ny + 1)
    faces = []
    for i in range(nx):
        for j in range(ny):
            a, b, c, d = idx[i, j], idx[i + 1, j], idx[i + 1, j + 1], idx[i, j + 1]
            if alternate and (i + j) % 2:
                faces += [[a, b, d], [b, c, d]]
            else:
                faces += [[a, b, c], [a, c, d]]
    return TriangleMesh(v, faces)


def flat_strip(nx=40, ny=8, length=4.0, width=1.0):
    return grid(nx, ny, length, width)


def two_triangle_square():
    return TriangleMesh([[0, 0, 0], [1, 0, 0], [1, 1, 0], [0, 1, 0]], [[0, 1, 2], [0, 2, 3]])


def equilateral_pair():
    """Two unit equilateral triangles sharing the edge (0, 1)."""
    h = np.sqrt(3.0) / 2.0
    return TriangleMesh(
        [[0, 0, 0], [1, 0, 0], [0.5, h, 0], [0.5, -h, 0]], [[0, 1, 2], [1, 0, 3]]
    )


def single_triangle():
    h = np.sqrt(3.0) / 2.0
    return TriangleMesh([[0, 0, 0], [1, 0, 0], [0.5, h, 0]], [[0, 1, 2]])


def regular_tetrahedron():
    v = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    f = [[0, 1, 2], [0, 3, 1], [0, 2, 3], [1, 3, 2]]
    return TriangleMesh(v, f)


def cylinder(n_around=32, n_along=16, radius=1.0, height=2.0):
    """Open cylinder around the z axis, outward normals."""
    phi = 2.0 * np.pi * np.arange(n_around) / n_around
    zs = np.linspace(-height / 2.0, height / 2.0, n_along + 1)
    v = np.array([[radius * np.cos(p), radius * np.sin(p), z] for z in zs for p in phi])
    faces = []
    for k in range(n_along):
        for i in range(n_around):
            a = k * n_around + i
            b = k * n_around + (i + 1) % n_around
            c, d = a + n_around, b + n_around
            faces += [[a, b, d], [a, d, c]]
    return TriangleMesh(v, faces)


def disk(n_rings=12, n_sectors=32, radius=1.0):
    """Flat triangulated unit disk centred at the origin."""
    verts = [[0.0, 0.0, 0.0]]
    faces = []
    for r in range(1, n_rings + 1):
        rho = radius * r / n_rings
        for s in range(n_sectors):
            ang = 2.0 * np.pi * (s + 0.5 * (r % 2)) / n_sectors
            verts.append([rho * np.cos(ang), rho * np.sin(ang), 0.0])

    def ring(r, s):
        return 0 if r == 0 else 1 + (r - 1) * n_sectors + s % n_sectors

    for s in range(n_sectors):
        faces.append([0, ring(1, s), ring(1, s + 1)])
    for r in range(1, n_rings):
        shift = r % 2  # odd rings are rotated by half a sector
        for s in range(n_sectors):
            a, b = ring(r, s), ring(r, s + 1)
            c, d = ring(r + 1, s + shift), ring(r + 1, s + 1 + shift)
            faces += [[a, c, d], [a, d, b]] if shift == 0 else [[a, c, b], [b, c, d]]
    return TriangleMesh(verts, faces)


def ellipsoid(level=3, axes=(1.0, 0.7, 0.5)):
    base = icosphere(level)
    return TriangleMesh(base.vertices * np.asarray(axes), base.faces)


def disjoint_union(*meshes, spacing=3.0):
    verts, faces, offset = [], [], 0
    for i, m in enumerate(meshes):
        verts.append(m.vertices + np.array([spacing * i, 0.0, 0.0]))
        faces.append(m.faces + offset)
        offset += m.n_vertices
    return TriangleMesh(np.vstack(verts), np.vstack(faces))


_FIXTURES = {
    "icosphere": lambda arg: icosphere(int(arg) if arg else 3),
    "strip": lambda arg: flat_strip(),
    "square": lambda arg: two_triangle_square(),
    "equilateral": lambda arg: equilateral_pair(),
    "tetrahedron": lambda arg: regular_tetrahedron(),
    "cylinder": lambda arg: cylinder(),
    "ellipsoid": lambda arg: ellipsoid(int(arg) if arg else 3),
    "disk": lambda arg: disk(),
}


def fixture(name):
    """Look up a fixture by name, e.g. ``icosphere4`` or ``strip``."""
    match = re.fullmatch(r"([a-z]+)(\d*)", name.strip().lower())
    if not match or match.group(1) not in _FIXTURES:
        raise MeshError(f"unknown fixture {name!r}; known: {', '.join(sorted(_FIXTURES))}")
    return _FIXTURES[match.group(1)](match.group(2))


FIXTURE_NAMES = tuple(sorted(_FIXTURES))
