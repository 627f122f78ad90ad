"""Differential quantities on triangle meshes.

Opposite angles and edge unit vectors for cotangent-type weights, per-face
principal curvature frames, and the piecewise-linear gradient.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .kernels import scatter_faces_to_vertices
from .mesh import check_vertex_field

UMBILIC_RTOL = 1e-6


@dataclass(frozen=True)
class EdgeAngles:
    """Per-edge opposite angles and unit vectors.

    For edge ``(i, j)`` with adjacent faces ``ijk`` (``face_k``) and ``ijh``
    (``face_h``), ``angle_k`` is the interior angle at ``k`` and ``e_kj``,
    ``e_ki`` are unit vectors from ``k`` towards ``j`` and ``i``. The ``h``
    entries are NaN (and ``face_h == -1``) on boundary edges.
    """

    edges: np.ndarray
    face_k: np.ndarray
    face_h: np.ndarray
    vertex_k: np.ndarray
    vertex_h: np.ndarray
    angle_k: np.ndarray
    angle_h: np.ndarray
    e_kj: np.ndarray
    e_ki: np.ndarray
    e_hj: np.ndarray
    e_hi: np.ndarray

    @property
    def is_boundary(self):
        return self.face_h < 0


def _unit(x):
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _opposite_vertex(mesh, faces, edges):
    f = mesh.faces[faces]
    mask = (f != edges[:, [0]]) & (f != edges[:, [1]])
    return f[mask]


def edge_opposite_angles(mesh):
    """Opposite angles and unit vectors for every edge (see :class:`EdgeAngles`)."""
    edges = mesh.edges
    ef = mesh.edge_faces
    v = mesh.vertices
    i, j = edges[:, 0], edges[:, 1]

    k = _opposite_vertex(mesh, ef[:, 0], edges)
    e_kj = _unit(v[j] - v[k])
    e_ki = _unit(v[i] - v[k])
    angle_k = np.arctan2(np.linalg.norm(np.cross(e_kj, e_ki), axis=1), np.einsum("ij,ij->i", e_kj, e_ki))

    interior = ef[:, 1] >= 0
    h = np.full(len(edges), -1, dtype=np.int64)
    e_hj = np.full((len(edges), 3), np.nan)
    e_hi = np.full((len(edges), 3), np.nan)
    angle_h = np.full(len(edges), np.nan)
    if interior.any():
        h[interior] = _opposite_vertex(mesh, ef[interior, 1], edges[interior])
        hi = h[interior]
        e_hj[interior] = _unit(v[j[interior]] - v[hi])
        e_hi[interior] = _unit(v[i[interior]] - v[hi])
        angle_h[interior] = np.arctan2(
            np.linalg.norm(np.cross(e_hj[interior], e_hi[interior]), axis=1),
            np.einsum("ij,ij->i", e_hj[interior], e_hi[interior]),
        )
    return EdgeAngles(
        edges=edges, face_k=ef[:, 0], face_h=ef[:, 1], vertex_k=k, vertex_h=h,
        angle_k=angle_k, angle_h=angle_h, e_kj=e_kj, e_ki=e_ki, e_hj=e_hj, e_hi=e_hi,
    )


# ------------------------------------------------------------------ frames


@dataclass(frozen=True)
class FaceFrames:
    """Per-face orthonormal frames ``U = (u_max, u_min, normal)``.

    ``umbilic`` marks faces where the two principal curvatures tie and the
    first-edge rule was used; ``isolated`` marks faces with no edge neighbour.
    """

    u_max: np.ndarray
    u_min: np.ndarray
    normal: np.ndarray
    kappa_max: np.ndarray
    kappa_min: np.ndarray
    umbilic: np.ndarray
    isolated: np.ndarray

    def __len__(self):
        return len(self.normal)

    def as_matrices(self):
        """``(F, 3, 3)`` array with columns ``u_max, u_min, normal``."""
        return np.stack([self.u_max, self.u_min, self.normal], axis=2)

    def __getitem__(self, f):
        return self.as_matrices()[f]


def signed_dihedral_angles(mesh):
    """Bending angle across each interior edge, zero on boundary edges.

    Positive where the surface is convex with respect to its normals.
    """
    ef = mesh.edge_faces
    interior = ef[:, 1] >= 0
    beta = np.zeros(len(ef))
    if not interior.any():
        return beta
    n0 = mesh.face_normals[ef[interior, 0]]
    n1 = mesh.face_normals[ef[interior, 1]]
    e = mesh.vertices[mesh.edges[interior, 1]] - mesh.vertices[mesh.edges[interior, 0]]
    e = _unit(e)
    ang = np.arctan2(np.einsum("ij,ij->i", np.cross(n0, n1), e), np.einsum("ij,ij->i", n0, n1))
    # orientation of e relative to face 0 decides the sign convention
    f0 = mesh.faces[ef[interior, 0]]
    i = mesh.edges[interior, 0]
    j = mesh.edges[interior, 1]
    pos_i = np.argmax(f0 == i[:, None], axis=1)
    forward = f0[np.arange(len(f0)), (pos_i + 1) % 3] == j
    beta[interior] = np.where(forward, ang, -ang)
    return beta


def curvature_tensors(mesh, backend=None):
    """Per-face normal-cycle curvature tensors and per-vertex ones.

    Each interior edge carries ``beta * |e| * e e^T``. A vertex sums the
    edges of its one-ring (incident edges in full, link edges by half) over
    the one-ring area; a face averages its three corner tensors weighted by
    one-ring area, so its support is the two-ring.
    """
    beta = signed_dihedral_angles(mesh)
    e = mesh.vertices[mesh.edges[:, 1]] - mesh.vertices[mesh.edges[:, 0]]
    length = np.linalg.norm(e, axis=1)
    unit = e / length[:, None]
    edge_t = (beta * length)[:, None, None] * np.einsum("ei,ej->eij", unit, unit)
    face_sum = edge_t[mesh.face_edges].sum(axis=1)
    vert_num = 0.5 * scatter_faces_to_vertices(mesh.faces, face_sum, mesh.n_vertices, backend=backend)
    star_area = scatter_faces_to_vertices(mesh.faces, mesh.face_areas, mesh.n_vertices, backend=backend)
    vert_t = vert_num / star_area[:, None, None]
    face_t = vert_num[mesh.faces].sum(axis=1) / star_area[mesh.faces].sum(axis=1)[:, None, None]
    return face_t, vert_t


def estimate_curvature_frames(mesh, backend=None):
    """Principal curvature frames per face.

    The face tensor from :func:`curvature_tensors` is restricted to the face
    plane and diagonalised. In the normal-cycle tensor the eigenvector with
    the larger absolute eigenvalue is the direction of *least* bending, so
    ``u_max`` is taken as the other one. Curvature is ranked by absolute value.
    Ties within ``UMBILIC_RTOL`` fall back to the face's first edge
    ``(v0 -> v1)``. The sign of ``u_max`` is fixed by ``<u_max, v1 - v0> >= 0``.
    """
    face_t, _ = curvature_tensors(mesh, backend=backend)
    p = mesh.vertices[mesh.faces]
    n = np.array(mesh.face_normals)
    t1 = _unit(p[:, 1] - p[:, 0])
    t2 = np.cross(n, t1)
    basis = np.stack([t1, t2], axis=2)  # (F, 3, 2)
    a2 = np.einsum("fia,fij,fjb->fab", basis, face_t, basis)
    a2 = 0.5 * (a2 + np.swapaxes(a2, 1, 2))
    evals, evecs = np.linalg.eigh(a2)
    mag = np.abs(evals)
    big = np.argmax(mag, axis=1)
    small = 1 - big
    idx = np.arange(len(n))
    mag_big = mag[idx, big]
    mag_small = mag[idx, small]
    # tensor units are 1/length; compare against the mesh scale
    flat = mag_big * mesh.bbox_diagonal <= 1e-10
    umbilic = flat | (mag_big - mag_small <= UMBILIC_RTOL * mag_big)

    coeff = evecs[idx, :, small]  # 2-D coords of u_max in (t1, t2)
    coeff = np.where(umbilic[:, None], np.array([1.0, 0.0]), coeff)
    flip = (coeff[:, 0] < 0) | ((coeff[:, 0] == 0) & (coeff[:, 1] < 0))
    coeff = np.where(flip[:, None], -coeff, coeff)
    u_max = _unit(np.einsum("fia,fa->fi", basis, coeff))
    u_min = np.cross(n, u_max)

    isolated = (mesh.edge_faces[mesh.face_edges][:, :, 1] < 0).all(axis=1)
    return FaceFrames(
        u_max=u_max, u_min=u_min, normal=n,
        kappa_max=mag_big, kappa_min=mag_small,
        umbilic=umbilic, isolated=isolated,
    )


def write_frames_csv(frames, path):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["face_id", "u_max_x", "u_max_y", "u_max_z", "u_min_x", "u_min_y", "u_min_z",
             "normal_x", "normal_y", "normal_z"]
        )
        for f in range(len(frames)):
            row = np.concatenate([frames.u_max[f], frames.u_min[f], frames.normal[f]])
            w.writerow([f] + [repr(float(x)) for x in row])
    os.replace(tmp, path)


# ---------------------------------------------------------------- gradient


def basis_gradients(mesh):
    """Gradient of each corner's hat function on its face, shape ``(F, 3, 3)``.

    For corner ``c`` this is ``n x (p_{c+2} - p_{c+1}) / (2 A)``.
    """
    p = mesh.vertices[mesh.faces]
    n = mesh.face_normals
    two_a = 2.0 * mesh.face_areas[:, None]
    out = np.empty(p.shape)
    for c in range(3):
        opp = p[:, (c + 2) % 3] - p[:, (c + 1) % 3]
        out[:, c] = np.cross(n, opp) / two_a
    return out


def face_gradient(mesh, f):
    """Exact gradient of the piecewise-linear interpolant of ``f`` per face."""
    f = check_vertex_field(mesh, f)
    return np.einsum("fc,fci->fi", f[mesh.faces], basis_gradients(mesh))
