"""Indexed triangle meshes and OFF/OBJ input/output."""

from __future__ import annotations

import logging
import os
from functools import cached_property
from pathlib import Path

import numpy as np

from .exceptions import MalformedInputError, MeshError

logger = logging.getLogger(__name__)

DEGENERATE_RTOL = 1e-12


class TriangleMesh:
    """Immutable triangle mesh with derived edge adjacency.

    Parameters
    ----------
    vertices : array_like, shape (n, 3)
    faces : array_like of int, shape (m, 3)

    Construction validates index ranges, rejects degenerate faces (area below
    ``1e-12 * diag**2`` where ``diag`` is the bounding-box diagonal), vertices
    not used by any face, non-manifold edges and inconsistent orientation.
    """

    def __init__(self, vertices, faces):
        v = np.array(vertices, dtype=float)
        f = np.array(faces, dtype=np.int64)
        if v.ndim != 2 or v.shape[1] != 3 or len(v) == 0:
            raise MeshError(f"vertices must have shape (n, 3), got {v.shape}")
        if f.ndim != 2 or f.shape[1] != 3 or len(f) == 0:
            raise MeshError(f"faces must have shape (m, 3), got {f.shape}")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.all(np.isfinite(v), axis=1))[0])
            raise MeshError(f"vertex {bad} has non-finite coordinates")
        out = np.flatnonzero((f < 0).any(axis=1) | (f >= len(v)).any(axis=1))
        if len(out):
            raise MeshError(f"face {int(out[0])} references a vertex index out of range")
        repeated = np.flatnonzero((f[:, 0] == f[:, 1]) | (f[:, 1] == f[:, 2]) | (f[:, 0] == f[:, 2]))
        if len(repeated):
            raise MeshError(f"face {int(repeated[0])} repeats a vertex")
        v.setflags(write=False)
        f.setflags(write=False)
        self._v = v
        self._f = f
        self._check_degenerate()
        self._check_unreferenced()
        self._check_edges()

    @property
    def vertices(self):
        return self._v

    @property
    def faces(self):
        return self._f

    @property
    def n_vertices(self):
        return len(self._v)

    @property
    def n_faces(self):
        return len(self._f)

    @property
    def n_edges(self):
        return len(self.edges)

    def __repr__(self):
        return f"TriangleMesh(n_vertices={self.n_vertices}, n_faces={self.n_faces})"

    # ------------------------------------------------------------------ checks

    @cached_property
    def bbox_diagonal(self):
        return float(np.linalg.norm(self._v.max(axis=0) - self._v.min(axis=0)))

    def _check_degenerate(self):
        threshold = DEGENERATE_RTOL * self.bbox_diagonal**2
        bad = np.flatnonzero(self.face_areas <= threshold)
        if len(bad):
            i = int(bad[0])
            raise MeshError(
                f"face {i} {self._f[i].tolist()} is degenerate "
                f"(area {self.face_areas[i]:.3g} <= {threshold:.3g})"
            )

    def _check_unreferenced(self):
        used = np.zeros(self.n_vertices, dtype=bool)
        used[self._f.ravel()] = True
        if not used.all():
            raise MeshError(f"vertex {int(np.flatnonzero(~used)[0])} is not used by any face")

    def _check_edges(self):
        counts = self._edge_face_count
        if counts.max() > 2:
            e = int(np.flatnonzero(counts > 2)[0])
            i, j = self.edges[e]
            raise MeshError(f"edge ({i}, {j}) is non-manifold: {int(counts[e])} adjacent faces")
        # consistent orientation: each directed half-edge occurs at most once
        he = self._half_edges
        keys = he[:, 0] * self.n_vertices + he[:, 1]
        uniq, cnt = np.unique(keys, return_counts=True)
        if cnt.max() > 1:
            k = int(uniq[np.argmax(cnt)])
            i, j = divmod(k, self.n_vertices)
            raise MeshError(f"faces around edge ({i}, {j}) have inconsistent orientation")

    # ---------------------------------------------------------------- topology

    @cached_property
    def _half_edges(self):
        f = self._f
        return np.stack([f[:, [0, 1]], f[:, [1, 2]], f[:, [2, 0]]], axis=1).reshape(-1, 2)

    @cached_property
    def _edge_index(self):
        he = self._half_edges
        und = np.sort(he, axis=1)
        keys = und[:, 0] * self.n_vertices + und[:, 1]
        uniq, inverse = np.unique(keys, return_inverse=True)
        edges = np.column_stack(np.divmod(uniq, self.n_vertices))
        return edges, inverse.reshape(-1, 3)

    @cached_property
    def edges(self):
        """Unique undirected edges ``(i, j)`` with ``i < j``, sorted."""
        e = self._edge_index[0]
        e.setflags(write=False)
        return e

    @cached_property
    def face_edges(self):
        """Edge id of each face side; side ``s`` joins corners ``s`` and ``s+1``."""
        return self._edge_index[1]

    @cached_property
    def _edge_face_count(self):
        return np.bincount(self.face_edges.ravel(), minlength=len(self.edges))

    @cached_property
    def edge_faces(self):
        """``(E, 2)`` adjacent faces per edge, lower face id first; ``-1`` marks a boundary."""
        ef = np.full((len(self.edges), 2), -1, dtype=np.int64)
        fe = self.face_edges.ravel()
        fid = np.repeat(np.arange(self.n_faces), 3)
        order = np.lexsort((fid, fe))
        fe, fid = fe[order], fid[order]
        first = np.ones(len(fe), dtype=bool)
        first[1:] = fe[1:] != fe[:-1]
        ef[fe[first], 0] = fid[first]
        ef[fe[~first], 1] = fid[~first]
        return ef

    @cached_property
    def boundary_edges(self):
        return np.flatnonzero(self.edge_faces[:, 1] < 0)

    @cached_property
    def boundary_vertices(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.edges[self.boundary_edges].ravel()] = True
        return mask

    @property
    def is_closed(self):
        return len(self.boundary_edges) == 0

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_faces

    @cached_property
    def connected_components(self):
        """Component label per vertex."""
        from scipy.sparse import coo_matrix
        from scipy.sparse.csgraph import connected_components

        e = self.edges
        n = self.n_vertices
        adj = coo_matrix((np.ones(len(e)), (e[:, 0], e[:, 1])), shape=(n, n))
        _, labels = connected_components(adj, directed=False)
        return labels

    # ---------------------------------------------------------------- geometry

    @cached_property
    def _face_cross(self):
        p = self._v[self._f]
        return np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])

    @cached_property
    def face_areas(self):
        a = 0.5 * np.linalg.norm(self._face_cross, axis=1)
        a.setflags(write=False)
        return a

    @cached_property
    def face_normals(self):
        n = self._face_cross / (2.0 * self.face_areas[:, None])
        n.setflags(write=False)
        return n

    @property
    def total_area(self):
        return float(self.face_areas.sum())

    @cached_property
    def corner_angles(self):
        """Interior angle at each face corner, shape ``(m, 3)``."""
        p = self._v[self._f]
        out = np.empty(self._f.shape)
        for c in range(3):
            a = p[:, (c + 1) % 3] - p[:, c]
            b = p[:, (c + 2) % 3] - p[:, c]
            out[:, c] = np.arctan2(np.linalg.norm(np.cross(a, b), axis=1), np.einsum("ij,ij->i", a, b))
        return out

    def transformed(self, rotation=None, translation=None, scale=1.0):
        """Copy with vertices mapped to ``scale * R v + t``."""
        v = self._v * scale
        if rotation is not None:
            v = v @ np.asarray(rotation, dtype=float).T
        if translation is not None:
            v = v + np.asarray(translation, dtype=float)
        return TriangleMesh(v, self._f)


# ---------------------------------------------------------------------- I/O


def _fan(poly):
    return [(poly[0], poly[t], poly[t + 1]) for t in range(1, len(poly) - 1)]


def _read_off(text):
    tokens = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            tokens.append(line.split())
    if not tokens:
        raise MeshError("empty OFF file")
    head = tokens[0]
    if not head[0].upper().endswith("OFF"):
        raise MeshError(f"not an OFF file (header {head[0]!r})")
    rest = head[1:]
    lines = tokens[1:]
    if not rest:
        if not lines:
            raise MeshError("OFF file has no element counts")
        rest, lines = lines[0], lines[1:]
    try:
        nv, nf = int(rest[0]), int(rest[1])
    except (IndexError, ValueError) as exc:
        raise MeshError(f"bad OFF counts line: {' '.join(rest)}") from exc
    if nv == 0 or nf == 0:
        raise MeshError("OFF file declares an empty mesh")
    if len(lines) < nv + nf:
        raise MeshError(f"OFF file truncated: expected {nv + nf} element lines, found {len(lines)}")
    try:
        verts = [[float(x) for x in lines[i][:3]] for i in range(nv)]
    except ValueError as exc:
        raise MeshError(f"bad vertex line in OFF file: {exc}") from exc
    for i, row in enumerate(verts):
        if len(row) != 3:
            raise MeshError(f"vertex {i} has {len(row)} coordinates")
    faces = []
    for i in range(nf):
        row = lines[nv + i]
        try:
            k = int(row[0])
            poly = [int(x) for x in row[1 : 1 + k]]
        except (ValueError, IndexError) as exc:
            raise MeshError(f"bad face line {i} in OFF file") from exc
        if k < 3 or len(poly) != k:
            raise MeshError(f"face {i} has {k} vertices")
        faces.extend(_fan(poly))
    return verts, faces


def _read_obj(text):
    verts, faces = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        parts = line.split("#", 1)[0].split()
        if not parts:
            continue
        if parts[0] == "v":
            try:
                verts.append([float(x) for x in parts[1:4]])
            except ValueError as exc:
                raise MeshError(f"bad vertex on OBJ line {lineno}") from exc
            if len(verts[-1]) != 3:
                raise MeshError(f"vertex on OBJ line {lineno} has fewer than 3 coordinates")
        elif parts[0] == "f":
            poly = []
            for token in parts[1:]:
                try:
                    idx = int(token.split("/")[0])
                except ValueError as exc:
                    raise MeshError(f"bad face index on OBJ line {lineno}") from exc
                poly.append(idx - 1 if idx > 0 else len(verts) + idx)
            if len(poly) < 3:
                raise MeshError(f"face on OBJ line {lineno} has fewer than 3 vertices")
            faces.extend(_fan(poly))
    if not verts or not faces:
        raise MeshError("OBJ file contains no vertices or no faces")
    return verts, faces


def load_mesh(path, format=None):
    """Read an OFF or OBJ file. Polygons are fan-triangulated from their first vertex."""
    path = Path(path)
    fmt = (format or path.suffix.lstrip(".")).lower()
    if fmt not in ("off", "obj"):
        raise MeshError(f"unsupported mesh format {fmt!r}")
    try:
        text = path.read_text()
    except OSError as exc:
        raise MeshError(f"cannot read {path}: {exc}") from exc
    verts, faces = _read_off(text) if fmt == "off" else _read_obj(text)
    return TriangleMesh(verts, faces)


def _atomic_write(path, text):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    os.replace(tmp, path)


def write_off(mesh, path):
    """Write OFF with ``repr`` floats so coordinates round-trip exactly."""
    lines = ["OFF", f"{mesh.n_vertices} {mesh.n_faces} {mesh.n_edges}"]
    lines += [" ".join(repr(float(x)) for x in p) for p in mesh.vertices]
    lines += ["3 " + " ".join(str(int(i)) for i in f) for f in mesh.faces]
    _atomic_write(path, "\n".join(lines) + "\n")


def write_obj(mesh, path):
    lines = ["v " + " ".join(repr(float(x)) for x in p) for p in mesh.vertices]
    lines += ["f " + " ".join(str(int(i) + 1) for i in f) for f in mesh.faces]
    _atomic_write(path, "\n".join(lines) + "\n")


def check_vertex_field(mesh, f, name="field"):
    f = np.asarray(f, dtype=float)
    if f.shape[0] != mesh.n_vertices:
        raise MalformedInputError(
            f"{name} has {f.shape[0]} entries but the mesh has {mesh.n_vertices} vertices"
        )
    return f


def check_face_field(mesh, field, name="field"):
    field = np.asarray(field, dtype=float)
    if field.shape != (mesh.n_faces, 3):
        raise MalformedInputError(f"{name} must have shape ({mesh.n_faces}, 3), got {field.shape}")
    return field
