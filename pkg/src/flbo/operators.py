"""Discrete Finsler-Laplace-Beltrami operators.

For each orientation ``theta`` every face gets a shear ``H``, a Randers metric
``(M = H^-1, omega = tau * R_theta u_max)``, its dual and the diffusivity
``D = M* - omega* omega*^T``. The stiffness matrix uses anisotropic cotangent
weights with each face's own ``D``; the mass matrix is lumped (one third of
the incident face areas). The operator is ``L = -S^-1 W``.
"""

from __future__ import annotations

import json
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .exceptions import AssemblyError, ConfigurationError
from .geometry import FaceFrames, estimate_curvature_frames
from .kernels import DRIFT_CLAMP, SIN_FLOOR, face_metrics, stiffness_triplets
from .randers import DualRandersMetric, RandersMetric

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class AnisotropyParams:
    anisotropy_level: float = 10.0
    tau: float = 0.1
    n_angles: int = 8

    def __post_init__(self):
        if not self.anisotropy_level >= 0:
            raise ConfigurationError(f"anisotropy_level must be >= 0, got {self.anisotropy_level}")
        if not self.tau >= 0:
            raise ConfigurationError(f"tau must be >= 0, got {self.tau}")
        if int(self.n_angles) != self.n_angles or self.n_angles < 1:
            raise ConfigurationError(f"n_angles must be a positive integer, got {self.n_angles}")

    @property
    def theta_values(self):
        return np.arange(self.n_angles) * np.pi / self.n_angles


@dataclass(frozen=True, eq=False)
class FaceMetricField:
    """Per-face metric data for one orientation (arrays indexed by face)."""

    shear: np.ndarray
    m: np.ndarray
    omega: np.ndarray
    m_star: np.ndarray
    omega_star: np.ndarray
    randers_alpha: np.ndarray
    diffusivity: np.ndarray
    drift_norm: np.ndarray
    clamped: np.ndarray
    theta: float = 0.0

    def __len__(self):
        return len(self.diffusivity)

    def metric(self, f):
        return RandersMetric(self.m[f], self.omega[f])

    def dual(self, f):
        return DualRandersMetric(self.m_star[f], self.omega_star[f], self.randers_alpha[f])

    @classmethod
    def uniform(cls, n_faces, m, omega, theta=0.0):
        """Same Randers metric on every face (shear taken as ``M^-1``)."""
        m = np.broadcast_to(np.asarray(m, dtype=float), (n_faces, 3, 3)).copy()
        omega = np.broadcast_to(np.asarray(omega, dtype=float), (n_faces, 3)).copy()
        shear = np.linalg.inv(m)
        h = np.einsum("fij,fj->fi", shear, omega)
        q = np.einsum("fi,fi->f", omega, h)
        if np.any(q >= 1.0):
            raise ConfigurationError("uniform metric violates the drift bound")
        alpha = 1.0 - q
        m_star = (alpha[:, None, None] * shear + np.einsum("fi,fj->fij", h, h)) / (alpha**2)[:, None, None]
        omega_star = -h / alpha[:, None]
        d = m_star - np.einsum("fi,fj->fij", omega_star, omega_star)
        return cls(shear, m, omega, m_star, omega_star, alpha, d, np.sqrt(q),
                   np.zeros(n_faces, dtype=bool), theta)


@dataclass
class AssemblyReport:
    theta: float
    clamped_faces: list = field(default_factory=list)
    sliver_corners: list = field(default_factory=list)
    max_drift_norm: float = 0.0

    def to_dict(self):
        return {
            "theta": self.theta,
            "clamped_faces": [int(f) for f in self.clamped_faces],
            "sliver_corners": [[int(f), int(c)] for f, c in self.sliver_corners],
            "max_drift_norm": float(self.max_drift_norm),
        }


@dataclass(eq=False)
class OperatorPair:
    """Lumped mass ``S`` and stiffness ``W`` for one orientation.

    ``stiffness`` is negative semidefinite with zero row sums; the positive
    semidefinite operator is ``-S^-1 W``.
    """

    mass: np.ndarray
    stiffness: sp.csr_matrix
    theta: float = 0.0
    mesh: object = None
    field: FaceMetricField | None = None
    report: AssemblyReport | None = None

    @property
    def n(self):
        return len(self.mass)

    @property
    def mass_matrix(self):
        return sp.diags(self.mass, format="csr")

    def laplacian(self):
        """``L = -S^-1 W`` as a sparse matrix."""
        return sp.diags(-1.0 / self.mass) @ self.stiffness


def _rotation_about_normal(frame, theta):
    c, s = np.cos(theta), np.sin(theta)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    return frame @ rz @ frame.T


def build_shear(frame, anisotropy_level, theta):
    """``H = R_theta U diag(1/(1+a), 1, 1) U^T R_theta^T`` for one face frame ``U``."""
    frame = np.asarray(frame, dtype=float)
    rot = _rotation_about_normal(frame, theta)
    d = np.diag([1.0 / (1.0 + anisotropy_level), 1.0, 1.0])
    h = rot @ frame @ d @ frame.T @ rot.T
    return 0.5 * (h + h.T)


def build_face_randers(frame, params, theta):
    """Randers metric and Finsler diffusivity for a single face.

    Goes through the same kernel as :func:`face_metric_field` so single-face
    and batched results coincide.
    """
    frame = np.asarray(frame, dtype=float)[None]
    fld = face_metric_field(frame, params, theta)
    return fld.metric(0), fld.diffusivity[0]


def face_metric_field(frames, params, theta, backend=None):
    """Batched per-face metrics; ``frames`` is a :class:`FaceFrames` or ``(F, 3, 3)`` array."""
    mats = frames.as_matrices() if isinstance(frames, FaceFrames) else np.asarray(frames, dtype=float)
    out = face_metrics(mats, params.anisotropy_level, params.tau, theta, DRIFT_CLAMP, backend=backend)
    shear, m, omega, m_star, omega_star, alpha, d, drift, clamped = out
    return FaceMetricField(shear, m, omega, m_star, omega_star, alpha, d, drift, clamped, float(theta))


def assemble_mass(mesh):
    """Lumped mass: one third of the incident face areas per vertex."""
    return np.bincount(
        mesh.faces.ravel(), weights=np.repeat(mesh.face_areas / 3.0, 3), minlength=mesh.n_vertices
    )


def assemble_stiffness(mesh, field, backend=None, report=None):
    """Anisotropic cotangent stiffness with per-face diffusivities.

    ``field`` is a :class:`FaceMetricField` or an ``(F, 3, 3)`` array of
    diffusivities.
    """
    d = field.diffusivity if isinstance(field, FaceMetricField) else field
    if d is None:
        raise AssemblyError("face metric field carries no diffusivities")
    d = np.asarray(d, dtype=float)
    if d.shape != (mesh.n_faces, 3, 3):
        raise AssemblyError(
            f"need one diffusivity per face: expected ({mesh.n_faces}, 3, 3), got {d.shape}"
        )
    rows, cols, vals, floored = stiffness_triplets(mesh.vertices, mesh.faces, d, SIN_FLOOR, backend=backend)
    if floored.any():
        slivers = np.argwhere(floored)
        logger.warning("%d sliver corners clamped to sin >= %g", len(slivers), SIN_FLOOR)
        if report is not None:
            report.sliver_corners.extend(map(tuple, slivers.tolist()))
    n = mesh.n_vertices
    w = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
    w.sum_duplicates()
    w.sort_indices()
    return w


def assemble_flbo(mesh, params, theta, frames=None, backend=None):
    """Mass and stiffness of the FLBO at one orientation."""
    if frames is None:
        frames = estimate_curvature_frames(mesh, backend=backend)
    fld = face_metric_field(frames, params, theta, backend=backend)
    report = AssemblyReport(theta=float(theta), max_drift_norm=float(fld.drift_norm.max()))
    if fld.clamped.any():
        report.clamped_faces = np.flatnonzero(fld.clamped).tolist()
        logger.info("drift clamped to %.2f on %d faces", DRIFT_CLAMP, len(report.clamped_faces))
    w = assemble_stiffness(mesh, fld, backend=backend, report=report)
    return OperatorPair(assemble_mass(mesh), w, float(theta), mesh, fld, report)


def assemble_albo(mesh, params, theta, frames=None, backend=None):
    """Baseline anisotropic operator: diffusivity is the shear itself (no drift)."""
    if frames is None:
        frames = estimate_curvature_frames(mesh, backend=backend)
    fld = face_metric_field(frames, AnisotropyParams(params.anisotropy_level, 0.0, params.n_angles), theta,
                            backend=backend)
    w = assemble_stiffness(mesh, fld.shear, backend=backend)
    return OperatorPair(assemble_mass(mesh), w, float(theta), mesh, fld, AssemblyReport(float(theta)))


def assemble_family(mesh, params, frames=None, backend=None):
    """One :class:`OperatorPair` per orientation in ``params.theta_values``."""
    if frames is None:
        frames = estimate_curvature_frames(mesh, backend=backend)
    mass = assemble_mass(mesh)
    pairs = []
    for theta in params.theta_values:
        pair = assemble_flbo(mesh, params, theta, frames=frames, backend=backend)
        pair.mass = mass
        pairs.append(pair)
    return pairs


# ------------------------------------------------------------------ export


def _atomic(path, writer):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    writer(tmp)
    os.replace(tmp, path)
    return path


def write_stiffness(w, path):
    """Symmetric Matrix Market coordinate file (lower triangle stored)."""
    lower = sp.tril(sp.csr_matrix(w)).tocoo()
    order = np.lexsort((lower.row, lower.col))
    lines = [
        "%%MatrixMarket matrix coordinate real symmetric",
        f"{w.shape[0]} {w.shape[1]} {lower.nnz}",
    ]
    lines += [
        f"{r + 1} {c + 1} {v!r}"
        for r, c, v in zip(lower.row[order].tolist(), lower.col[order].tolist(), lower.data[order].tolist())
    ]
    return _atomic(path, lambda p: p.write_text("\n".join(lines) + "\n"))


def write_mass(mass, path):
    """Diagonal of ``S`` as a Matrix Market dense array (one column)."""
    lines = ["%%MatrixMarket matrix array real general", f"{len(mass)} 1"]
    lines += [repr(float(x)) for x in mass]
    return _atomic(path, lambda p: p.write_text("\n".join(lines) + "\n"))


def read_stiffness(path):
    return sp.csr_matrix(scipy.io.mmread(str(path)))


def read_mass(path):
    return np.asarray(scipy.io.mmread(str(path)), dtype=float).ravel()


def export_family(pairs, out_dir, stem):
    """Write ``<stem>.S.mtx``, ``<stem>_theta<k>.W.mtx`` and ``<stem>.report.json``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [write_mass(pairs[0].mass, out_dir / f"{stem}.S.mtx")]
    for k, pair in enumerate(pairs):
        paths.append(write_stiffness(pair.stiffness, out_dir / f"{stem}_theta{k}.W.mtx"))
    report = {
        "stem": stem,
        "n_vertices": int(pairs[0].n),
        "angles": [
            dict(index=k, **(pair.report.to_dict() if pair.report else {"theta": pair.theta}))
            for k, pair in enumerate(pairs)
        ],
    }
    paths.append(_atomic(out_dir / f"{stem}.report.json",
                         lambda p: p.write_text(json.dumps(report, indent=2) + "\n")))
    return paths


def load_family(out_dir, stem):
    """Inverse of :func:`export_family` (stiffness and mass only)."""
    out_dir = Path(out_dir)
    s_path = out_dir / f"{stem}.S.mtx"
    if not s_path.exists():
        raise FileNotFoundError(s_path)
    mass = read_mass(s_path)
    pairs = []
    k = 0
    while (out_dir / f"{stem}_theta{k}.W.mtx").exists():
        pairs.append(OperatorPair(mass, read_stiffness(out_dir / f"{stem}_theta{k}.W.mtx"), theta=float(k)))
        k += 1
    if not pairs:
        raise FileNotFoundError(out_dir / f"{stem}_theta0.W.mtx")
    n_angles = len(pairs)
    for k, pair in enumerate(pairs):
        pair.theta = k * np.pi / n_angles
    return pairs
