"""Time-domain references for the spectral heat path.

Implicit Euler on ``S du/dt = W u + S src``, the FEM weak divergence used for
the drift source, the spectral solution of the linearised Randers heat
equation, and a one-shot evaluation of the nonlinear Finsler heat right-hand
side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigurationError, MalformedInputError, SolverError
from .geometry import basis_gradients, face_gradient
from .mesh import check_face_field, check_vertex_field
from .operators import assemble_mass
from .spectral import eigensolve, heat_propagate, time_averaged_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class DiffusionConfig:
    t_final: float
    n_steps: int = 1000
    scheme: str = "implicit-euler"
    source_enabled: bool = False

    def __post_init__(self):
        if self.t_final < 0:
            raise ConfigurationError(f"t_final must be >= 0, got {self.t_final}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ConfigurationError(f"n_steps must be a positive integer, got {self.n_steps}")
        if self.scheme != "implicit-euler":
            raise ConfigurationError(f"unsupported scheme {self.scheme!r}")


def weak_divergence(mesh, field):
    """Load vector ``b_i = -sum_f <field_f, grad phi_i|_f> area_f``."""
    field = check_face_field(mesh, field)
    contrib = -np.einsum("fi,fci->fc", field, basis_gradients(mesh)) * mesh.face_areas[:, None]
    return np.bincount(mesh.faces.ravel(), weights=contrib.ravel(), minlength=mesh.n_vertices)


def divergence_of_field(mesh, field, mass=None):
    """Pointwise divergence ``S^-1 b`` of a per-face vector field."""
    mass = assemble_mass(mesh) if mass is None else mass
    return weak_divergence(mesh, field) / mass


def implicit_euler_diffuse(pair, f0, config, source=None, return_history=False):
    """Backward Euler: ``(S - dt W) f_{m+1} = S f_m + dt S source``.

    ``return_history`` additionally returns the total heat ``sum S f`` after
    every step.
    """
    f = np.array(f0, dtype=float)
    if f.shape != (pair.n,):
        raise MalformedInputError(f"f0 has shape {f.shape}, expected ({pair.n},)")
    if source is not None and not config.source_enabled:
        logger.debug("source given with source_enabled=False; using it anyway")
    dt = config.t_final / config.n_steps
    s = pair.mass
    system = (sp.diags(s) - dt * pair.stiffness).tocsc()
    try:
        solve = spla.factorized(system)
    except RuntimeError as exc:
        cond = None
        try:
            cond = float(np.linalg.cond(system.toarray())) if pair.n <= 2000 else None
        except np.linalg.LinAlgError:
            pass
        raise SolverError(f"factorization failed (condition estimate {cond}): {exc}") from exc
    forcing = None if source is None else dt * s * check_length(source, pair.n)
    history = [float(s @ f)]
    for _ in range(config.n_steps):
        rhs = s * f
        if forcing is not None:
            rhs = rhs + forcing
        f = solve(rhs)
        if return_history:
            history.append(float(s @ f))
    if not np.all(np.isfinite(f)):
        raise SolverError("implicit Euler produced non-finite values")
    return (f, np.array(history)) if return_history else f


def check_length(x, n):
    x = np.asarray(x, dtype=float)
    if x.shape != (n,):
        raise MalformedInputError(f"expected a field of length {n}, got shape {x.shape}")
    return x


def drift_source(pair, field=None):
    """Pointwise ``div(omega*)`` for the pair's face metric field."""
    field = pair.field if field is None else field
    if pair.mesh is None or field is None:
        raise ConfigurationError("operator pair carries no mesh/field; assemble it with assemble_flbo")
    return divergence_of_field(pair.mesh, field.omega_star, pair.mass)


def simplified_randers_solve(pair, field, f0, t, basis=None, k=None):
    """Spectral solution of the linearised Randers heat equation.

    Homogeneous part ``heat_propagate(f0, t)`` plus the particular solution
    driven by the constant source ``div(omega*)``, i.e. the source convolved
    with the time-averaged heat kernel.
    """
    if t < 0:
        raise ConfigurationError(f"time must be >= 0, got {t}")
    if basis is None:
        basis = eigensolve(pair, k or pair.n)
    src = drift_source(pair, field)
    g = time_averaged_weights(basis.eigenvalues, t, basis.lambda_max_estimate)
    particular = basis.synthesize(g * basis.coefficients(src))
    return heat_propagate(basis, f0, t) + particular


@dataclass(frozen=True)
class RHSResult:
    values: np.ndarray
    flux: np.ndarray
    flagged_faces: np.ndarray


def _gradient_norms(m_star, grad):
    return np.sqrt(np.maximum(np.einsum("fi,fij,fj->f", grad, m_star, grad), 0.0))


def nonlinear_finsler_rhs(mesh, field, u, mass=None):
    """``div(F*(grad u) grad F*(grad u))`` evaluated once.

    Flux per face: ``F*(g) (M* g / ||g||_{M*} + omega*)`` with ``g = grad u``.
    Faces with ``||g||_{M*} <= 1e-12`` are flagged and get zero flux.
    """
    u = check_vertex_field(mesh, u, "u")
    g = face_gradient(mesh, u)
    norm = _gradient_norms(field.m_star, g)
    flagged = norm <= 1e-12
    safe = np.where(flagged, 1.0, norm)
    f_star = norm + np.einsum("fi,fi->f", field.omega_star, g)
    direction = np.einsum("fij,fj->fi", field.m_star, g) / safe[:, None] + field.omega_star
    flux = np.where(flagged[:, None], 0.0, f_star[:, None] * direction)
    return RHSResult(divergence_of_field(mesh, flux, mass), flux, np.flatnonzero(flagged))


def simplified_finsler_rhs(mesh, field, u, mass=None):
    """``div(D grad u) + div(omega*)`` with the same weak divergence."""
    u = check_vertex_field(mesh, u, "u")
    g = face_gradient(mesh, u)
    flux = np.einsum("fij,fj->fi", field.diffusivity, g) + field.omega_star
    return RHSResult(divergence_of_field(mesh, flux, mass), flux, np.array([], dtype=np.int64))


def dual_norm(field, g):
    """``F*(g)`` per face."""
    return _gradient_norms(field.m_star, g) + np.einsum("fi,fi->f", field.omega_star, g)


@dataclass(frozen=True)
class SweepResult:
    eps: np.ndarray
    gaps: np.ndarray
    slope: float
    flagged_faces: int


def loglog_slope(x, y):
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def simplification_sweep(mesh, eps_values=(0.1, 0.05, 0.025), direction=(1.0, 0.0, 0.0)):
    """Gap between the nonlinear and simplified right-hand sides as the drift shrinks.

    Uses ``M = I``, constant ``omega = eps * direction`` and a linear ``u``
    along x rescaled so that ``F*(grad u) = 1`` on every face. The gap is the
    S-weighted L2 norm of the difference of the two right-hand sides.
    """
    from .operators import FaceMetricField

    mass = assemble_mass(mesh)
    x = mesh.vertices[:, 0]
    gaps, flagged = [], 0
    for eps in eps_values:
        fld = FaceMetricField.uniform(mesh.n_faces, np.eye(3), eps * np.asarray(direction, dtype=float))
        scale = dual_norm(fld, face_gradient(mesh, x))
        u = x / scale[0]
        nl = nonlinear_finsler_rhs(mesh, fld, u, mass)
        lin = simplified_finsler_rhs(mesh, fld, u, mass)
        flagged += len(nl.flagged_faces)
        diff = nl.values - lin.values
        gaps.append(float(np.sqrt(mass @ diff**2)))
    eps = np.asarray(eps_values, dtype=float)
    gaps = np.asarray(gaps)
    return SweepResult(eps, gaps, loglog_slope(eps, gaps), flagged)
