"""Randers metric algebra.

A Randers metric on a tangent space is ``F(v) = ||v||_M + <omega, v>`` with
``M`` symmetric positive definite and ``omega^T M^{-1} omega < 1``. Its dual
norm is again of Randers type and has a closed form, which is what the rest of
the package relies on to build Finsler diffusivities.

All objects here are immutable 3-D values; tangent-plane quantities are
embedded in the ambient frame.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, InvalidMetricError, MalformedInputError

SPD_RTOL = 1e-12
SYMMETRY_RTOL = 1e-12


def _as_matrix(m):
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise MalformedInputError(f"expected a 3x3 matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise MalformedInputError("matrix contains non-finite entries")
    return m


def _as_vector(v, name="vector"):
    v = np.asarray(v, dtype=float)
    if v.shape != (3,):
        raise MalformedInputError(f"expected a 3-vector for {name}, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise MalformedInputError(f"{name} contains non-finite entries")
    return v


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ValidityReport:
    symmetry_defect: float
    min_eigenvalue: float
    drift_norm_sq: float
    is_spd: bool
    valid: bool


@dataclass(frozen=True, eq=False)
class RandersMetric:
    """Riemannian part ``m`` and drift covector ``omega``.

    Construction only checks shapes and finiteness; use
    :func:`validate_randers` or :meth:`require_valid` for the metric
    conditions.
    """

    m: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "m", _frozen(_as_matrix(self.m)))
        object.__setattr__(self, "omega", _frozen(_as_vector(self.omega, "omega")))

    @property
    def drift_norm_sq(self):
        """``omega^T M^{-1} omega``."""
        return float(self.omega @ np.linalg.solve(self.m, self.omega))

    @property
    def drift_norm(self):
        return float(np.sqrt(max(self.drift_norm_sq, 0.0)))

    def require_valid(self):
        report = validate_randers(self.m, self.omega)
        if not report.valid:
            raise InvalidMetricError(
                f"invalid Randers metric: spd={report.is_spd}, "
                f"omega^T M^-1 omega={report.drift_norm_sq:.6g}"
            )
        return self

    def __call__(self, v):
        return eval_primal(self, v)

    def to_dict(self):
        return {"M": self.m.ravel().tolist(), "omega": self.omega.tolist()}

    @classmethod
    def from_dict(cls, data):
        try:
            m = np.asarray(data["M"], dtype=float).reshape(3, 3)
            omega = np.asarray(data["omega"], dtype=float)
        except (KeyError, ValueError, TypeError) as exc:
            raise MalformedInputError(f"bad metric record: {exc}") from exc
        return cls(m, omega)

    def to_json(self):
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class DualRandersMetric:
    m_star: np.ndarray
    omega_star: np.ndarray
    randers_alpha: float

    def __post_init__(self):
        object.__setattr__(self, "m_star", _frozen(_as_matrix(self.m_star)))
        object.__setattr__(self, "omega_star", _frozen(_as_vector(self.omega_star, "omega_star")))
        object.__setattr__(self, "randers_alpha", float(self.randers_alpha))

    @property
    def drift_norm_sq(self):
        """``omega*^T M*^{-1} omega*``; always below one for a valid primal."""
        return float(self.omega_star @ np.linalg.solve(self.m_star, self.omega_star))

    def as_metric(self):
        """The dual viewed as a Randers metric in its own right."""
        return RandersMetric(self.m_star, self.omega_star)

    def __call__(self, v):
        v = _as_vector(v, "v")
        return float(np.sqrt(max(v @ self.m_star @ v, 0.0)) + self.omega_star @ v)


def validate_randers(m, omega):
    """Check SPD-ness of ``m`` and the strict drift bound.

    SPD uses eigenvalues against a tolerance of ``1e-12 * trace(m)``.
    """
    m = _as_matrix(m)
    omega = _as_vector(omega, "omega")
    scale = max(np.abs(m).max(), np.finfo(float).tiny)
    symmetry_defect = float(np.abs(m - m.T).max() / scale)
    sym = 0.5 * (m + m.T)
    eigvals = np.linalg.eigvalsh(sym)
    min_eig = float(eigvals[0])
    trace = float(np.trace(sym))
    is_spd = bool(symmetry_defect <= SYMMETRY_RTOL and trace > 0 and min_eig > SPD_RTOL * trace)
    if is_spd:
        drift = float(omega @ np.linalg.solve(sym, omega))
    else:
        drift = float("nan")
    return ValidityReport(
        symmetry_defect=symmetry_defect,
        min_eigenvalue=min_eig,
        drift_norm_sq=drift,
        is_spd=is_spd,
        valid=bool(is_spd and drift < 1.0),
    )


def eval_primal(metric, v):
    """``F(v) = ||v||_M + <omega, v>``."""
    v = _as_vector(v, "v")
    quad = float(v @ metric.m @ v)
    return float(np.sqrt(max(quad, 0.0)) + metric.omega @ v)


def dual_randers(metric):
    """Closed-form dual ``(M*, omega*)`` of a valid Randers metric."""
    report = validate_randers(metric.m, metric.omega)
    if not report.valid:
        raise InvalidMetricError(
            f"dual requested for an invalid metric (omega^T M^-1 omega={report.drift_norm_sq})"
        )
    m_inv = np.linalg.inv(metric.m)
    m_inv = 0.5 * (m_inv + m_inv.T)
    h = m_inv @ metric.omega
    alpha = 1.0 - float(metric.omega @ h)
    m_star = (alpha * m_inv + np.outer(h, h)) / alpha**2
    omega_star = -h / alpha
    return DualRandersMetric(0.5 * (m_star + m_star.T), omega_star, alpha)


def dual_via_block_inverse(metric):
    """Dual read off the inverse of the bordered matrix ``[[M, w], [w^T, 1]]``.

    The inverse has the layout ``[[a M*, w*], [w*^T, 1/a]]``. Kept independent
    of :func:`dual_randers` so the two can check each other.
    """
    block = np.empty((4, 4))
    block[:3, :3] = metric.m
    block[:3, 3] = metric.omega
    block[3, :3] = metric.omega
    block[3, 3] = 1.0
    try:
        inv = np.linalg.inv(block)
    except np.linalg.LinAlgError as exc:
        raise InvalidMetricError(f"bordered metric matrix is singular: {exc}") from exc
    alpha = 1.0 / inv[3, 3]
    m_star = inv[:3, :3] / alpha
    omega_star = 0.5 * (inv[:3, 3] + inv[3, :3])
    return DualRandersMetric(0.5 * (m_star + m_star.T), omega_star, alpha)


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    r = np.sqrt(np.maximum(1.0 - z * z, 0.0))
    phi = np.pi * (3.0 - np.sqrt(5.0)) * i
    return np.column_stack([r * np.cos(phi), r * np.sin(phi), z])


def eval_dual_definition(metric, v, n_samples=10_000, n_refine=50):
    """Brute-force ``max <v, b>`` over ``F(b) <= 1``.

    Directions are Fibonacci points on the unit sphere, each rescaled onto the
    unit ball of ``F`` by homogeneity. The best sample is polished with
    projected gradient ascent on ``<v, b> / F(b)`` over the sphere.
    """
    if n_samples < 16:
        raise ConfigurationError(f"n_samples must be >= 16, got {n_samples}")
    v = _as_vector(v, "v")
    if not np.any(v):
        return 0.0
    m, omega = metric.m, metric.omega

    def ratio(b):
        f = np.sqrt(np.einsum("...i,ij,...j->...", b, m, b)) + b @ omega
        return (b @ v) / f

    dirs = _fibonacci_sphere(n_samples)
    values = ratio(dirs)
    best = int(np.argmax(values))
    b = dirs[best]
    value = float(values[best])

    step = np.pi / np.sqrt(n_samples)
    for _ in range(n_refine):
        norm_m = np.sqrt(b @ m @ b)
        f = norm_m + omega @ b
        grad = v / f - (v @ b) * (m @ b / norm_m + omega) / f**2
        grad -= (grad @ b) * b
        gnorm = np.linalg.norm(grad)
        if gnorm < 1e-15:
            break
        while step > 1e-14:
            trial = b + step * grad / gnorm
            trial /= np.linalg.norm(trial)
            trial_value = float(ratio(trial))
            if trial_value > value:
                b, value = trial, trial_value
                step *= 1.5
                break
            step *= 0.5
        else:
            break
    return value


def finsler_diffusivity(dual):
    """``D = M* - omega* omega*^T``."""
    d = dual.m_star - np.outer(dual.omega_star, dual.omega_star)
    return 0.5 * (d + d.T)


def random_metric(rng, max_drift=0.95, cond=20.0):
    """A random valid metric with ``||omega||_{M^-1}`` uniform in ``[0, max_drift)``."""
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    eig = np.exp(rng.uniform(0.0, np.log(cond), size=3))
    m = (q * eig) @ q.T
    m = 0.5 * (m + m.T)
    u = rng.standard_normal(3)
    u /= np.linalg.norm(u)
    r = rng.uniform(0.0, max_drift)
    # omega = r * M^{1/2} u gives omega^T M^-1 omega = r^2
    sqrt_m = (q * np.sqrt(eig)) @ q.T
    return RandersMetric(m, r * (sqrt_m @ u))
