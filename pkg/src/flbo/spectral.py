"""Spectral tools on an :class:`~flbo.operators.OperatorPair`.

Eigenpairs solve ``-W phi = lambda S phi`` and are S-orthonormal. Everything
downstream (heat kernels, Chebyshev filters, convolutions, descriptors) works
in the truncated basis; coefficients of a field ``f`` are ``Phi^T S f``.
"""

from __future__ import annotations

import csv
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .exceptions import ConfigurationError, MalformedInputError, SolverError

logger = logging.getLogger(__name__)

DENSE_MAX_N = 500
LAMBDA_MAX_MARGIN = 1.01


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    mass: np.ndarray
    lambda_max_estimate: float

    @property
    def k(self):
        return len(self.eigenvalues)

    @property
    def n(self):
        return self.eigenvectors.shape[0]

    def coefficients(self, f):
        """``f_hat = Phi^T S f``."""
        f = np.asarray(f, dtype=float)
        if f.shape[0] != self.n:
            raise MalformedInputError(f"field has {f.shape[0]} entries, basis has {self.n} vertices")
        return self.eigenvectors.T @ (self.mass[:, None] * f if f.ndim == 2 else self.mass * f)

    def synthesize(self, coeffs):
        return self.eigenvectors @ coeffs


@dataclass(frozen=True)
class FilterSpec:
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.atleast_1d(np.asarray(self.coeffs, dtype=float))
        if c.ndim != 1 or len(c) < 1:
            raise ConfigurationError("a Chebyshev filter needs at least one coefficient")
        if not np.all(np.isfinite(c)):
            raise ConfigurationError("Chebyshev coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def order(self):
        return len(self.coeffs)


def _normalized_operator(pair):
    s = 1.0 / np.sqrt(pair.mass)
    a = sp.diags(s) @ (-pair.stiffness) @ sp.diags(s)
    a = 0.5 * (a + a.T)
    return a.tocsc(), s


def _fix_signs(vecs):
    # deterministic sign: the entry of largest magnitude is positive
    idx = np.argmax(np.abs(vecs), axis=0)
    signs = np.sign(vecs[idx, np.arange(vecs.shape[1])])
    signs[signs == 0] = 1.0
    return vecs * signs


def eigensolve(pair, k, seed=0, dense_max_n=DENSE_MAX_N, maxiter=None, tol=0.0):
    """``k`` smallest eigenpairs of ``-W phi = lambda S phi``.

    Works on the symmetric matrix ``S^-1/2 (-W) S^-1/2``: a dense LAPACK solve
    up to ``dense_max_n`` vertices, otherwise shift-invert Lanczos (ARPACK)
    around a small negative shift so the zero eigenvalue is well separated.
    """
    n = pair.n
    if not 1 <= k <= n:
        raise ConfigurationError(f"k must be in [1, {n}], got {k}")
    a, s = _normalized_operator(pair)
    if n <= dense_max_n or k >= n - 1:
        dense = a.toarray()
        vals_all, vecs_all = scipy.linalg.eigh(dense)
        vals, vecs = vals_all[:k], vecs_all[:, :k]
        lam_max = float(vals_all[-1])
    else:
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(n)
        scale = float(abs(a.diagonal()).max())
        sigma = -1e-6 * scale
        ncv = min(n, max(2 * k + 1, k + 32))
        try:
            vals, vecs = spla.eigsh(a, k=k, sigma=sigma, which="LM", v0=v0, ncv=ncv,
                                    maxiter=maxiter or 30 * max(k, 10), tol=tol)
            lam_max = float(spla.eigsh(a, k=1, which="LA", v0=v0, tol=1e-8,
                                       return_eigenvectors=False)[0])
        except spla.ArpackNoConvergence as exc:
            raise SolverError(f"Lanczos did not converge for k={k}: {exc}") from exc
        order = np.argsort(vals)
        vals, vecs = vals[order], vecs[:, order]
        # clustered eigenvalues can leave the Ritz vectors slightly non-orthogonal; one Rayleigh-Ritz pass fixes that
        vecs, _ = np.linalg.qr(vecs)
        small = vecs.T @ (a @ vecs)
        small = 0.5 * (small + small.T)
        vals, rot = np.linalg.eigh(small)
        vecs = vecs @ rot
    phi = _fix_signs(s[:, None] * vecs)
    resid = pair.stiffness @ phi + pair.mass[:, None] * phi * vals
    res_norm = float(np.abs(resid).max())
    w_norm = float(abs(pair.stiffness).sum(axis=1).max())
    if res_norm > 1e-6 * w_norm * max(1.0, float(np.abs(phi).max())):
        raise SolverError(f"eigen-residual too large: {res_norm:.3g}", residual=res_norm)
    return SpectralBasis(vals, phi, np.asarray(pair.mass, dtype=float), LAMBDA_MAX_MARGIN * lam_max)


def eigen_residual(pair, basis):
    """Largest entry of ``W Phi + S Phi Lambda``."""
    r = pair.stiffness @ basis.eigenvectors + basis.mass[:, None] * basis.eigenvectors * basis.eigenvalues
    return float(np.abs(r).max())


# ----------------------------------------------------------------- kernels


def _check_time(t):
    if t < 0:
        raise ConfigurationError(f"time must be >= 0, got {t}")


def heat_kernel(basis, t, x):
    """``h_t(x, .) = sum_k exp(-t lambda_k) phi_k(x) phi_k(.)``."""
    _check_time(t)
    w = np.exp(-t * basis.eigenvalues) * basis.eigenvectors[x]
    return basis.eigenvectors @ w


def time_averaged_weights(eigenvalues, t, lambda_max):
    """``(1 - exp(-t lambda)) / lambda``, with ``t`` where ``lambda <= 1e-12 lambda_max``."""
    lam = np.asarray(eigenvalues, dtype=float)
    eps = 1e-12 * lambda_max
    zero = lam <= eps
    safe = np.where(zero, 1.0, lam)
    return np.where(zero, t, -np.expm1(-t * safe) / safe)


def time_averaged_heat_kernel(basis, t, x):
    """``int_0^t h_{t-s}(x, .) ds`` in closed form."""
    _check_time(t)
    g = time_averaged_weights(basis.eigenvalues, t, basis.lambda_max_estimate)
    return basis.eigenvectors @ (g * basis.eigenvectors[x])


def heat_propagate(basis, f0, t):
    """``Phi exp(-t Lambda) Phi^T S f0``."""
    _check_time(t)
    c = basis.coefficients(f0)
    decay = np.exp(-t * basis.eigenvalues)
    return basis.synthesize(decay[:, None] * c if c.ndim == 2 else decay * c)


# ----------------------------------------------------------------- filters


def rescale_eigenvalues(eigenvalues, lambda_max):
    return 2.0 * np.asarray(eigenvalues, dtype=float) / lambda_max - 1.0


def chebyshev_eval(x, coeffs):
    """``sum_s c_s T_s(x)`` by the three-term recurrence."""
    x = np.asarray(x, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    t_prev = np.ones_like(x)
    out = coeffs[0] * t_prev
    if len(coeffs) == 1:
        return out
    t_cur = x.copy()
    out = out + coeffs[1] * t_cur
    for c in coeffs[2:]:
        t_prev, t_cur = t_cur, 2.0 * x * t_cur - t_prev
        out = out + c * t_cur
    return out


def chebyshev_filter(basis, spec):
    """Filter response ``g(lambda_k)`` on the rescaled spectrum ``2 lambda / lambda_max - 1``."""
    if basis.k == 0:
        raise ConfigurationError("empty basis")
    return chebyshev_eval(rescale_eigenvalues(basis.eigenvalues, basis.lambda_max_estimate), spec.coeffs)


def fit_chebyshev(func, lambda_max, order, n_nodes=None):
    """Least-squares Chebyshev coefficients of ``func`` on ``[0, lambda_max]``."""
    n_nodes = n_nodes or 4 * order
    gamma = np.pi * (np.arange(n_nodes) + 0.5) / n_nodes
    x = np.cos(gamma)
    lam = 0.5 * (x + 1.0) * lambda_max
    coeffs = np.polynomial.chebyshev.chebfit(x, func(lam), order - 1)
    return FilterSpec(coeffs)


def anisotropic_convolve(basis, f, spec):
    """``Phi (g(lambda) * Phi^T S f)``."""
    f = np.asarray(f, dtype=float)
    if f.shape[0] != basis.n:
        raise MalformedInputError(f"field has {f.shape[0]} entries, basis has {basis.n} vertices")
    g = chebyshev_filter(basis, spec)
    c = basis.coefficients(f)
    return basis.synthesize(g[:, None] * c if c.ndim == 2 else g * c)


def directional_sum_convolve(bases, f, specs):
    """Riemann sum ``pi / n_angles * sum_theta conv_theta(f)`` over orientations in ``[0, pi)``."""
    if isinstance(specs, FilterSpec):
        specs = [specs] * len(bases)
    if len(specs) != len(bases) or not bases:
        raise MalformedInputError(f"{len(bases)} bases but {len(specs)} filters")
    n = bases[0].n
    if any(b.n != n for b in bases):
        raise MalformedInputError("bases disagree on vertex count")
    total = sum(anisotropic_convolve(b, f, s) for b, s in zip(bases, specs))
    return (np.pi / len(bases)) * total


def finsler_hks(basis, times):
    """``hks_t(x) = sum_k exp(-t lambda_k) phi_k(x)^2``, one column per time."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    if len(times) == 0 or np.any(times <= 0):
        raise ConfigurationError("descriptor times must be a non-empty list of positive values")
    decay = np.exp(-np.outer(basis.eigenvalues, times))
    return (basis.eigenvectors**2) @ decay


# --------------------------------------------------------------------- I/O


def _atomic_csv(path, header, rows):
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with tmp.open("w", newline="") as fh:
        w = csv.writer(fh)
        if header is not None:
            w.writerow(header)
        for row in rows:
            w.writerow([repr(float(x)) if not isinstance(x, (int, np.integer)) else int(x) for x in row])
    os.replace(tmp, path)
    return path


def write_eigenvalues_csv(basis, path):
    return _atomic_csv(path, ["index", "lambda"], ((i, lam) for i, lam in enumerate(basis.eigenvalues)))


def read_eigenvalues_csv(path):
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    return data[:, 1]


def write_eigenvectors(basis, path):
    """``.npy`` (binary) or ``.csv`` (row = vertex) depending on the suffix."""
    path = Path(path)
    if path.suffix == ".npy":
        tmp = path.with_name(path.name + ".tmp.npy")
        np.save(tmp, basis.eigenvectors)
        os.replace(tmp, path)
        return path
    return _atomic_csv(path, None, basis.eigenvectors)


def write_descriptor_csv(desc, times, path):
    return _atomic_csv(path, [repr(float(t)) for t in times], desc)


def write_field_csv(values, path):
    return _atomic_csv(path, ["value"], ([v] for v in np.asarray(values, dtype=float)))


def read_field_csv(path):
    """One value per line; a non-numeric header line is skipped."""
    values = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                values.append(float(line.split(",")[-1]))
            except ValueError:
                if values:
                    raise
    return np.asarray(values)
