"""Reference implementations that share no code with the production path.

Used by the validation suite and the tests as independent checks.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp


def cotan_laplacian_reference(vertices, faces):
    """Classical cotangent stiffness built edge by edge from side lengths.

    Cotangents come from the law of cosines and Heron's formula, so nothing
    here touches unit vectors or cross products. Off-diagonal entries are
    ``(cot a + cot b) / 2``; the diagonal makes rows sum to zero.
    """
    vertices = np.asarray(vertices, dtype=float)
    n = len(vertices)
    acc = {}
    for face in np.asarray(faces):
        for c in range(3):
            k, i, j = int(face[c]), int(face[(c + 1) % 3]), int(face[(c + 2) % 3])
            a = np.linalg.norm(vertices[i] - vertices[j])  # opposite k
            b = np.linalg.norm(vertices[k] - vertices[j])
            d = np.linalg.norm(vertices[k] - vertices[i])
            s = 0.5 * (a + b + d)
            area = np.sqrt(max(s * (s - a) * (s - b) * (s - d), 0.0))
            cot = (b * b + d * d - a * a) / (4.0 * area)
            key = (min(i, j), max(i, j))
            acc[key] = acc.get(key, 0.0) + 0.5 * cot
    rows, cols, vals = [], [], []
    diag = np.zeros(n)
    for (i, j), w in sorted(acc.items()):
        rows += [i, j]
        cols += [j, i]
        vals += [w, w]
        diag[i] -= w
        diag[j] -= w
    rows += list(range(n))
    cols += list(range(n))
    vals += diag.tolist()
    return sp.csr_matrix((vals, (rows, cols)), shape=(n, n))


def trapezoid_time_average(heat_kernel_at, t, n_steps=1000):
    """Trapezoid rule for ``int_0^t h_{t-s} ds`` given ``heat_kernel_at(time)``."""
    s = np.linspace(0.0, t, n_steps + 1)
    values = np.array([heat_kernel_at(t - si) for si in s])
    trapezoid = getattr(np, "trapezoid", None) or np.trapz
    return trapezoid(values, s, axis=0)


def chebyshev_trig(x, coeffs):
    """``sum_s c_s cos(s arccos x)`` for ``x`` in ``[-1, 1]``."""
    gamma = np.arccos(np.clip(np.asarray(x, dtype=float), -1.0, 1.0))
    s = np.arange(len(coeffs))
    return np.cos(np.multiply.outer(gamma, s)) @ np.asarray(coeffs, dtype=float)


def random_rigid_motion(rng):
    q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q, rng.standard_normal(3)
