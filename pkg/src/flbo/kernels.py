"""Per-face hot loops, each in a numpy and a numba flavour.

The public functions dispatch on ``backend``: ``"numpy"``, ``"numba"`` or
``None`` (follow :data:`flbo._accel.USE_NUMBA`). Both flavours compute the
same arithmetic in the same order per face, so results agree to rounding.
"""

from __future__ import annotations

import numpy as np

from . import _accel
from ._accel import njit

DRIFT_CLAMP = 0.99
SIN_FLOOR = 1e-8


def _resolve(backend):
    if backend is None:
        return "numba" if _accel.USE_NUMBA else "numpy"
    if backend not in ("numpy", "numba"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "numba" and not _accel._HAVE_NUMBA:
        raise RuntimeError("numba backend requested but numba is not installed")
    return backend


# --------------------------------------------------------------- face metrics


def _face_metrics_numpy(frames, anisotropy_level, tau, theta, drift_clamp):
    c, s = np.cos(theta), np.sin(theta)
    rz = np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])
    b = frames @ rz
    diag = np.array([1.0 / (1.0 + anisotropy_level), 1.0, 1.0])
    shear = np.einsum("fik,k,fjk->fij", b, diag, b)
    shear = 0.5 * (shear + np.swapaxes(shear, 1, 2))
    m = np.linalg.inv(shear)
    m = 0.5 * (m + np.swapaxes(m, 1, 2))
    omega = tau * b[:, :, 0]

    # M = H^-1, so M^-1 is the shear itself; with zero drift D == H bit for bit
    m_inv = shear
    h = np.einsum("fij,fj->fi", m_inv, omega)
    drift = np.sqrt(np.maximum(np.einsum("fi,fi->f", omega, h), 0.0))
    clamped = drift >= drift_clamp
    if clamped.any():
        scale = np.where(clamped, drift_clamp / np.where(clamped, drift, 1.0), 1.0)
        omega = omega * scale[:, None]
        h = h * scale[:, None]
    alpha = 1.0 - np.einsum("fi,fi->f", omega, h)
    hh = np.einsum("fi,fj->fij", h, h)
    m_star = (alpha[:, None, None] * m_inv + hh) / (alpha**2)[:, None, None]
    omega_star = -h / alpha[:, None]
    d = m_star - np.einsum("fi,fj->fij", omega_star, omega_star)
    d = 0.5 * (d + np.swapaxes(d, 1, 2))
    return shear, m, omega, m_star, omega_star, alpha, d, drift, clamped


@njit
def _inv3(a, out):
    c00 = a[1, 1] * a[2, 2] - a[1, 2] * a[2, 1]
    c01 = a[1, 2] * a[2, 0] - a[1, 0] * a[2, 2]
    c02 = a[1, 0] * a[2, 1] - a[1, 1] * a[2, 0]
    det = a[0, 0] * c00 + a[0, 1] * c01 + a[0, 2] * c02
    inv_det = 1.0 / det
    out[0, 0] = c00 * inv_det
    out[1, 0] = c01 * inv_det
    out[2, 0] = c02 * inv_det
    out[0, 1] = (a[0, 2] * a[2, 1] - a[0, 1] * a[2, 2]) * inv_det
    out[1, 1] = (a[0, 0] * a[2, 2] - a[0, 2] * a[2, 0]) * inv_det
    out[2, 1] = (a[0, 1] * a[2, 0] - a[0, 0] * a[2, 1]) * inv_det
    out[0, 2] = (a[0, 1] * a[1, 2] - a[0, 2] * a[1, 1]) * inv_det
    out[1, 2] = (a[0, 2] * a[1, 0] - a[0, 0] * a[1, 2]) * inv_det
    out[2, 2] = (a[0, 0] * a[1, 1] - a[0, 1] * a[1, 0]) * inv_det


@njit
def _face_metrics_loop(frames, anisotropy_level, tau, theta, drift_clamp):
    nf = frames.shape[0]
    shear = np.empty((nf, 3, 3))
    m = np.empty((nf, 3, 3))
    omega = np.empty((nf, 3))
    m_star = np.empty((nf, 3, 3))
    omega_star = np.empty((nf, 3))
    alpha = np.empty(nf)
    d = np.empty((nf, 3, 3))
    drift = np.empty(nf)
    clamped = np.zeros(nf, dtype=np.bool_)
    c = np.cos(theta)
    s = np.sin(theta)
    diag = np.array([1.0 / (1.0 + anisotropy_level), 1.0, 1.0])
    b = np.empty((3, 3))
    tmp = np.empty((3, 3))
    m_inv = np.empty((3, 3))
    h = np.empty(3)
    for f in range(nf):
        u = frames[f]
        for i in range(3):
            b[i, 0] = u[i, 0] * c + u[i, 1] * s
            b[i, 1] = -u[i, 0] * s + u[i, 1] * c
            b[i, 2] = u[i, 2]
        for i in range(3):
            for j in range(3):
                acc = 0.0
                for k in range(3):
                    acc += b[i, k] * diag[k] * b[j, k]
                tmp[i, j] = acc
        for i in range(3):
            for j in range(3):
                shear[f, i, j] = 0.5 * (tmp[i, j] + tmp[j, i])
        _inv3(shear[f], tmp)
        for i in range(3):
            for j in range(3):
                m[f, i, j] = 0.5 * (tmp[i, j] + tmp[j, i])
        for i in range(3):
            for j in range(3):
                m_inv[i, j] = shear[f, i, j]
        for i in range(3):
            omega[f, i] = tau * b[i, 0]
        q = 0.0
        for i in range(3):
            acc = 0.0
            for j in range(3):
                acc += m_inv[i, j] * omega[f, j]
            h[i] = acc
            q += omega[f, i] * acc
        dr = np.sqrt(max(q, 0.0))
        drift[f] = dr
        if dr >= drift_clamp:
            clamped[f] = True
            sc = drift_clamp / dr
            for i in range(3):
                omega[f, i] *= sc
                h[i] *= sc
        a = 1.0
        for i in range(3):
            a -= omega[f, i] * h[i]
        alpha[f] = a
        for i in range(3):
            omega_star[f, i] = -h[i] / a
        for i in range(3):
            for j in range(3):
                m_star[f, i, j] = (a * m_inv[i, j] + h[i] * h[j]) / (a * a)
        for i in range(3):
            for j in range(3):
                tmp[i, j] = m_star[f, i, j] - omega_star[f, i] * omega_star[f, j]
        for i in range(3):
            for j in range(3):
                d[f, i, j] = 0.5 * (tmp[i, j] + tmp[j, i])
    return shear, m, omega, m_star, omega_star, alpha, d, drift, clamped


def face_metrics(frames, anisotropy_level, tau, theta, drift_clamp=DRIFT_CLAMP, backend=None):
    """Per-face shear, Randers metric, its dual and the Finsler diffusivity.

    ``frames`` has shape ``(F, 3, 3)`` with columns ``(u_max, u_min, normal)``.
    Returns ``(shear, m, omega, m_star, omega_star, alpha, d, drift, clamped)``
    where ``drift`` is ``||omega||_{M^-1}`` before clamping.
    """
    frames = np.ascontiguousarray(frames, dtype=float)
    args = (frames, float(anisotropy_level), float(tau), float(theta), float(drift_clamp))
    if _resolve(backend) == "numba":
        return _face_metrics_loop(*args)
    return _face_metrics_numpy(*args)


# ------------------------------------------------------- stiffness triplets


def _stiffness_numpy(vertices, faces, diffusivity, sin_floor):
    nf = faces.shape[0]
    p = vertices[faces]
    rows = np.empty((nf, 3, 4), dtype=np.int64)
    cols = np.empty((nf, 3, 4), dtype=np.int64)
    vals = np.empty((nf, 3, 4))
    floored = np.zeros((nf, 3), dtype=bool)
    for corner in range(3):
        i = (corner + 1) % 3
        j = (corner + 2) % 3
        eki = p[:, i] - p[:, corner]
        ekj = p[:, j] - p[:, corner]
        eki /= np.linalg.norm(eki, axis=1, keepdims=True)
        ekj /= np.linalg.norm(ekj, axis=1, keepdims=True)
        sin = np.linalg.norm(np.cross(ekj, eki), axis=1)
        low = sin < sin_floor
        floored[:, corner] = low
        sin = np.where(low, sin_floor, sin)
        w = 0.5 * np.einsum("fi,fij,fj->f", ekj, diffusivity, eki) / sin
        vi, vj = faces[:, i], faces[:, j]
        rows[:, corner] = np.column_stack([vi, vj, vi, vj])
        cols[:, corner] = np.column_stack([vj, vi, vi, vj])
        vals[:, corner] = np.column_stack([w, w, -w, -w])
    return rows.ravel(), cols.ravel(), vals.ravel(), floored


@njit
def _stiffness_loop(vertices, faces, diffusivity, sin_floor):
    nf = faces.shape[0]
    rows = np.empty((nf, 3, 4), dtype=np.int64)
    cols = np.empty((nf, 3, 4), dtype=np.int64)
    vals = np.empty((nf, 3, 4))
    floored = np.zeros((nf, 3), dtype=np.bool_)
    eki = np.empty(3)
    ekj = np.empty(3)
    for f in range(nf):
        for corner in range(3):
            k = faces[f, corner]
            vi = faces[f, (corner + 1) % 3]
            vj = faces[f, (corner + 2) % 3]
            ni = 0.0
            nj = 0.0
            for a in range(3):
                eki[a] = vertices[vi, a] - vertices[k, a]
                ekj[a] = vertices[vj, a] - vertices[k, a]
                ni += eki[a] * eki[a]
                nj += ekj[a] * ekj[a]
            ni = np.sqrt(ni)
            nj = np.sqrt(nj)
            for a in range(3):
                eki[a] /= ni
                ekj[a] /= nj
            cx = ekj[1] * eki[2] - ekj[2] * eki[1]
            cy = ekj[2] * eki[0] - ekj[0] * eki[2]
            cz = ekj[0] * eki[1] - ekj[1] * eki[0]
            sin = np.sqrt(cx * cx + cy * cy + cz * cz)
            if sin < sin_floor:
                floored[f, corner] = True
                sin = sin_floor
            q = 0.0
            for a in range(3):
                acc = 0.0
                for b in range(3):
                    acc += diffusivity[f, a, b] * eki[b]
                q += ekj[a] * acc
            w = 0.5 * q / sin
            rows[f, corner, 0] = vi
            cols[f, corner, 0] = vj
            rows[f, corner, 1] = vj
            cols[f, corner, 1] = vi
            rows[f, corner, 2] = vi
            cols[f, corner, 2] = vi
            rows[f, corner, 3] = vj
            cols[f, corner, 3] = vj
            vals[f, corner, 0] = w
            vals[f, corner, 1] = w
            vals[f, corner, 2] = -w
            vals[f, corner, 3] = -w
    return rows.ravel(), cols.ravel(), vals.ravel(), floored


def stiffness_triplets(vertices, faces, diffusivity, sin_floor=SIN_FLOOR, backend=None):
    """COO triplets of the anisotropic cotangent stiffness matrix.

    For every face corner ``k`` with opposite side ``(i, j)`` the contribution
    ``w = 0.5 * <e_kj, e_ki>_D / sin(angle_k)`` goes to ``W_ij``, ``W_ji`` and
    ``-w`` to ``W_ii``, ``W_jj``. Returns ``(rows, cols, vals, floored)`` where
    ``floored[f, c]`` marks corners whose sine hit ``sin_floor``.
    """
    vertices = np.ascontiguousarray(vertices, dtype=float)
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    diffusivity = np.ascontiguousarray(diffusivity, dtype=float)
    if _resolve(backend) == "numba":
        return _stiffness_loop(vertices, faces, diffusivity, float(sin_floor))
    return _stiffness_numpy(vertices, faces, diffusivity, float(sin_floor))


# --------------------------------------------------------- face -> vertex sum


@njit
def _scatter_loop(faces, values, n_vertices):
    out = np.zeros((n_vertices,) + values.shape[1:])
    flat_out = out.reshape(n_vertices, -1)
    flat_val = values.reshape(values.shape[0], -1)
    for f in range(faces.shape[0]):
        for c in range(3):
            v = faces[f, c]
            for a in range(flat_val.shape[1]):
                flat_out[v, a] += flat_val[f, a]
    return out


def scatter_faces_to_vertices(faces, values, n_vertices, backend=None):
    """``out[v] = sum of values[f]`` over faces ``f`` incident to ``v``."""
    faces = np.ascontiguousarray(faces, dtype=np.int64)
    values = np.ascontiguousarray(values, dtype=float)
    if _resolve(backend) == "numba":
        return _scatter_loop(faces, values, int(n_vertices))
    out = np.zeros((n_vertices,) + values.shape[1:])
    for c in range(3):
        np.add.at(out, faces[:, c], values)
    return out
