"""Invariant and oracle suite run by ``flbo validate``.

Each check is a function ``check(ctx) -> dict`` of measured quantities plus a
``passed`` flag. Checks never raise: an exception is recorded as a failure
with its message. Seeds only drive the random samples inside checks.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import fixtures
from .diffusion import (
    DiffusionConfig,
    drift_source,
    implicit_euler_diffuse,
    simplification_sweep,
    simplified_randers_solve,
)
from .operators import AnisotropyParams, assemble_albo, assemble_flbo, assemble_stiffness
from .oracles import chebyshev_trig, cotan_laplacian_reference, random_rigid_motion, trapezoid_time_average
from .randers import (
    dual_randers,
    dual_via_block_inverse,
    eval_dual_definition,
    random_metric,
)
from .spectral import (
    FilterSpec,
    anisotropic_convolve,
    chebyshev_eval,
    directional_sum_convolve,
    eigensolve,
    finsler_hks,
    heat_kernel,
    heat_propagate,
    time_averaged_heat_kernel,
)

logger = logging.getLogger(__name__)

N_METRICS = 1000
DUAL_SAMPLES = 10_000


@dataclass
class Context:
    seed: int = 0
    params: AnisotropyParams = field(default_factory=AnisotropyParams)
    inject: str | None = None
    icosphere_level: int = 3

    def rng(self, salt=0):
        return np.random.default_rng([self.seed, salt])

    def assemble(self, mesh, params, theta, **kw):
        pair = assemble_flbo(mesh, params, theta, **kw)
        if self.inject == "w-sign":
            pair.stiffness = -pair.stiffness
        return pair


@dataclass
class CheckResult:
    name: str
    passed: bool
    seconds: float
    metrics: dict
    error: str | None = None

    def to_dict(self):
        out = {"test": self.name, "passed": self.passed, "seconds": round(self.seconds, 3)}
        out.update(self.metrics)
        if self.error:
            out["error"] = self.error
        return out


def _rel(a, b):
    a, b = np.asarray(a), np.asarray(b)
    return float(np.abs(a - b).max() / max(np.abs(b).max(), np.finfo(float).tiny))


def _rel_l2(a, b, mass):
    d = a - b
    return float(np.sqrt((mass @ d**2) / (mass @ b**2)))


def _sparse_rel(a, b):
    diff = abs(a - b).max()
    return float(diff / abs(b).max())


# ---------------------------------------------------------------- checks


def check_randers_duality(ctx):
    """Closed form vs bordered inverse vs brute force; involution."""
    t0 = time.perf_counter()
    rng = ctx.rng(1)
    block_err = brute_err = invol_err = 0.0
    for _ in range(N_METRICS):
        metric = random_metric(rng)
        d = dual_randers(metric)
        b = dual_via_block_inverse(metric)
        block_err = max(block_err, _rel(d.m_star, b.m_star),
                        _rel(d.omega_star, b.omega_star) if np.any(b.omega_star) else 0.0,
                        abs(d.randers_alpha - b.randers_alpha) / b.randers_alpha)
        v = rng.standard_normal(3)
        brute = eval_dual_definition(metric, v, DUAL_SAMPLES)
        closed = d(v)
        brute_err = max(brute_err, abs(brute - closed) / abs(closed))
        back = dual_randers(d.as_metric())
        invol_err = max(invol_err, _rel(back.m_star, metric.m),
                        float(np.abs(back.omega_star - metric.omega).max() / np.abs(metric.m).max()))
    seconds = time.perf_counter() - t0
    return {
        "block_inverse_rel": block_err,
        "brute_force_rel": brute_err,
        "involution_rel": invol_err,
        "runtime_s": seconds,
        "passed": block_err <= 1e-10 and brute_err <= 2e-3 and invol_err <= 1e-10 and seconds < 10.0,
    }


def check_drift_bound(ctx):
    rng = ctx.rng(1)
    worst, largest = 0.0, 0.0
    for _ in range(N_METRICS):
        metric = random_metric(rng)
        d = dual_randers(metric)
        q = metric.drift_norm_sq / d.randers_alpha
        measured = d.drift_norm_sq
        worst = max(worst, abs(measured - q / (1.0 + q)))
        largest = max(largest, measured)
    return {"max_abs_error": worst, "max_dual_drift_sq": largest,
            "passed": worst <= 1e-10 and largest < 1.0}


def check_reduction_chain(ctx):
    iso = AnisotropyParams(0.0, 0.0, 1)
    out = {}
    meshes = {
        "square": fixtures.two_triangle_square(),
        "equilateral": fixtures.equilateral_pair(),
        "icosphere": fixtures.icosphere(ctx.icosphere_level),
    }
    ok = True
    for name, mesh in meshes.items():
        w = ctx.assemble(mesh, iso, 0.0).stiffness
        ref = cotan_laplacian_reference(mesh.vertices, mesh.faces)
        err = _sparse_rel(w, ref)
        out[f"cotan_rel_{name}"] = err
        ok &= err <= 1e-12
    w = ctx.assemble(meshes["equilateral"], iso, 0.0).stiffness
    out["equilateral_weight"] = float(w[0, 1])
    ok &= abs(w[0, 1] - 1.0 / np.sqrt(3.0)) <= 1e-12

    mesh = meshes["icosphere"]
    no_drift = AnisotropyParams(ctx.params.anisotropy_level, 0.0, ctx.params.n_angles)
    albo_err = 0.0
    for theta in no_drift.theta_values:
        w_flbo = ctx.assemble(mesh, no_drift, theta).stiffness
        w_albo = assemble_albo(mesh, no_drift, theta).stiffness
        albo_err = max(albo_err, _sparse_rel(w_flbo, w_albo))
    out["albo_rel"] = albo_err
    out["passed"] = bool(ok and albo_err <= 1e-10)
    return out


def _min_generalized_eig(pair):
    s = 1.0 / np.sqrt(pair.mass)
    a = (-pair.stiffness).toarray() * s[:, None] * s[None, :]
    vals = scipy.linalg.eigvalsh(0.5 * (a + a.T))
    return float(vals[0]), float(vals[-1])


def check_operator_invariants(ctx):
    t0 = time.perf_counter()
    mesh = fixtures.icosphere(ctx.icosphere_level)
    from .geometry import estimate_curvature_frames

    frames = estimate_curvature_frames(mesh)
    sym = rows = 0.0
    worst_psd = np.inf
    n_combos = 0
    for a in (0.0, 1.0, 10.0):
        for tau in (0.0, 0.1, 0.5):
            params = AnisotropyParams(a, tau, 8)
            for theta in params.theta_values:
                pair = ctx.assemble(mesh, params, theta, frames=frames)
                w = pair.stiffness
                scale = abs(w).max()
                sym = max(sym, abs(w - w.T).max() / scale)
                rows = max(rows, float(np.abs(np.asarray(w.sum(axis=1))).max() / scale))
                lo, hi = _min_generalized_eig(pair)
                worst_psd = min(worst_psd, lo / max(abs(hi), abs(lo)))
                n_combos += 1
    seconds = time.perf_counter() - t0
    return {
        "combinations": n_combos,
        "symmetry_rel": float(sym),
        "row_sum_rel": rows,
        "min_eig_over_lambda_max": worst_psd,
        "runtime_s": seconds,
        "passed": bool(sym <= 1e-10 and rows <= 1e-10 and worst_psd >= -1e-9 and seconds < 120.0),
    }


def check_spectrum_sanity(ctx):
    mesh = fixtures.icosphere(4)
    pair = ctx.assemble(mesh, AnisotropyParams(0.0, 0.0, 1), 0.0)
    basis = eigensolve(pair, 9, seed=ctx.seed)
    lam = basis.eigenvalues
    expected = np.array([2.0] * 3 + [6.0] * 5)
    rel = np.abs(lam[1:9] - expected) / expected
    ortho = float(np.abs(basis.eigenvectors.T @ (basis.mass[:, None] * basis.eigenvectors) - np.eye(9)).max())
    lam0 = float(abs(lam[0]) / basis.lambda_max_estimate)
    return {
        "eigenvalues": lam.tolist(),
        "max_rel_dev_from_l(l+1)": float(rel.max()),
        "lambda0_over_lambda_max": lam0,
        "s_orthonormality": ortho,
        "passed": bool(rel.max() <= 0.05 and lam0 <= 1e-9 and ortho <= 1e-8),
    }


def _icosphere_pair(ctx):
    mesh = fixtures.icosphere(ctx.icosphere_level)
    pair = ctx.assemble(mesh, ctx.params, 0.0)
    return mesh, pair


def check_heat_cross_oracle(ctx):
    t0 = time.perf_counter()
    mesh, pair = _icosphere_pair(ctx)
    basis = eigensolve(pair, mesh.n_vertices, seed=ctx.seed)
    f0 = ctx.rng(6).uniform(0.0, 1.0, mesh.n_vertices)
    spectral = heat_propagate(basis, f0, 0.1)
    stepped, history = implicit_euler_diffuse(pair, f0, DiffusionConfig(0.1, 1000), return_history=True)
    err = _rel_l2(stepped, spectral, pair.mass)
    drift = float(np.abs(history - history[0]).max() / abs(history[0]))
    twice = heat_propagate(basis, heat_propagate(basis, f0, 0.03), 0.07)
    once = heat_propagate(basis, f0, 0.1)
    semigroup = _rel(twice, once)
    seconds = time.perf_counter() - t0
    return {
        "rel_l2": err, "heat_drift_rel": drift, "semigroup_rel": semigroup, "runtime_s": seconds,
        "passed": bool(err <= 1e-3 and drift <= 1e-10 and semigroup <= 1e-10 and seconds < 60.0),
    }


def check_time_averaged_kernel(ctx):
    mesh = fixtures.icosphere(1)
    pair = ctx.assemble(mesh, ctx.params, 0.0)
    basis = eigensolve(pair, mesh.n_vertices)
    t, x = 0.1, 0
    closed = time_averaged_heat_kernel(basis, t, x)
    quad = trapezoid_time_average(lambda s: heat_kernel(basis, s, x), t, 1000)
    err = _rel(quad, closed)
    return {"n_vertices": mesh.n_vertices, "rel": err, "passed": err <= 1e-6}


def check_source_term(ctx):
    mesh, pair = _icosphere_pair(ctx)
    basis = eigensolve(pair, mesh.n_vertices, seed=ctx.seed)
    f0 = ctx.rng(8).uniform(0.0, 1.0, mesh.n_vertices)
    spectral = simplified_randers_solve(pair, pair.field, f0, 0.1, basis=basis)
    stepped = implicit_euler_diffuse(pair, f0, DiffusionConfig(0.1, 1000, source_enabled=True),
                                     source=drift_source(pair))
    err = _rel_l2(stepped, spectral, pair.mass)
    src = drift_source(pair)
    return {"rel_l2": err, "source_max_abs": float(np.abs(src).max()), "passed": bool(err <= 1e-3)}


def check_simplification_order(ctx):
    sweep = simplification_sweep(fixtures.flat_strip())
    return {
        "eps": sweep.eps.tolist(),
        "gaps": sweep.gaps.tolist(),
        "slope": sweep.slope,
        "flagged_faces": sweep.flagged_faces,
        "passed": bool(sweep.slope >= 1.8),
    }


def check_filter_identities(ctx):
    rng = ctx.rng(10)
    x = rng.uniform(-1.0, 1.0, 1000)
    coeffs = rng.standard_normal(16)
    trig = chebyshev_trig(x, coeffs)
    cheb_err = float(np.abs(chebyshev_eval(x, coeffs) - trig).max() / np.abs(coeffs).sum())

    mesh = fixtures.icosphere(1)
    params = AnisotropyParams(ctx.params.anisotropy_level, ctx.params.tau, ctx.params.n_angles)
    bases = [eigensolve(ctx.assemble(mesh, params, th), mesh.n_vertices) for th in params.theta_values]
    f1 = rng.standard_normal(mesh.n_vertices)
    f2 = rng.standard_normal(mesh.n_vertices)
    ident = FilterSpec([1.0] + [0.0] * 15)
    identity_err = _rel(anisotropic_convolve(bases[0], f1, ident), f1)
    specs = [FilterSpec(rng.standard_normal(16)) for _ in bases]
    a = 0.7
    lhs = directional_sum_convolve(bases, a * f1 + f2, specs)
    rhs = a * directional_sum_convolve(bases, f1, specs) + directional_sum_convolve(bases, f2, specs)
    lin_err = _rel(lhs, rhs)
    return {
        "chebyshev_vs_trig": cheb_err,
        "identity_filter_rel": identity_err,
        "linearity_rel": lin_err,
        "passed": bool(cheb_err <= 1e-12 and identity_err <= 1e-10 and lin_err <= 1e-12),
    }


def check_descriptor_invariance(ctx):
    times = np.geomspace(0.01, 1.0, 8)
    mesh = fixtures.icosphere(ctx.icosphere_level)
    rot, shift = random_rigid_motion(ctx.rng(11))
    moved = mesh.transformed(rot, shift)
    desc = [finsler_hks(eigensolve(ctx.assemble(m, ctx.params, 0.0), m.n_vertices), times)
            for m in (mesh, moved)]
    motion_err = _rel(desc[1], desc[0])

    tet = fixtures.regular_tetrahedron()
    d = finsler_hks(eigensolve(ctx.assemble(tet, AnisotropyParams(0.0, 0.0, 1), 0.0), 4), times)
    tet_err = float(np.abs(d - d[0]).max())
    return {"rigid_motion_rel": motion_err, "tetrahedron_row_spread": tet_err,
            "passed": bool(motion_err <= 1e-6 and tet_err <= 1e-8)}


CHECKS = {
    "randers_duality": check_randers_duality,
    "drift_bound": check_drift_bound,
    "reduction_chain": check_reduction_chain,
    "operator_invariants": check_operator_invariants,
    "spectrum_sanity": check_spectrum_sanity,
    "heat_cross_oracle": check_heat_cross_oracle,
    "time_averaged_kernel": check_time_averaged_kernel,
    "source_term": check_source_term,
    "simplification_order": check_simplification_order,
    "filter_identities": check_filter_identities,
    "descriptor_invariance": check_descriptor_invariance,
}


def run_check(name, ctx):
    t0 = time.perf_counter()
    try:
        metrics = CHECKS[name](ctx)
        passed = bool(metrics.pop("passed"))
        error = None
    except Exception as exc:  # noqa: BLE001 - a crashing check is a failed check
        logger.exception("check %s raised", name)
        metrics, passed, error = {}, False, f"{type(exc).__name__}: {exc}"
    return CheckResult(name, passed, time.perf_counter() - t0, _jsonable(metrics), error)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    return obj


def run_validation(seed=0, params=None, inject=None, only=None, icosphere_level=3):
    """Run the suite; returns ``(all_passed, [CheckResult, ...])``."""
    ctx = Context(seed=seed, params=params or AnisotropyParams(), inject=inject,
                  icosphere_level=icosphere_level)
    names = list(CHECKS) if only is None else list(only)
    results = []
    for name in names:
        res = run_check(name, ctx)
        logger.info("%-22s %s (%.1fs)", name, "PASS" if res.passed else "FAIL", res.seconds)
        results.append(res)
    return all(r.passed for r in results), results


__all__ = ["CHECKS", "CheckResult", "Context", "run_check", "run_validation", "assemble_stiffness"]
