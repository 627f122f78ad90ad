import numpy as np
import pytest

from flbo import fixtures
from flbo.diffusion import (
    DiffusionConfig,
    divergence_of_field,
    drift_source,
    implicit_euler_diffuse,
    loglog_slope,
    nonlinear_finsler_rhs,
    simplification_sweep,
    simplified_finsler_rhs,
    simplified_randers_solve,
)
from flbo.exceptions import ConfigurationError, MalformedInputError
from flbo.geometry import face_gradient
from flbo.operators import AnisotropyParams, FaceMetricField, assemble_flbo
from flbo.spectral import eigensolve, heat_propagate


@pytest.fixture(scope="module")
def pair():
    return assemble_flbo(fixtures.icosphere(2), AnisotropyParams(), 0.0)


@pytest.fixture(scope="module")
def basis(pair):
    return eigensolve(pair, pair.n)


def _rel_l2(a, b, s):
    return np.sqrt(s @ (a - b) ** 2 / (s @ b**2))


def test_divergence_of_gradient_is_cotan(sphere2, rng):
    iso = assemble_flbo(sphere2, AnisotropyParams(0.0, 0.0, 1), 0.0)
    u = rng.standard_normal(sphere2.n_vertices)
    div = divergence_of_field(sphere2, face_gradient(sphere2, u), iso.mass)
    np.testing.assert_allclose(div, (iso.stiffness @ u) / iso.mass, atol=1e-10 * np.abs(div).max())


def test_divergence_theorem_on_disk():
    mesh = fixtures.disk()
    field = np.zeros((mesh.n_faces, 3))
    field[:, :2] = mesh.vertices[mesh.faces].mean(axis=1)[:, :2]
    div = divergence_of_field(mesh, field)
    interior = ~mesh.boundary_vertices
    np.testing.assert_allclose(div[interior], 2.0, rtol=1e-9)


def test_implicit_euler_matches_spectral(pair, basis, rng):
    f0 = rng.uniform(size=pair.n)
    stepped, history = implicit_euler_diffuse(pair, f0, DiffusionConfig(0.1, 1000), return_history=True)
    assert _rel_l2(stepped, heat_propagate(basis, f0, 0.1), pair.mass) < 1e-3
    np.testing.assert_allclose(history, history[0], rtol=1e-10)


def test_source_solutions_agree(pair, basis, rng):
    f0 = rng.uniform(size=pair.n)
    spectral = simplified_randers_solve(pair, pair.field, f0, 0.1, basis=basis)
    stepped = implicit_euler_diffuse(pair, f0, DiffusionConfig(0.1, 1000, source_enabled=True),
                                     source=drift_source(pair))
    assert _rel_l2(stepped, spectral, pair.mass) < 1e-3


def test_source_has_zero_mean(pair):
    # divergence of a field on a closed surface integrates to zero
    assert pair.mass @ drift_source(pair) == pytest.approx(0.0, abs=1e-12)


def test_no_drift_means_no_source(sphere2):
    pair = assemble_flbo(sphere2, AnisotropyParams(10.0, 0.0), 0.0)
    np.testing.assert_array_equal(drift_source(pair), 0.0)


@pytest.mark.parametrize("kw", [dict(t_final=-1.0), dict(t_final=1.0, n_steps=0), dict(t_final=1.0, scheme="rk4")])
def test_bad_diffusion_config(kw):
    with pytest.raises(ConfigurationError):
        DiffusionConfig(**kw)


def test_wrong_length(pair):
    with pytest.raises(MalformedInputError):
        implicit_euler_diffuse(pair, np.ones(3), DiffusionConfig(0.1, 10))


@pytest.mark.parametrize("scale", [1.0, 2.5])
def test_nonlinear_rhs_without_drift(sphere2, rng, scale):
    # with omega = 0 and an isotropic metric both right-hand sides reduce to S^-1 W u
    fld = FaceMetricField.uniform(sphere2.n_faces, np.eye(3) / scale, np.zeros(3))
    u = rng.standard_normal(sphere2.n_vertices)
    nl = nonlinear_finsler_rhs(sphere2, fld, u)
    lin = simplified_finsler_rhs(sphere2, fld, u)
    iso = assemble_flbo(sphere2, AnisotropyParams(0.0, 0.0, 1), 0.0)
    expected = scale * (iso.stiffness @ u) / iso.mass
    np.testing.assert_allclose(nl.values, expected, atol=1e-10 * np.abs(expected).max())
    np.testing.assert_allclose(lin.values, expected, atol=1e-10 * np.abs(expected).max())


def test_flat_gradient_faces_flagged(sphere2):
    fld = FaceMetricField.uniform(sphere2.n_faces, np.eye(3), [0.1, 0, 0])
    res = nonlinear_finsler_rhs(sphere2, fld, np.ones(sphere2.n_vertices))
    assert len(res.flagged_faces) == sphere2.n_faces
    np.testing.assert_array_equal(res.flux, 0.0)


def test_loglog_slope():
    eps = np.array([0.1, 0.05, 0.025])
    assert loglog_slope(eps, 3 * eps**2) == pytest.approx(2.0)


def test_simplification_sweep_is_first_order():
    # the gap shrinks linearly with the drift
    sweep = simplification_sweep(fixtures.flat_strip())
    assert sweep.flagged_faces == 0
    assert np.all(np.diff(sweep.gaps) < 0)
    assert sweep.slope == pytest.approx(1.0, abs=0.05)
