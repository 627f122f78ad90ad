import numpy as np
import pytest
import scipy.linalg

from flbo import fixtures
from flbo.exceptions import AssemblyError, ConfigurationError
from flbo.geometry import estimate_curvature_frames
from flbo.operators import (
    AnisotropyParams,
    FaceMetricField,
    assemble_albo,
    assemble_family,
    assemble_flbo,
    assemble_mass,
    assemble_stiffness,
    build_face_randers,
    build_shear,
    export_family,
    load_family,
    read_stiffness,
)
from flbo.oracles import cotan_laplacian_reference
from flbo.randers import dual_randers, finsler_diffusivity

ISO = AnisotropyParams(0.0, 0.0, 1)


def _rel(a, b):
    return abs(a - b).max() / abs(b).max()


@pytest.mark.parametrize("name", ["square", "equilateral", "icosphere2", "disk", "ellipsoid"])
def test_isotropic_is_cotan(name):
    mesh = fixtures.fixture(name)
    w = assemble_flbo(mesh, ISO, 0.0).stiffness
    assert _rel(w, cotan_laplacian_reference(mesh.vertices, mesh.faces)) <= 1e-12


def test_known_weights():
    w = assemble_flbo(fixtures.equilateral_pair(), ISO, 0.0).stiffness
    assert w[0, 1] == pytest.approx(1 / np.sqrt(3), abs=1e-14)
    # right angles opposite the diagonal of the square: zero weight
    sq = fixtures.two_triangle_square()
    w = assemble_flbo(sq, ISO, 0.0).stiffness.toarray()
    diag_edge = [e for e in sq.edges if e[1] - e[0] == 2][0]
    assert abs(w[diag_edge[0], diag_edge[1]]) < 1e-15


@pytest.mark.parametrize("a, tau", [(0.0, 0.0), (1.0, 0.1), (10.0, 0.5)])
def test_operator_invariants(sphere2, a, tau):
    params = AnisotropyParams(a, tau, 4)
    for pair in assemble_family(sphere2, params):
        w = pair.stiffness
        assert abs(w - w.T).max() == 0.0
        np.testing.assert_allclose(np.asarray(w.sum(axis=1)).ravel(), 0.0, atol=1e-12 * abs(w).max())
        vals = scipy.linalg.eigh(-w.toarray(), np.diag(pair.mass), eigvals_only=True)
        assert vals[0] >= -1e-9 * vals[-1]


def test_mass_is_a_third_of_incident_area(sphere2):
    mass = assemble_mass(sphere2)
    assert mass.sum() == pytest.approx(sphere2.total_area)
    v = 7
    incident = np.any(sphere2.faces == v, axis=1)
    assert mass[v] == pytest.approx(sphere2.face_areas[incident].sum() / 3)


def test_no_drift_matches_albo(sphere2):
    params = AnisotropyParams(10.0, 0.0, 8)
    for theta in params.theta_values:
        a = assemble_flbo(sphere2, params, theta).stiffness
        b = assemble_albo(sphere2, params, theta).stiffness
        assert (a != b).nnz == 0


def test_drift_changes_operator(sphere2):
    a = assemble_flbo(sphere2, AnisotropyParams(10.0, 0.0), 0.0).stiffness
    b = assemble_flbo(sphere2, AnisotropyParams(10.0, 0.5), 0.0).stiffness
    assert _rel(a, b) > 1e-3


def test_field_matches_reference_path(sphere2):
    frames = estimate_curvature_frames(sphere2)
    params = AnisotropyParams(10.0, 0.1)
    pair = assemble_flbo(sphere2, params, 0.5, frames=frames)
    for f in (0, 17, 300):
        metric, d = build_face_randers(frames[f], params, 0.5)
        np.testing.assert_allclose(pair.field.diffusivity[f], d, rtol=1e-12, atol=1e-14)
        np.testing.assert_allclose(pair.field.m[f], metric.m, rtol=1e-12)
        np.testing.assert_allclose(d, finsler_diffusivity(dual_randers(metric)), rtol=1e-10)
        np.testing.assert_allclose(build_shear(frames[f], 10.0, 0.5), pair.field.shear[f], atol=1e-14)


def test_shear_eigenvalues():
    h = build_shear(np.eye(3), 10.0, 0.3)
    np.testing.assert_allclose(np.linalg.eigvalsh(h), [1 / 11, 1, 1], atol=1e-15)


def test_angles_cover_half_circle():
    np.testing.assert_allclose(AnisotropyParams(10, 0.1, 4).theta_values, [0, np.pi / 4, np.pi / 2, 3 * np.pi / 4])


@pytest.mark.parametrize("kw", [dict(anisotropy_level=-1), dict(tau=-0.1), dict(n_angles=0)])
def test_bad_params(kw):
    with pytest.raises(ConfigurationError):
        AnisotropyParams(**kw)


def test_uniform_field_rejects_large_drift():
    with pytest.raises(ConfigurationError):
        FaceMetricField.uniform(3, np.eye(3), [1.0, 0.0, 0.0])


def test_shape_mismatch(sphere2):
    with pytest.raises(AssemblyError):
        assemble_stiffness(sphere2, np.zeros((5, 3, 3)))


def test_sliver_reported():
    verts = np.array([[0, 0, 0], [1, 0, 0], [0.5, 1e-5, 0], [0.5, -1, 0]], dtype=float)
    faces = np.array([[0, 1, 2], [1, 0, 3]])
    from flbo.mesh import TriangleMesh

    pair = assemble_flbo(TriangleMesh(verts, faces), ISO, 0.0)
    assert np.all(np.isfinite(pair.stiffness.data))


def test_export_round_trip(tmp_path, sphere2):
    pairs = assemble_family(sphere2, AnisotropyParams(10.0, 0.1, 3))
    paths = export_family(pairs, tmp_path, "op")
    assert len(paths) == 1 + 3 + 1
    back = load_family(tmp_path, "op")
    assert len(back) == 3
    for a, b in zip(pairs, back):
        assert (a.stiffness != b.stiffness).nnz == 0
        np.testing.assert_array_equal(a.mass, b.mass)
        assert a.theta == pytest.approx(b.theta)
    assert (read_stiffness(tmp_path / "op_theta0.W.mtx") != pairs[0].stiffness).nnz == 0


def test_load_missing(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_family(tmp_path, "nothing")


@pytest.mark.parametrize("backend", ["numpy", "numba"])
def test_backends_give_same_operator(sphere2, backend):
    params = AnisotropyParams(10.0, 0.1)
    ref = assemble_flbo(sphere2, params, 0.4, backend="numpy").stiffness
    w = assemble_flbo(sphere2, params, 0.4, backend=backend).stiffness
    assert _rel(w, ref) <= 1e-12
