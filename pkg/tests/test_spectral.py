import numpy as np
import pytest

from flbo import fixtures
from flbo.exceptions import ConfigurationError, MalformedInputError
from flbo.operators import AnisotropyParams, assemble_family, assemble_flbo
from flbo.oracles import chebyshev_trig
from flbo.spectral import (
    FilterSpec,
    anisotropic_convolve,
    chebyshev_eval,
    chebyshev_filter,
    directional_sum_convolve,
    eigen_residual,
    eigensolve,
    finsler_hks,
    fit_chebyshev,
    heat_kernel,
    heat_propagate,
    read_eigenvalues_csv,
    read_field_csv,
    time_averaged_heat_kernel,
    time_averaged_weights,
    write_descriptor_csv,
    write_eigenvalues_csv,
    write_eigenvectors,
    write_field_csv,
)

ISO = AnisotropyParams(0.0, 0.0, 1)


@pytest.fixture(scope="module")
def aniso_pair():
    return assemble_flbo(fixtures.icosphere(2), AnisotropyParams(), 0.0)


@pytest.fixture(scope="module")
def full_basis(aniso_pair):
    return eigensolve(aniso_pair, aniso_pair.n)


def test_sphere_spectrum():
    pair = assemble_flbo(fixtures.icosphere(3), ISO, 0.0)
    basis = eigensolve(pair, 9, dense_max_n=100)
    assert abs(basis.eigenvalues[0]) <= 1e-9 * basis.lambda_max_estimate
    np.testing.assert_allclose(basis.eigenvalues[1:4], 2.0, rtol=0.05)
    np.testing.assert_allclose(basis.eigenvalues[4:9], 6.0, rtol=0.05)


def test_sparse_and_dense_agree(aniso_pair):
    dense = eigensolve(aniso_pair, 12)
    sparse = eigensolve(aniso_pair, 12, dense_max_n=10)
    np.testing.assert_allclose(sparse.eigenvalues, dense.eigenvalues, rtol=1e-9, atol=1e-10)
    assert sparse.lambda_max_estimate == pytest.approx(dense.lambda_max_estimate, rel=1e-6)


def test_mass_orthonormal(full_basis):
    phi, s = full_basis.eigenvectors, full_basis.mass
    np.testing.assert_allclose(phi.T @ (s[:, None] * phi), np.eye(full_basis.k), atol=1e-10)


def test_residual_and_order(aniso_pair, full_basis):
    assert eigen_residual(aniso_pair, full_basis) < 1e-9
    assert np.all(np.diff(full_basis.eigenvalues) >= -1e-12)


def test_deterministic_signs(aniso_pair):
    a = eigensolve(aniso_pair, 10, dense_max_n=10, seed=1)
    b = eigensolve(aniso_pair, 10, dense_max_n=10, seed=2)
    # the simple eigenvalues have sign-fixed vectors that agree across seeds
    simple = np.flatnonzero(np.abs(np.diff(a.eigenvalues, prepend=-1, append=np.inf)[:-1]) > 1e-6)
    simple = [i for i in simple if i + 1 < a.k and a.eigenvalues[i + 1] - a.eigenvalues[i] > 1e-6]
    for i in simple:
        np.testing.assert_allclose(a.eigenvectors[:, i], b.eigenvectors[:, i], atol=1e-7)


def test_bad_k(aniso_pair):
    with pytest.raises(ConfigurationError):
        eigensolve(aniso_pair, 0)
    with pytest.raises(ConfigurationError):
        eigensolve(aniso_pair, aniso_pair.n + 1)


def test_heat_semigroup_and_conservation(full_basis, rng):
    f = rng.uniform(size=full_basis.n)
    a = heat_propagate(full_basis, heat_propagate(full_basis, f, 0.05), 0.15)
    b = heat_propagate(full_basis, f, 0.2)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-12)
    s = full_basis.mass
    assert s @ b == pytest.approx(s @ f, rel=1e-10)
    np.testing.assert_allclose(heat_propagate(full_basis, f, 0.0), f, atol=1e-10)


def test_heat_kernel_symmetric(full_basis):
    h = np.stack([heat_kernel(full_basis, 0.1, x) for x in range(5)])
    np.testing.assert_allclose(h[:, :5], h[:, :5].T, atol=1e-13)


def test_time_averaged_weights():
    lam = np.array([0.0, 1e-20, 1.0, 10.0])
    g = time_averaged_weights(lam, 0.5, 10.0)
    np.testing.assert_allclose(g, [0.5, 0.5, 1 - np.exp(-0.5), (1 - np.exp(-5)) / 10])


def test_time_averaged_kernel_derivative(full_basis):
    # d/dt of the averaged kernel is the kernel itself
    t, dt = 0.2, 1e-5
    lhs = (time_averaged_heat_kernel(full_basis, t + dt, 3) - time_averaged_heat_kernel(full_basis, t - dt, 3)) / (2 * dt)
    np.testing.assert_allclose(lhs, heat_kernel(full_basis, t, 3), rtol=1e-6, atol=1e-8)


def test_negative_time(full_basis):
    with pytest.raises(ConfigurationError):
        heat_propagate(full_basis, np.ones(full_basis.n), -1.0)


def test_chebyshev_matches_trig(rng):
    x = np.concatenate([rng.uniform(-1, 1, 500), [-1.0, 1.0, 0.0]])
    c = rng.standard_normal(16)
    np.testing.assert_allclose(chebyshev_eval(x, c), chebyshev_trig(x, c), atol=1e-12 * np.abs(c).sum())
    assert chebyshev_eval(x, [2.5]) == pytest.approx(2.5)


def test_filter_spectrum_in_range(full_basis):
    lam = 2 * full_basis.eigenvalues / full_basis.lambda_max_estimate - 1
    assert lam.min() >= -1 - 1e-12 and lam.max() <= 1
    spec = FilterSpec([0.0, 1.0])
    np.testing.assert_allclose(chebyshev_filter(full_basis, spec), lam)


def test_identity_filter(full_basis, rng):
    f = rng.standard_normal(full_basis.n)
    np.testing.assert_allclose(anisotropic_convolve(full_basis, f, FilterSpec([1.0] + [0.0] * 15)), f, atol=1e-10)


def test_fit_chebyshev_heat():
    lam_max = 20.0
    spec = fit_chebyshev(lambda lam: np.exp(-0.3 * lam), lam_max, 16)
    lam = np.linspace(0, lam_max, 50)
    np.testing.assert_allclose(chebyshev_eval(2 * lam / lam_max - 1, spec.coeffs), np.exp(-0.3 * lam), atol=1e-9)


def test_directional_sum_linear_and_weighted(rng):
    mesh = fixtures.icosphere(1)
    pairs = assemble_family(mesh, AnisotropyParams(10.0, 0.1, 4))
    bases = [eigensolve(p, p.n) for p in pairs]
    f, g = rng.standard_normal((2, mesh.n_vertices))
    spec = FilterSpec(rng.standard_normal(8))
    lhs = directional_sum_convolve(bases, 2 * f - g, spec)
    rhs = 2 * directional_sum_convolve(bases, f, spec) - directional_sum_convolve(bases, g, spec)
    np.testing.assert_allclose(lhs, rhs, atol=1e-12 * np.abs(rhs).max())
    ident = directional_sum_convolve(bases, f, FilterSpec([1.0]))
    np.testing.assert_allclose(ident, np.pi * f, atol=1e-10)


def test_directional_sum_mismatch(full_basis):
    with pytest.raises(MalformedInputError):
        directional_sum_convolve([full_basis, full_basis], np.ones(full_basis.n), [FilterSpec([1.0])])


def test_bad_filter():
    with pytest.raises(ConfigurationError):
        FilterSpec([])
    with pytest.raises(ConfigurationError):
        FilterSpec([np.nan])


def test_hks(full_basis):
    times = np.geomspace(0.01, 1, 8)
    d = finsler_hks(full_basis, times)
    assert d.shape == (full_basis.n, 8)
    assert np.all(d > 0)
    assert np.all(np.diff(d, axis=1) < 0)
    with pytest.raises(ConfigurationError):
        finsler_hks(full_basis, [0.0])


def test_hks_tetrahedron_rows_equal():
    pair = assemble_flbo(fixtures.regular_tetrahedron(), ISO, 0.0)
    d = finsler_hks(eigensolve(pair, 4), np.geomspace(0.01, 1, 8))
    np.testing.assert_allclose(d, np.broadcast_to(d[0], d.shape), atol=1e-8)


def test_csv_round_trips(tmp_path, full_basis):
    write_eigenvalues_csv(full_basis, tmp_path / "ev.csv")
    np.testing.assert_array_equal(read_eigenvalues_csv(tmp_path / "ev.csv"), full_basis.eigenvalues)
    write_eigenvectors(full_basis, tmp_path / "phi.npy")
    np.testing.assert_array_equal(np.load(tmp_path / "phi.npy"), full_basis.eigenvectors)
    f = np.linspace(-1, 1, 7)
    write_field_csv(f, tmp_path / "f.csv")
    np.testing.assert_array_equal(read_field_csv(tmp_path / "f.csv"), f)
    write_descriptor_csv(np.ones((3, 2)), [0.1, 1.0], tmp_path / "d.csv")
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "0.1,1.0"
