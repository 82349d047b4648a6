import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grassmann_cg.diagnostics import fd_gradient_check, fd_hessian_check
from grassmann_cg.manifold import gram, inner, orbital_norm, project_tangent, random_frame
from grassmann_cg.models import QuadraticModel, ToyKohnShamModel
from grassmann_cg.retraction import ortho_qr

from conftest import random_orthogonal, tangent_pair

E = np.eye(4)


@pytest.fixture(scope="module")
def toy():
    return ToyKohnShamModel(32)


def test_quadratic_energy_examples():
    assert QuadraticModel.diagonal([1, 2, 3]).energy(np.eye(3)[:, [0]]) == 0.5
    assert QuadraticModel.diagonal([1, 2, 3, 4]).energy(E[:, :2]) == 1.5


def test_quadratic_gradient_examples():
    m = QuadraticModel.diagonal([1, 2, 3])
    np.testing.assert_array_equal(m.ambient_gradient(np.eye(3)[:, [0]]).ravel(), [1, 0, 0])
    m4 = QuadraticModel.diagonal([1, 2, 3, 4])
    sigma = gram(E[:, [1, 3]], m4.ambient_gradient(E[:, [1, 3]]))
    np.testing.assert_array_equal(sigma, np.diag([2.0, 4.0]))
    np.testing.assert_allclose(m4.grassmann_gradient(E[:, [1, 3]]), 0.0, atol=1e-10)


def test_quadratic_rejects_asymmetric():
    with pytest.raises(ValueError):
        QuadraticModel([[1.0, 2.0], [0.0, 1.0]])


def test_hessian_approx_hand_example():
    m = QuadraticModel.diagonal([1, 2, 3, 4])
    u, v = E[:, [0]], E[:, [2]]
    assert m.hessian_form_approx(u, v, v) == pytest.approx(2.0)
    terms = m.hessian_form_exact(u, v, v)
    assert (terms.hartree, terms.xc) == (0.0, 0.0)
    assert m.hessian_form_approx(u, 0 * v, 0 * v) == 0.0


def test_hessian_hand_example_against_geodesic():
    m = QuadraticModel.diagonal([1, 2, 3, 4])
    u, v = E[:, [0]], E[:, [2]]
    # geodesic cos(t) e1 + sin(t) e3: E = (cos^2 + 3 sin^2)/2, E''(0) = 2
    t = 1e-3
    e = lambda s: m.energy(np.cos(s) * u + np.sin(s) * v)
    assert (e(t) - 2 * e(0) + e(-t)) / t**2 == pytest.approx(2.0, rel=1e-6)


@pytest.mark.parametrize("make", [lambda: QuadraticModel.random_symmetric(12, seed=1),
                                  lambda: ToyKohnShamModel(24)])
def test_rotation_invariance_and_equivariance(rng, make):
    m = make()
    h = m.weight
    u = random_frame(m.geometry.num_points, 3, rng, h)
    q = random_orthogonal(rng, 3)
    e = m.energy(u)
    assert abs(m.energy(u @ q) - e) <= 1e-10 * (1 + abs(e))
    np.testing.assert_allclose(m.grassmann_gradient(u @ q), m.grassmann_gradient(u) @ q, atol=1e-10)
    rec = m.gradient(u)
    assert np.linalg.norm(gram(u, rec.grassmann, h)) <= 1e-10
    raw_sigma = gram(u, rec.ambient, h)
    assert np.linalg.norm(raw_sigma - raw_sigma.T) <= 1e-10
    np.testing.assert_allclose(project_tangent(u, rec.ambient, h), rec.grassmann, atol=1e-12)


def test_toy_density_and_kernel(toy, rng):
    u = random_frame(32, 4, rng, toy.weight)
    rho = toy.density(u)
    assert (rho >= 0).all()
    assert (rho + toy.density_floor > 0).all()
    assert toy.weight * rho.sum() == pytest.approx(4.0)
    k = toy.hartree_kernel
    np.testing.assert_array_equal(k, k.T)
    assert np.linalg.eigvalsh(k).min() > -1e-12


def test_toy_gradient_directional_derivative(toy, rng):
    u = random_frame(32, 4, rng, toy.weight)
    assert fd_gradient_check(toy, u, trials=8, rng=rng) <= 1e-6


def test_quadratic_gradient_check(rng):
    m = QuadraticModel.random_symmetric(20, seed=4)
    assert fd_gradient_check(m, random_frame(20, 3, rng), trials=8, rng=rng) <= 1e-9


def test_toy_energy_decreases_along_negative_gradient(toy, rng):
    u = random_frame(32, 4, rng, toy.weight)
    g = toy.grassmann_gradient(u)
    energies = [toy.energy(ortho_qr(u, -g, tau, toy.weight)) for tau in np.linspace(0, 1e-3, 11)]
    assert all(b < a for a, b in zip(energies, energies[1:]))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_toy_hessian_symmetry_and_geodesic(seed):
    rng = np.random.default_rng(seed)
    toy = ToyKohnShamModel(20)
    h = toy.weight
    u, v = tangent_pair(rng, 20, 3, h)
    w = project_tangent(u, rng.standard_normal(u.shape), h)
    a, b = toy.hessian_form_exact(u, v, w), toy.hessian_form_exact(u, w, v)
    assert a.exact == pytest.approx(b.exact, abs=1e-10)
    assert toy.hessian_form_approx(u, v, w) == pytest.approx(toy.hessian_form_approx(u, w, v), abs=1e-10)
    assert a.exact == pytest.approx(a.main + a.hartree + a.xc, rel=1e-12)
    assert fd_hessian_check(toy, u, v) <= 1e-4


def test_hessian_scales_quadratically(toy, rng):
    u, d = tangent_pair(rng, 32, 4, toy.weight)
    one = toy.hessian_form_exact(u, d, d).exact
    two = toy.hessian_form_exact(u, 2 * d, 2 * d).exact
    assert two == pytest.approx(4 * one, rel=1e-12)


def test_quadratic_hessian_matches_geodesic(rng):
    m = QuadraticModel.random_symmetric(16, seed=8)
    u, d = tangent_pair(rng, 16, 3)
    assert fd_hessian_check(m, u, d) <= 1e-4


def test_gradient_and_inner_consistency(toy, rng):
    u = random_frame(32, 2, rng, toy.weight)
    xi = rng.standard_normal(u.shape)
    g = toy.ambient_gradient(u)
    assert inner(g, xi, toy.weight) == pytest.approx(np.trace(gram(g, xi, toy.weight)))
    assert orbital_norm(g, toy.weight) > 0
