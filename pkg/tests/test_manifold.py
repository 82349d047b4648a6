import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from grassmann_cg.manifold import (GridGeometry, OrbitalSet, geodesic_between,
                                   geodesic_from_direction, gram, grassmann_distance,
                                   orbital_norm, orthonormality_error, project_tangent,
                                   random_frame)

from conftest import random_orthogonal, tangent_pair

E = np.eye(4)


def test_gram_examples():
    np.testing.assert_array_equal(gram(E[:, :2], E[:, :2]), np.eye(2))
    np.testing.assert_array_equal(gram(E[:, 0], E[:, 1]), [[0.0]])
    np.testing.assert_array_equal(gram(E[:, 0], E[:, 0], h=0.5), [[0.5]])


def test_gram_shape_mismatch():
    with pytest.raises(ValueError):
        gram(np.ones((4, 2)), np.ones((5, 2)))


def test_gram_symmetry_and_cauchy_schwarz(rng):
    for _ in range(20):
        a, b = rng.standard_normal((7, 3)), rng.standard_normal((7, 2))
        np.testing.assert_allclose(gram(a, b, 0.3).T, gram(b, a, 0.3), atol=1e-14)
        assert np.linalg.norm(gram(a, b, 0.3)) <= orbital_norm(a, 0.3) * orbital_norm(b, 0.3)


def test_orbital_norm_examples(rng):
    assert orbital_norm(np.zeros((4, 2))) == 0.0
    assert orbital_norm(E[:, :2]) == pytest.approx(np.sqrt(2))
    x = rng.standard_normal((6, 3))
    h = 0.7
    direct = np.sqrt(h * sum(x[k, i] ** 2 for k in range(6) for i in range(3)))
    assert orbital_norm(x, h) == pytest.approx(direct, rel=1e-14)


def test_orbital_norm_of_rotated_frame(rng):
    phi = random_frame(9, 3, rng, h=0.2)
    a = rng.standard_normal((3, 3))
    assert orbital_norm(phi @ a, 0.2) == pytest.approx(np.linalg.norm(a), abs=1e-12)


def test_project_tangent(rng):
    u = E[:, :2]
    f = np.zeros((4, 2))
    f[2:, :] = rng.standard_normal((2, 2))
    np.testing.assert_array_equal(project_tangent(u, f), f)
    np.testing.assert_allclose(project_tangent(u, u), 0.0, atol=1e-15)

    u = random_frame(8, 3, rng, h=0.4)
    f = rng.standard_normal((8, 3))
    d = project_tangent(u, f, 0.4)
    assert np.linalg.norm(gram(u, d, 0.4)) <= 1e-10
    np.testing.assert_allclose(project_tangent(u, d, 0.4), d, atol=1e-12)


def test_orbital_set_validation():
    geo = GridGeometry(4)
    OrbitalSet(E[:, :2], geo)
    with pytest.raises(ValueError):
        OrbitalSet(2 * E[:, :2], geo)
    with pytest.raises(ValueError):
        OrbitalSet(E[:3, :2], geo)
    with pytest.raises(ValueError):
        GridGeometry(4, weight=0.0)


def test_distance_trivial(rng):
    psi = random_frame(6, 2, rng)
    res = grassmann_distance(psi, psi)
    assert res.distance == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(res.rotation, np.eye(2), atol=1e-12)
    q = random_orthogonal(rng, 2)
    assert grassmann_distance(psi, psi @ q).distance == pytest.approx(0.0, abs=1e-7)


def _brute_force_distance(psi, phi, n_angles=3600):
    best = np.inf
    for ang in np.linspace(0, 2 * np.pi, n_angles, endpoint=False):
        c, s = np.cos(ang), np.sin(ang)
        for q in (np.array([[c, -s], [s, c]]), np.array([[c, s], [s, -c]])):
            best = min(best, orbital_norm(psi - phi @ q))
    return best


def test_distance_example_against_brute_force():
    psi, phi = E[:, [0, 1]], E[:, [1, 2]]
    res = grassmann_distance(psi, phi)
    brute = _brute_force_distance(psi, phi)
    assert brute == pytest.approx(np.sqrt(2), abs=1e-6)
    assert res.distance == pytest.approx(np.sqrt(2), abs=1e-12)
    np.testing.assert_allclose(sorted(res.singular_values), [0.0, 1.0], atol=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_distance_properties(seed):
    rng = np.random.default_rng(seed)
    psi, phi = random_frame(7, 2, rng), random_frame(7, 2, rng)
    res = grassmann_distance(psi, phi)
    s = res.singular_values
    assert res.distance**2 == pytest.approx(4 - 2 * s.sum(), abs=1e-12)
    assert grassmann_distance(phi, psi).distance == pytest.approx(res.distance, abs=1e-12)
    q = random_orthogonal(rng, 2)
    assert grassmann_distance(psi @ q, phi).distance == pytest.approx(res.distance, abs=1e-12)
    for _ in range(20):
        assert res.distance <= orbital_norm(psi - phi @ random_orthogonal(rng, 2)) + 1e-12


def test_geodesic_one_dimensional():
    psi, phi = np.eye(3)[:, [0]], np.eye(3)[:, [1]]
    curve = geodesic_between(psi, phi)
    for t in np.linspace(0, 1, 9):
        expected = np.cos(np.pi * t / 2) * psi + np.sin(np.pi * t / 2) * phi
        np.testing.assert_allclose(curve(t), expected, atol=1e-14)


def test_geodesic_constant_for_same_class(rng):
    psi = random_frame(6, 2, rng)
    curve = geodesic_between(psi, psi @ random_orthogonal(rng, 2))
    for t in (0.0, 0.5, 1.0):
        assert grassmann_distance(curve(t), psi).distance == pytest.approx(0.0, abs=1e-7)
        assert orthonormality_error(curve(t)) <= 1e-10


@pytest.mark.parametrize("h", [1.0, 0.25])
def test_geodesic_invariants(rng, h):
    psi, phi = random_frame(9, 3, rng, h), random_frame(9, 3, rng, h)
    curve = geodesic_between(psi, phi, h)
    assert grassmann_distance(curve(0), psi, h).distance <= 1e-8
    assert grassmann_distance(curve(1), phi, h).distance <= 1e-8
    prev = -1.0
    for t in np.linspace(0, 1, 21):
        assert orthonormality_error(curve(t), h) <= 1e-10
        dist = grassmann_distance(curve(t), psi, h).distance
        assert dist >= prev - 1e-12
        prev = dist
    step = 1e-5
    for t in (0.25, 0.5, 0.75):
        fd = (curve(t + step) - curve(t - step)) / (2 * step)
        assert np.linalg.norm(gram(curve(t), fd, h)) <= 1e-8
        np.testing.assert_allclose(curve.derivative(t), fd, atol=1e-8)


def test_geodesic_with_partial_overlap():
    # shares e1, so one angle is zero and the complement column is arbitrary
    psi, phi = np.eye(5)[:, [0, 1]], np.eye(5)[:, [0, 2]]
    curve = geodesic_between(psi, phi)
    for t in (0.0, 0.3, 1.0):
        assert orthonormality_error(curve(t)) <= 1e-10
    assert grassmann_distance(curve(1), phi).distance <= 1e-8


def test_geodesic_from_direction(rng):
    u, d = tangent_pair(rng, 10, 3, h=0.5)
    curve = geodesic_from_direction(u, 0.7 * d, 0.5)
    np.testing.assert_allclose(curve(0), u, atol=1e-12)
    np.testing.assert_allclose(curve.derivative(0), 0.7 * d, atol=1e-12)
    assert orthonormality_error(curve(0.9), 0.5) <= 1e-10
