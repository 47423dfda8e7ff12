import numpy as np
import pytest

from helpers import ball_points, closed_polygons, stable_lengths
from polysample.errors import SingularGram
from polysample.hyperbolic import conformal_factor
from polysample.oracle import (
    build_constraint_matrix,
    gamma_matrix,
    block_det_AA,
    block_det_ZZ,
    metric_g1,
    numeric_det_ZZ,
    numeric_jacobian_opening,
    orbit_length_d2,
    orbit_volume_formula,
    projector_from_constraints,
    projector_P,
    so2_volume,
    tangent_basis_arm,
    tangent_basis_ball_pol,
)
from polysample.weights import gram_summary, jacobian_opening

CASES = [(n, d) for n in (3, 4, 5) for d in (2, 3)]


def random_case(rng, n, d):
    r = stable_lengths(rng, n)
    rho = rng.uniform(0.5, 2.0, n)
    y = closed_polygons(rng, 1, n, d, r)[0]
    w = ball_points(rng, 1, d)[0]
    return w, y, r, rho


def test_constraint_matrix_shape_and_kernel(rng):
    w, y, r, rho = random_case(rng, 5, 3)
    b = build_constraint_matrix(y, r)
    assert b.shape == (3 + 5, 3 * 6)
    # a tangent direction of the closed polygon space: rotate every edge about one axis
    axis = np.array([0.3, -0.2, 0.9])
    u = np.cross(axis, y)
    assert np.abs(b @ np.concatenate([np.zeros(3), u.ravel()])).max() <= 1e-12
    b_adj = np.linalg.solve(metric_g1(rho, 3), b.T)
    assert np.linalg.eigvalsh(b @ b_adj).min() > 0


@pytest.mark.parametrize("n,d", CASES)
def test_projector_identities(rng, n, d):
    w, y, r, rho = random_case(rng, n, d)
    p = projector_P(y, r, rho)
    g = metric_g1(rho, d)
    np.testing.assert_allclose(p @ p, p, atol=1e-10)
    np.testing.assert_allclose(g @ p, (g @ p).T, atol=1e-10)
    np.testing.assert_allclose(p, projector_from_constraints(y, r, rho), atol=1e-10)
    assert np.abs(build_constraint_matrix(y, r) @ p).max() <= 1e-10


def test_gamma_matches_weights_module(rng):
    w, y, r, rho = random_case(rng, 5, 3)
    np.testing.assert_allclose(gamma_matrix(y, r, rho), gram_summary(y, r, rho).gram_r2_rho2,
                               atol=1e-12)


def test_collinear_polygon_is_rejected():
    e = np.array([1.0, 0.0])
    y = np.array([e, -e, e, -e])
    with pytest.raises(SingularGram):
        projector_P(y, np.ones(4), np.ones(4))
    with pytest.raises(SingularGram):
        tangent_basis_ball_pol(y, np.ones(4), np.ones(4))


def test_tangent_bases_are_orthonormal(rng):
    w, y, r, rho = random_case(rng, 5, 3)
    basis = tangent_basis_ball_pol(y, r, rho)
    assert basis.shape == (3 * 6, 5 * 2)
    np.testing.assert_allclose(basis.T @ metric_g1(rho, 3) @ basis, np.eye(10), atol=1e-12)
    assert np.abs(build_constraint_matrix(y, r) @ basis).max() <= 1e-10
    arm = tangent_basis_arm(y, rho)
    g = np.diag(np.repeat(rho**2, 3))
    np.testing.assert_allclose(arm.T @ g @ arm, np.eye(10), atol=1e-12)


def test_oracle_size_limit(rng):
    y = closed_polygons(rng, 1, 9, 2)[0]
    with pytest.raises(ValueError):
        tangent_basis_ball_pol(y, np.ones(9), np.ones(9))


@pytest.mark.parametrize("n,d", CASES)
def test_closed_form_jacobian_matches_oracle(rng, n, d):
    for _ in range(50):
        w, y, r, rho = random_case(rng, n, d)
        num = numeric_jacobian_opening(w, y, r, rho)
        assert jacobian_opening(w, y, r, rho) == pytest.approx(num, rel=1e-6)


def test_step_size_consistency(rng):
    for _ in range(10):
        w, y, r, rho = random_case(rng, 4, 3)
        a = numeric_jacobian_opening(w, y, r, rho, step=1e-5)
        b = numeric_jacobian_opening(w, y, r, rho, step=1e-4)
        assert a == pytest.approx(b, rel=1e-5)
    with pytest.raises(ValueError):
        numeric_jacobian_opening(w, y, r, rho, step=1e-2)


@pytest.mark.parametrize("n,d", CASES)
def test_factorization(rng, n, d):
    for _ in range(10):
        w, y, r, rho = random_case(rng, n, d)
        expected = np.prod(conformal_factor(w, y) ** (2 * (d - 1)))
        assert numeric_det_ZZ(w, y, rho) == pytest.approx(expected, rel=1e-8)
        zz = block_det_ZZ(w, y, rho)
        assert zz == pytest.approx(expected, rel=1e-10)
        num = numeric_jacobian_opening(w, y, r, rho)
        assert block_det_AA(w, y, r, rho) * zz == pytest.approx(num**2, rel=1e-6)


def test_so2_volume():
    assert so2_volume() == pytest.approx(2 * np.pi * np.sqrt(2), rel=1e-8)


def test_orbit_volume_d2(rng):
    vol = so2_volume(200_000)
    for n in (3, 5, 8):
        r = stable_lengths(rng, n)
        rho = rng.uniform(0.5, 2.0, n)
        y = closed_polygons(rng, 1, n, 2, r)[0]
        assert orbit_length_d2(y, rho, 200_000) == pytest.approx(
            orbit_volume_formula(y, rho, vol), rel=1e-6)
