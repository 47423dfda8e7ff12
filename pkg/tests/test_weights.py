import time
from math import pi

import numpy as np
import pytest

from helpers import SQUARE, ball_points, closed_polygons, rotate, stable_lengths
from polysample.errors import DegenerateSpan, SingularGram
from polysample.hyperbolic import random_rotation
from polysample.sampler import BLOCK_ELEMENTS
from polysample.weights import (
    RhoPreset,
    chi,
    gram_summary,
    jacobian_opening,
    log_jacobian_opening,
    log_normalization,
    log_weight_K,
    log_weight_K_hat,
    resolve_rho,
    weight_K,
    weight_K_hat,
)

ONES4 = np.ones(4)


def test_resolve_rho_presets():
    r = np.array([1.0, 4.0, 9.0])
    np.testing.assert_array_equal(resolve_rho("sqrt-r", r), [1, 2, 3])
    np.testing.assert_array_equal(resolve_rho(RhoPreset.R, r), r)
    np.testing.assert_array_equal(resolve_rho(None, r), [1, 2, 3])
    np.testing.assert_array_equal(resolve_rho([1, 1, 2], r), [1, 1, 2])
    for bad in ([1, 1], [1, 0, 1], RhoPreset.CUSTOM):
        with pytest.raises(ValueError):
            resolve_rho(bad, r)


def test_gram_summary_square():
    g = gram_summary(SQUARE, ONES4, ONES4)
    for m in (g.gram_r, g.gram_r2_rho2, g.sigma):
        np.testing.assert_allclose(m, 2 * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(g.sigma_eigs, [2, 2])


def test_gram_summary_collinear():
    e = np.array([1.0, 0.0])
    with pytest.raises(SingularGram):
        gram_summary(np.array([e, -e, e, -e]), ONES4, ONES4)


def test_gram_spectrum_rotation_invariant(rng):
    y = closed_polygons(rng, 1, 7, 3)[0]
    r, rho = np.ones(7), np.sqrt(np.arange(1.0, 8.0))
    q = random_rotation(rng, 3)
    np.testing.assert_allclose(gram_summary(rotate(q, y), r, rho).sigma_eigs,
                               gram_summary(y, r, rho).sigma_eigs, rtol=1e-10)


def test_square_hand_values():
    w = np.zeros(2)
    assert jacobian_opening(w, SQUARE, ONES4, ONES4) == pytest.approx(8.0, rel=1e-14)
    assert weight_K(w, SQUARE, ONES4, ONES4) == pytest.approx(0.5, rel=1e-14)
    assert weight_K_hat(w, SQUARE, ONES4, ONES4) == pytest.approx(0.25, rel=1e-14)
    assert weight_K(w, SQUARE, ONES4, ONES4, normalized=True) == pytest.approx(
        0.5 * 3 / (4 * pi), rel=1e-14)


def test_normalization_constant():
    assert np.exp(log_normalization(4, 2)) == pytest.approx(3 / (4 * pi), rel=1e-14)


@pytest.mark.parametrize("n,d", [(3, 2), (5, 3), (12, 4)])
def test_chi_is_a_probability_density(n, d):
    from scipy.integrate import quad
    from scipy.special import gamma

    # integrate radially over the unit ball
    area = 2 * pi ** (d / 2) / gamma(d / 2)
    val, _ = quad(lambda t: area * t ** (d - 1) * chi(np.r_[t, np.zeros(d - 1)], n, d), 0, 1)
    assert val == pytest.approx(1.0, rel=1e-10)


def test_K_times_J_is_chi(rng):
    for n, d in [(3, 2), (6, 3), (20, 5)]:
        r = stable_lengths(rng, n)
        rho = rng.uniform(0.5, 2.0, n)
        y = closed_polygons(rng, 200, n, d, r)
        w = ball_points(rng, 200, d)
        lhs = weight_K(w, y, r, rho, normalized=True) * jacobian_opening(w, y, r, rho)
        np.testing.assert_allclose(lhs, chi(w, n, d), rtol=1e-12)


def test_batch_matches_single(rng):
    r = stable_lengths(rng, 6)
    y = closed_polygons(rng, 5, 6, 3, r)
    w = ball_points(rng, 5, 3)
    batch = log_weight_K_hat(w, y, r, np.sqrt(r))
    for k in range(5):
        assert batch[k] == pytest.approx(float(log_weight_K_hat(w[k], y[k], r, np.sqrt(r))),
                                         rel=1e-13)


def test_rotation_invariance(rng):
    r = stable_lengths(rng, 7)
    rho = np.sqrt(r)
    y = closed_polygons(rng, 20, 7, 4, r)
    w = ball_points(rng, 20, 4)
    q = random_rotation(rng, 4)
    for f in (jacobian_opening, weight_K, weight_K_hat):
        args = (r, rho)
        np.testing.assert_allclose(f(rotate(q, w), rotate(q, y), *args), f(w, y, *args),
                                   rtol=1e-10)


def test_positivity(rng):
    r = stable_lengths(rng, 9)
    y = closed_polygons(rng, 500, 9, 3, r)
    w = ball_points(rng, 500, 3, radius=0.999)
    for f in (jacobian_opening, weight_K, weight_K_hat):
        vals = f(w, y, r, np.sqrt(r))
        assert np.all(np.isfinite(vals)) and np.all(vals > 0)


def test_quotient_factor_ratio(rng):
    y = closed_polygons(rng, 50, 5, 3)
    w = ball_points(rng, 50, 3)
    r = rho = np.ones(5)
    lam = gram_summary(y, r, rho).sigma_eigs
    pairs = (lam[:, 0] + lam[:, 1]) * (lam[:, 0] + lam[:, 2]) * (lam[:, 1] + lam[:, 2])
    np.testing.assert_allclose(weight_K_hat(w, y, r, rho) / weight_K(w, y, r, rho),
                               pairs ** -0.5, rtol=1e-12)


def test_planar_polygon_in_space_has_degenerate_span():
    y = np.hstack([SQUARE, np.zeros((4, 1))])
    assert weight_K(np.zeros(3), y, ONES4, ONES4) > 0
    with pytest.raises(DegenerateSpan):
        weight_K_hat(np.zeros(3), y, ONES4, ONES4)


def test_log_space_large_n(rng):
    n, d = 1000, 3
    y = closed_polygons(rng, 3, n, d)
    w = ball_points(rng, 3, d, radius=0.999)
    r = np.ones(n)
    assert np.all(np.isfinite(log_weight_K(w, y, r, r)))
    assert np.all(np.isfinite(log_weight_K_hat(w, y, r, r)))
    lj = log_jacobian_opening(w, y, r, r)
    assert np.all(np.isfinite(lj))
    # the product of conformal factors alone leaves the double range
    assert lj.min() < -745


def _best_time(fn, reps=7):
    best = np.inf
    for _ in range(reps):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def test_weights_cost_is_linear(rng):
    times = {}
    for n in (256, 4096):
        # batches of the size the sampler uses
        m = BLOCK_ELEMENTS // (3 * n)
        y = closed_polygons(rng, m, n, 3)
        w = ball_points(rng, m, 3)
        r = np.ones(n)
        times[n] = _best_time(lambda: log_weight_K_hat(w, y, r, r)) / m
    assert times[4096] / times[256] <= 1.3 * 16
