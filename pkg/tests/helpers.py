"""Shared input generators for the test suite."""

import numpy as np

from polysample.barycenter import solve_batch


def unit_vectors(rng, shape):
    x = rng.standard_normal(shape)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def ball_points(rng, size, d, radius=0.9):
    v = unit_vectors(rng, (size, d))
    return radius * rng.uniform(size=(size, 1)) ** (1.0 / d) * v


def closed_polygons(rng, size, n, d, r=None):
    r = np.ones(n) if r is None else np.asarray(r, dtype=float)
    res = solve_batch(unit_vectors(rng, (size, n, d)), r)
    assert res.converged.all()
    return res.y


def stable_lengths(rng, n):
    while True:
        r = rng.uniform(0.5, 1.5, n)
        if np.all(r < 0.5 * r.sum()):
            return r


def rotate(q, v):
    return np.einsum("jk,...k->...j", q, v)


SQUARE = np.array([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0], [0.0, -1.0]])

# Filled by the acceptance tests and echoed in the pytest terminal summary.
ACCEPTANCE_LINES = []
