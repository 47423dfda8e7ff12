"""Brute-force check of the closed-form opening Jacobian for small polygons.

Everything here is dense linear algebra in dimension ``(n + 1) d``: the
constraint matrix of ``ball x Pol``, the orthogonal projector onto its
kernel, a finite-difference derivative of the opening map restricted to an
orthonormal tangent basis, and the factor matrices of the determinant. Only
the shift map itself is shared with the fast path.
"""

import numpy as np
from scipy.linalg import null_space

from .barycenter import solve_batch
from .errors import SingularGram
from .hyperbolic import shift_d1, shift_d2, shift_unchecked

MAX_ORACLE_N = 8


def _check_size(n):
    if n > MAX_ORACLE_N:
        raise ValueError(f"the dense oracle supports n <= {MAX_ORACLE_N}, got {n}")


def _rho_diag(rho, d):
    return np.repeat(np.asarray(rho, dtype=float) ** 2, d)


def metric_g1(rho, d):
    """Gram matrix of the product metric on R^d + (R^d)^n (Euclidean on w, rho-weighted on y)."""
    return np.diag(np.concatenate([np.ones(d), _rho_diag(rho, d)]))


def build_constraint_matrix(y, r):
    """Derivative of ``(w, y) -> (sum r_i y_i, (|y_i|^2 - 1) / 2)``, shape ``(d + n, d + n d)``."""
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    b = np.zeros((d + n, d + n * d))
    for i in range(n):
        cols = slice(d + i * d, d + (i + 1) * d)
        b[:d, cols] = r[i] * np.eye(d)
        b[d + i, cols] = y[i]
    return b


def gamma_matrix(y, r, rho):
    """Schur complement ``Omega R^-1 (I - Y Y^T) R^-1 Omega^T`` assembled densely."""
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    omega = np.hstack([ri * np.eye(d) for ri in r])
    rinv = np.diag(np.repeat(1.0 / np.asarray(rho, dtype=float), d))
    yy = np.zeros((n * d, n))
    for i in range(n):
        yy[i * d:(i + 1) * d, i] = y[i]
    return omega @ rinv @ (np.eye(n * d) - yy @ yy.T) @ rinv @ omega.T


def projector_P(y, r, rho):
    """g1-orthogonal projector onto the tangent space of ``ball x Pol`` at ``(w, y)``."""
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    r = np.asarray(r, dtype=float)
    omega = np.hstack([ri * np.eye(d) for ri in r])
    q = np.zeros((n * d, n * d))
    for i in range(n):
        s = slice(i * d, (i + 1) * d)
        q[s, s] = np.eye(d) - np.outer(y[i], y[i])
    gamma = gamma_matrix(y, r, rho)
    if np.linalg.det(gamma) <= 0:
        raise SingularGram("gamma is singular; the edges are collinear")
    rinv2 = np.diag(1.0 / _rho_diag(rho, d))
    e = q - rinv2 @ q @ omega.T @ np.linalg.solve(gamma, omega @ q)
    p = np.zeros((d + n * d, d + n * d))
    p[:d, :d] = np.eye(d)
    p[d:, d:] = e
    return p


def projector_from_constraints(y, r, rho):
    """Same projector as ``I - B* (B B*)^-1 B`` with the g1 adjoint of ``B``."""
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    b = build_constraint_matrix(y, r)
    b_adj = np.linalg.solve(metric_g1(rho, d), b.T)
    return np.eye(d + n * d) - b_adj @ np.linalg.solve(b @ b_adj, b)


def _mgs(vectors, gram, passes=2):
    """Modified Gram-Schmidt of the columns of ``vectors`` in the inner product ``gram``."""
    q = np.array(vectors, dtype=float)
    for k in range(q.shape[1]):
        for _ in range(passes):
            for j in range(k):
                q[:, k] -= (q[:, j] @ gram @ q[:, k]) * q[:, j]
        q[:, k] /= np.sqrt(q[:, k] @ gram @ q[:, k])
    return q


def tangent_basis_ball_pol(y, r, rho):
    """Columns: a g1-orthonormal basis of ``ker B``, of size ``n (d - 1)``."""
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    _check_size(n)
    span = null_space(build_constraint_matrix(y, r))
    if span.shape[1] != n * (d - 1):
        raise SingularGram("constraint matrix is rank deficient")
    return _mgs(span, metric_g1(rho, d))


def tangent_basis_arm(x, rho):
    """Columns: a rho-orthonormal basis of the tangent space of the sphere product at ``x``."""
    x = np.asarray(x, dtype=float)
    n, d = x.shape
    cols = []
    for i in range(n):
        perp = null_space(x[i][None, :])
        for k in range(d - 1):
            v = np.zeros(n * d)
            v[i * d:(i + 1) * d] = perp[:, k] / rho[i]
            cols.append(v)
    return np.array(cols).T


def opening_extended(w, y):
    """The opening map extended off the sphere: ``shift(-w, y_i)`` for arbitrary ``y_i``."""
    return shift_unchecked(-np.asarray(w)[None, :], np.asarray(y))


def _push_forward(w, y, basis, step, moves_w):
    """Central differences of the extended opening map along each basis column."""
    n, d = y.shape
    out = []
    for k in range(basis.shape[1]):
        v = basis[:, k]
        dw = v[:d] if moves_w else np.zeros(d)
        dy = (v[d:] if moves_w else v).reshape(n, d)
        plus = opening_extended(w + step * dw, y + step * dy)
        minus = opening_extended(w - step * dw, y - step * dy)
        out.append((plus - minus) / (2.0 * step))
    return np.array(out)


def _gram_det_on_arm(images, x, rho):
    # project each image onto T_x Arm, then Gram determinant in the rho metric
    tang = images - np.einsum("kij,ij->ki", images, x)[..., None] * x
    rho2 = np.asarray(rho, dtype=float) ** 2
    gram = np.einsum("aij,bij,i->ab", tang, tang, rho2)
    return np.linalg.det(gram)


def numeric_jacobian_opening(w, y, r, rho, step=1e-5):
    """Jacobian determinant of the opening map by finite differences on a tangent basis."""
    if not 1e-6 <= step <= 1e-4:
        raise ValueError("step must lie in [1e-6, 1e-4]")
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    basis = tangent_basis_ball_pol(y, r, rho)
    images = _push_forward(w, y, basis, step, moves_w=True)
    x = opening_extended(w, y)
    return float(np.sqrt(_gram_det_on_arm(images, x, rho)))


def numeric_det_ZZ(w, y, rho, step=1e-5):
    """``det(Z* Z)`` for the derivative of the opening map in ``y`` alone, by differences."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_size(y.shape[0])
    basis = tangent_basis_arm(y, rho)
    images = _push_forward(w, y, basis, step, moves_w=False)
    return float(_gram_det_on_arm(images, opening_extended(w, y), rho))


def block_det_ZZ(w, y, rho):
    """``det(Z* Z)`` from the exact blocks ``D2 shift(-w, y_i)``."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    basis = tangent_basis_arm(y, rho)
    b = shift_d2(-w[None, :], y)
    images = np.einsum("ijk,aik->aij", b, basis.T.reshape(-1, n, d))
    return float(_gram_det_on_arm(images, opening_extended(w, y), rho))


def block_det_AA(w, y, r, rho):
    """``det(P A~* A~ P + I - P)`` with ``A~ = (C  I)`` and ``C`` stacked ``b_i^-1 a_i``."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    n, d = y.shape
    _check_size(n)
    a = -shift_d1(-w[None, :], y)
    b = shift_d2(-w[None, :], y)
    c = np.linalg.solve(b, a)
    a_tilde = np.hstack([c.reshape(n * d, d), np.eye(n * d)])
    g_in = metric_g1(rho, d)
    g_out = np.diag(_rho_diag(rho, d))
    a_adj = np.linalg.solve(g_in, a_tilde.T @ g_out)
    p = projector_P(y, r, rho)
    m = p @ a_adj @ a_tilde @ p + np.eye(d + n * d) - p
    return float(np.linalg.det(m))


def orbit_length_d2(y, rho, samples=20000):
    """Length of the SO(2) orbit of a planar polygon in the rho metric, by polygonal arcs."""
    y = np.asarray(y, dtype=float)
    theta = np.linspace(0.0, 2.0 * np.pi, samples + 1)
    c, s = np.cos(theta), np.sin(theta)
    rot = np.stack([np.stack([c, -s], -1), np.stack([s, c], -1)], -2)
    pts = np.einsum("tjk,ik->tij", rot, y)
    seg = np.diff(pts, axis=0)
    rho2 = np.asarray(rho, dtype=float) ** 2
    return float(np.sum(np.sqrt(np.einsum("tij,tij,i->t", seg, seg, rho2))))


def so2_volume(samples=20000):
    """Length of SO(2) as a curve of 2 x 2 matrices in the Frobenius metric."""
    theta = np.linspace(0.0, 2.0 * np.pi, samples + 1)
    c, s = np.cos(theta), np.sin(theta)
    mats = np.stack([c, -s, s, c], -1)
    return float(np.sum(np.linalg.norm(np.diff(mats, axis=0), axis=-1)))


def orbit_volume_formula(y, rho, so_volume):
    """``vol(SO(d)) * prod_{k<l} ((lambda_k + lambda_l) / 2)^(1/2)``."""
    y = np.asarray(y, dtype=float)
    sigma = np.einsum("i,ij,ik->jk", np.asarray(rho, dtype=float) ** 2, y, y)
    lam = np.linalg.eigvalsh(sigma)
    k, l = np.triu_indices(len(lam), 1)
    return so_volume * float(np.sqrt(np.prod((lam[k] + lam[l]) / 2.0)))


def random_closed_polygon(rng, n, d, r):
    """A closed polygon obtained by closing a uniformly random arm."""
    for _ in range(100):
        x = rng.standard_normal((1, n, d))
        x /= np.linalg.norm(x, axis=-1, keepdims=True)
        res = solve_batch(x, r)
        if res.converged[0]:
            return res.y[0]
    raise RuntimeError("could not close a random arm")


def random_ball_point(rng, d, radius=0.9):
    """Uniform point of the ball of the given radius."""
    v = rng.standard_normal(d)
    return radius * rng.uniform() ** (1.0 / d) * v / np.linalg.norm(v)
