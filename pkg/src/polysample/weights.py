"""Reweighting factors for closed polygons produced by conformal closure.

All quantities are O(n d^2): three d x d sums over the edges, two Cholesky
log-determinants and one symmetric eigendecomposition. Products over edges
are accumulated as sums of logarithms, so large ``n`` neither overflows nor
underflows. Functions accept a single sample (``w`` of shape ``(d,)``, ``y``
of shape ``(n, d)``) or a batch with one extra leading axis.
"""

import enum
from dataclasses import dataclass
from math import lgamma, log, pi

import numpy as np

from .errors import DegenerateSpan, SingularGram

SPAN_RTOL = 1e-12


class RhoPreset(enum.Enum):
    SQRT_R = "sqrt-r"
    R = "r"
    CUSTOM = "custom"


def resolve_rho(rho, r):
    """Turn a preset or explicit vector into the per-edge metric weights."""
    r = np.asarray(r, dtype=float)
    if isinstance(rho, str):
        rho = RhoPreset(rho)
    if rho is None or rho is RhoPreset.SQRT_R:
        return np.sqrt(r)
    if rho is RhoPreset.R:
        return r.copy()
    if rho is RhoPreset.CUSTOM:
        raise ValueError("the CUSTOM preset needs an explicit vector")
    rho = np.asarray(rho, dtype=float)
    if rho.shape != r.shape:
        raise ValueError(f"rho has shape {rho.shape}, expected {r.shape}")
    if not np.all(np.isfinite(rho)) or np.any(rho <= 0):
        raise ValueError("rho must be finite and positive")
    return rho


@dataclass
class GramSummary:
    gram_r: np.ndarray
    gram_r2_rho2: np.ndarray
    sigma: np.ndarray
    sigma_eigs: np.ndarray


def _edge_sums(y, r, rho):
    """gram_r, gram_r2_rho2 and sigma as batched products Y^T diag(c) Y."""
    d = y.shape[-1]
    yt = np.swapaxes(y, -1, -2)
    eye = np.eye(d)
    c2 = r**2 / rho**2
    gram_r = r.sum() * eye - (yt * r) @ y
    gram_r2 = c2.sum() * eye - (yt * c2) @ y
    sigma = (yt * rho**2) @ y
    return gram_r, gram_r2, sigma


def gram_summary(y, r, rho):
    y = np.asarray(y, dtype=float)
    r = np.asarray(r, dtype=float)
    rho = np.asarray(rho, dtype=float)
    gram_r, gram_r2, sigma = _edge_sums(y, r, rho)
    eigs = np.linalg.eigvalsh(sigma)
    if np.any(np.linalg.det(gram_r) <= 0):
        raise SingularGram("sum_i r_i (I - y_i y_i^T) is singular; the edges are collinear")
    return GramSummary(gram_r, gram_r2, sigma, eigs)


def _logdet_spd(m):
    """log det of symmetric positive definite matrices via Cholesky; -inf if not PD."""
    try:
        chol = np.linalg.cholesky(m)
        return 2.0 * np.log(np.diagonal(chol, axis1=-2, axis2=-1)).sum(-1)
    except np.linalg.LinAlgError:
        if m.ndim == 2:
            return -np.inf
        flat = m.reshape(-1, *m.shape[-2:])
        out = np.array([_logdet_spd(a) for a in flat])
        return out.reshape(m.shape[:-2])


def _log_parts(w, y, r, rho):
    """log det(gram_r), log det(gram_r2_rho2), sum_i log |w + y_i|^2, log(1 - |w|^2), sigma."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    gram_r, gram_r2, sigma = _edge_sums(y, np.asarray(r, dtype=float), np.asarray(rho, dtype=float))
    ld_r = _logdet_spd(gram_r)
    ld_r2 = _logdet_spd(gram_r2)
    if np.any(~np.isfinite(ld_r)) or np.any(~np.isfinite(ld_r2)):
        raise SingularGram("projector sum is not positive definite; the edges are collinear")
    wy = w[..., None, :] + y
    log_dist = np.log((wy * wy).sum(-1)).sum(-1)
    log_one_ww = np.log1p(-np.einsum("...i,...i->...", w, w))
    return ld_r, ld_r2, log_dist, log_one_ww, sigma


def log_normalization(n, d):
    """log of the constant making ``chi`` integrate to one over the ball."""
    m = (n - 1) * (d - 1)
    return lgamma(m + 0.5 * d) - lgamma(m) - d * log(2.0) - 0.5 * d * log(pi)


def log_chi(w, n, d):
    w = np.asarray(w, dtype=float)
    one_ww = np.log1p(-np.einsum("...i,...i->...", w, w))
    return log_normalization(n, d) + d * log(2.0) + (n * (d - 1) - d) * one_ww


def chi(w, n, d):
    """Density on the ball used to fold out the barycenter coordinate."""
    return np.exp(log_chi(w, n, d))


def log_jacobian_opening(w, y, r, rho):
    y = np.asarray(y, dtype=float)
    n, d = y.shape[-2:]
    ld_r, ld_r2, log_dist, log_one_ww, _ = _log_parts(w, y, r, rho)
    return (d * (log(2.0) - log_one_ww) + ld_r - 0.5 * ld_r2
            + (d - 1) * (n * log_one_ww - log_dist))


def jacobian_opening(w, y, r, rho):
    """Jacobian determinant of the opening map at ``(w, y)``."""
    return np.exp(log_jacobian_opening(w, y, r, rho))


def _log_K(parts, d):
    ld_r, ld_r2, log_dist = parts[:3]
    return 0.5 * ld_r2 - ld_r + (d - 1) * log_dist


def log_weight_K(w, y, r, rho, normalized=False):
    y = np.asarray(y, dtype=float)
    n, d = y.shape[-2:]
    out = _log_K(_log_parts(w, y, r, rho), d)
    if normalized:
        out = out + log_normalization(n, d)
    return out


def weight_K(w, y, r, rho, normalized=False):
    """Sampling weight turning closed arms into samples of the full polygon measure.

    With ``normalized=False`` the constant factor is dropped; it cancels in
    ratio estimators.
    """
    return np.exp(log_weight_K(w, y, r, rho, normalized))


def _orbit_from_sigma(sigma):
    eigs = np.linalg.eigvalsh(sigma)
    trace = np.trace(sigma, axis1=-2, axis2=-1)
    if np.any(eigs[..., 0] <= SPAN_RTOL * trace):
        raise DegenerateSpan("edge directions lie in a hyperplane; SO(d) does not act freely")
    k, l = np.triu_indices(eigs.shape[-1], 1)
    return -0.5 * np.log(eigs[..., k] + eigs[..., l]).sum(-1)


def log_orbit_factor(y, rho):
    """``-1/2 * sum_{k<l} log(lambda_k + lambda_l)`` for the eigenvalues of sum rho_i^2 y_i y_i^T."""
    y = np.asarray(y, dtype=float)
    rho2 = np.asarray(rho, dtype=float) ** 2
    return _orbit_from_sigma((np.swapaxes(y, -1, -2) * rho2) @ y)


def log_weight_K_hat(w, y, r, rho):
    y = np.asarray(y, dtype=float)
    parts = _log_parts(w, y, r, rho)
    return _log_K(parts, y.shape[-1]) + _orbit_from_sigma(parts[4])


def weight_K_hat(w, y, r, rho):
    """Sampling weight for the Riemannian measure on polygons modulo rotations."""
    return np.exp(log_weight_K_hat(w, y, r, rho))
