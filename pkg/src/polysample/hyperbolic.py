"""Shift map of the Poincaré ball and its derivatives.

Every function broadcasts over leading axes: points are arrays of shape
``(..., d)`` and matrices come back with shape ``(..., d, d)``.
"""

import numpy as np

from .errors import DegenerateDenominator

BOUNDARY_GUARD = 1e-14


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)


def _outer(a, b):
    return a[..., :, None] * b[..., None, :]


def _eye_like(v):
    d = v.shape[-1]
    return np.broadcast_to(np.eye(d), v.shape[:-1] + (d, d))


def shift_unchecked(w, z):
    """Shift map without the boundary guard; used on hot paths."""
    # Rearranged so that nothing cancels when z is close to w near the sphere:
    # numerator (1-|w|^2)(z-w) - |z-w|^2 w, denominator |z-w|^2 + (1-|w|^2)(1-|z|^2).
    diff = z - w
    dd = _dot(diff, diff)
    one_ww = 1.0 - _dot(w, w)
    num = one_ww[..., None] * diff - dd[..., None] * w
    den = dd + one_ww * (1.0 - _dot(z, z))
    return num / den[..., None]


def shift(w, z):
    """Hyperbolic translation taking ``w`` to the origin, applied to ``z``.

    Defined for any ``w, z`` with ``|w| |z| < 1``; it maps the unit sphere
    to itself and the open ball to itself when ``|w| < 1``.
    """
    w = np.asarray(w, dtype=float)
    z = np.asarray(z, dtype=float)
    prod = np.sqrt(_dot(w, w) * _dot(z, z))
    if np.any(prod >= 1.0 - BOUNDARY_GUARD):
        raise DegenerateDenominator(
            f"shift map needs |w|*|z| < 1, got max {float(np.max(prod))!r}"
        )
    return shift_unchecked(w, z)


def shift_d1(s, y):
    """Derivative of the shift map in its first argument at ``(s, y)``, ``|y| = 1``."""
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    sy = _dot(s, y)
    ss = _dot(s, s)
    x = shift_unchecked(s, y)
    scale = 2.0 / (1.0 - 2.0 * sy + ss)
    m = (
        _outer(s, y)
        - _outer(y, s)
        - (1.0 - sy)[..., None, None] * _eye_like(y)
        + _outer(x, y - s)
    )
    return scale[..., None, None] * m


def shift_d2(s, y):
    """Derivative of the shift map in its second argument at ``(s, y)``, ``|y| = 1``.

    The result is a conformal matrix: a positive multiple of an orthogonal one.
    """
    s = np.asarray(s, dtype=float)
    y = np.asarray(y, dtype=float)
    sy = _dot(s, y)
    ss = _dot(s, s)
    x = shift_unchecked(s, y)
    scale = 2.0 / (1.0 - 2.0 * sy + ss)
    m = (
        (0.5 * (1.0 - ss))[..., None, None] * _eye_like(y)
        - _outer(s, y - s)
        + _outer(x, s - ss[..., None] * y)
    )
    return scale[..., None, None] * m


def conformal_factor(w, y):
    """Stretch factor ``(1 - |w|^2) / |w + y|^2`` of ``shift(-w, .)`` at ``y``."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    wy = w + y
    return (1.0 - _dot(w, w)) / _dot(wy, wy)


def c_matrix(w, y):
    """The matrix ``D2 shift(-w, y)^-1 @ (-D1 shift(-w, y))`` in closed form."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    scale = 2.0 / (1.0 - _dot(w, w))
    m = (1.0 + _dot(w, y))[..., None, None] * _eye_like(y) - _outer(y + w, y)
    return scale[..., None, None] * m


def random_rotation(rng, d):
    """Haar-random element of SO(d)."""
    q, r = np.linalg.qr(rng.standard_normal((d, d)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q
