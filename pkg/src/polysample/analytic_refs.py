"""Closed-form chord-length densities used as references for the sampler."""

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import quad


def ellipe(m):
    """Complete elliptic integral of the second kind, parameter convention ``E(m)``.

    ``E(m) = int_0^{pi/2} sqrt(1 - m sin^2 t) dt`` for ``m <= 1``, computed by
    the arithmetic-geometric mean.
    """
    m = np.asarray(m, dtype=float)
    if np.any(m > 1):
        raise ValueError("ellipe needs m <= 1")
    scalar = m.ndim == 0
    m = np.atleast_1d(m)
    out = np.ones_like(m)
    inner = m < 1
    mm = m[inner]
    a = np.ones_like(mm)
    b = np.sqrt(1.0 - mm)
    s = 0.5 * mm
    power = 0.5
    for _ in range(64):
        c = 0.5 * (a - b)
        a, b = 0.5 * (a + b), np.sqrt(a * b)
        power *= 2.0
        s = s + power * c * c
        if np.all(np.abs(c) <= 1e-17 * a):
            break
    out[inner] = 0.5 * np.pi / a * (1.0 - s)
    return out[0] if scalar else out


def hexagon_eq_pdf(l):
    """Chord skipping three edges of an equilateral hexagon in R^3 (quotient measure)."""
    l = np.asarray(l, dtype=float)
    return np.where((l >= 0) & (l <= 1), l * l,
                    np.where((l > 1) & (l <= 3), (l - 3.0) ** 2 / 4.0, 0.0))


def hexagon_neq_pdf(l):
    """Same chord for edge lengths (1, 1/2, 3/2, 1, 1, 1)."""
    l = np.asarray(l, dtype=float)
    return np.select(
        [(l > 0) & (l <= 1), (l > 1) & (l <= 2), (l > 2) & (l <= 3)],
        [4.0 * l * l / 5.0, 2.0 * (3.0 - l) / 5.0, 2.0 * (3.0 - l) ** 2 / 5.0],
        0.0,
    )


def _tetragon_unnormalized(l):
    l = np.asarray(l, dtype=float)
    return 8.0 * l * np.sqrt(4.0 - l * l) * ellipe(-((l * l - 4.0) ** 2) / (16.0 * l * l))


@lru_cache(maxsize=None)
def tetragon_full_norm():
    """Integral of the unnormalized tetragon density over (0, 2)."""
    val, _ = quad(lambda t: float(_tetragon_unnormalized(t)), 0.0, 2.0,
                  epsabs=0.0, epsrel=1e-13, limit=200)
    return val


def tetragon_full_pdf(l):
    """Chord joining opposite vertices of an equilateral tetragon in R^3 (full measure)."""
    l = np.asarray(l, dtype=float)
    if np.any((l <= 0) | (l >= 2)):
        raise ValueError("tetragon chord density is defined on (0, 2)")
    return _tetragon_unnormalized(l) / tetragon_full_norm()


def tetragon_quotient_pdf(l):
    """Same chord under the quotient measure: uniform on (0, 2)."""
    l = np.asarray(l, dtype=float)
    return np.where((l > 0) & (l < 2), 0.5, 0.0)


@dataclass(frozen=True)
class ReferencePdf:
    evaluator: Callable
    lo: float
    hi: float

    def __call__(self, l):
        l = np.asarray(l, dtype=float)
        inside = (l > self.lo) & (l < self.hi)
        out = np.zeros_like(l)
        if np.any(inside):
            out[inside] = self.evaluator(l[inside])
        return out

    def bin_averages(self, edges):
        """Mean density over each histogram bin, by adaptive quadrature."""
        out = []
        for a, b in zip(edges[:-1], edges[1:]):
            a2, b2 = max(a, self.lo), min(b, self.hi)
            if b2 <= a2:
                out.append(0.0)
                continue
            val, _ = quad(lambda t: float(self.evaluator(np.array(t))), a2, b2,
                          epsabs=1e-13, epsrel=1e-12, limit=200)
            out.append(val / (b - a))
        return np.array(out)


REFERENCES = {
    "hexagon-eq": ReferencePdf(hexagon_eq_pdf, 0.0, 3.0),
    "hexagon-neq": ReferencePdf(hexagon_neq_pdf, 0.0, 3.0),
    "tetragon-full": ReferencePdf(tetragon_full_pdf, 0.0, 2.0),
    "tetragon-quotient": ReferencePdf(tetragon_quotient_pdf, 0.0, 2.0),
}
