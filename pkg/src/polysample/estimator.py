"""Self-normalized importance-sampling estimates, histograms and polygon functionals."""

import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .errors import BudgetExceeded, ZeroWeightSum
from .sampler import sample_batch

log = logging.getLogger(__name__)


@dataclass
class EstimateReport:
    mean: float
    ci_radius: float
    confidence: float
    n_samples: int
    effective_sample_size: float

    def as_dict(self):
        return {
            "mean": self.mean,
            "ci_radius": self.ci_radius,
            "confidence": self.confidence,
            "n_samples": self.n_samples,
            "ess": self.effective_sample_size,
        }


@dataclass(frozen=True)
class HistogramSpec:
    lo: float
    hi: float
    bins: int

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"histogram range needs lo < hi, got [{self.lo}, {self.hi}]")
        if self.bins < 1:
            raise ValueError("bins must be at least 1")

    @property
    def edges(self):
        return np.linspace(self.lo, self.hi, self.bins + 1)

    @property
    def width(self):
        return (self.hi - self.lo) / self.bins

    @property
    def centers(self):
        e = self.edges
        return 0.5 * (e[:-1] + e[1:])


def _as_pair(values, weights):
    f = np.asarray(values, dtype=float).ravel()
    w = np.asarray(weights, dtype=float).ravel()
    if f.shape != w.shape:
        raise ValueError("values and weights must have equal length")
    if f.size == 0:
        raise ValueError("need at least one sample")
    return f, w


def ratio_estimate(values, weights):
    """``sum(w f) / sum(w)``."""
    f, w = _as_pair(values, weights)
    sw = w.sum()
    if not sw > 0:
        raise ZeroWeightSum("weights sum to zero")
    return float(np.dot(w, f) / sw)


class RatioAccumulator:
    """Mergeable running sums for the ratio estimator and its delta-method variance."""

    def __init__(self):
        self.n = 0
        self.sw = 0.0
        self.sw2 = 0.0
        self.swf = 0.0
        self.sw2f = 0.0
        self.sw2f2 = 0.0

    def add(self, values, weights):
        f, w = _as_pair(values, weights)
        w2 = w * w
        self.n += f.size
        self.sw += w.sum()
        self.sw2 += w2.sum()
        self.swf += np.dot(w, f)
        self.sw2f += np.dot(w2, f)
        self.sw2f2 += np.dot(w2, f * f)
        return self

    def merge(self, other):
        out = RatioAccumulator()
        for k in ("n", "sw", "sw2", "swf", "sw2f", "sw2f2"):
            setattr(out, k, getattr(self, k) + getattr(other, k))
        return out

    def report(self, confidence=0.99):
        if not self.sw > 0:
            raise ZeroWeightSum("weights sum to zero")
        m = self.swf / self.sw
        # sum w^2 (f - m)^2 expanded; clipped at 0 against rounding
        num = max(self.sw2f2 - 2.0 * m * self.sw2f + m * m * self.sw2, 0.0)
        var = num / self.sw**2
        z = norm.ppf(0.5 + 0.5 * confidence)
        ess = self.sw**2 / self.sw2
        return EstimateReport(float(m), float(z * np.sqrt(var)), confidence, self.n,
                              float(min(ess, self.n)))


def ratio_ci(values, weights, confidence=0.99):
    """Ratio estimate with a normal confidence interval from the delta method."""
    f, w = _as_pair(values, weights)
    if f.size < 2:
        raise ValueError("need at least two samples for a confidence interval")
    if not 0 < confidence < 1:
        raise ValueError("confidence must lie in (0, 1)")
    sw = w.sum()
    if not sw > 0:
        raise ZeroWeightSum("weights sum to zero")
    m = np.dot(w, f) / sw
    var = np.sum(w**2 * (f - m) ** 2) / sw**2
    z = norm.ppf(0.5 + 0.5 * confidence)
    ess = sw**2 / np.sum(w**2)
    return EstimateReport(float(m), float(z * np.sqrt(var)), confidence, int(f.size),
                          float(min(ess, f.size)))


@dataclass
class Histogram:
    spec: HistogramSpec
    density: np.ndarray
    stderr: np.ndarray
    in_range_weight: float
    out_of_range_weight: float
    total_weight: float

    @property
    def centers(self):
        return self.spec.centers


class HistogramAccumulator:
    """Mergeable per-bin weight sums."""

    def __init__(self, spec):
        self.spec = spec
        self.bin_w = np.zeros(spec.bins)
        self.bin_w2 = np.zeros(spec.bins)
        self.sw = 0.0
        self.sw2 = 0.0

    def add(self, values, weights):
        f, w = _as_pair(values, weights)
        self.bin_w += np.histogram(f, bins=self.spec.edges, weights=w)[0]
        self.bin_w2 += np.histogram(f, bins=self.spec.edges, weights=w * w)[0]
        self.sw += w.sum()
        self.sw2 += np.dot(w, w)
        return self

    def merge(self, other):
        out = HistogramAccumulator(self.spec)
        out.bin_w = self.bin_w + other.bin_w
        out.bin_w2 = self.bin_w2 + other.bin_w2
        out.sw = self.sw + other.sw
        out.sw2 = self.sw2 + other.sw2
        return out

    def result(self):
        if not self.sw > 0:
            raise ZeroWeightSum("weights sum to zero")
        h = self.spec.width
        p = self.bin_w / self.sw
        # delta-method variance of the bin fraction sum(w 1_k) / sum(w)
        var = (self.bin_w2 * (1.0 - 2.0 * p) + p * p * self.sw2) / self.sw**2
        inside = float(self.bin_w.sum())
        return Histogram(self.spec, p / h, np.sqrt(np.maximum(var, 0.0)) / h,
                         inside, float(self.sw - inside), float(self.sw))


def weighted_histogram(values, weights, spec):
    """Bin densities normalized by the total weight, with delta-method standard errors."""
    return HistogramAccumulator(spec).add(values, weights).result()


def vertices(y, r):
    """Vertices ``v_{i+1} = v_i + r_i y_i`` starting from the origin, then centered."""
    y = np.asarray(y, dtype=float)
    steps = np.asarray(r, dtype=float)[:, None] * y
    v = np.zeros_like(y)
    v[..., 1:, :] = np.cumsum(steps[..., :-1, :], axis=-2)
    return v - v.mean(axis=-2, keepdims=True)


def gyradius_squared(y, r):
    """Mean squared distance of the vertices from their centroid."""
    v = vertices(y, r)
    return np.einsum("...ij,...ij->...", v, v) / v.shape[-2]


def chord_length(y, r, i, j):
    """Distance between vertices ``i`` and ``j`` (1-based)."""
    n = np.shape(y)[-2]
    if not (1 <= i <= n and 1 <= j <= n):
        raise IndexError(f"vertex indices must lie in 1..{n}, got ({i}, {j})")
    v = vertices(y, r)
    diff = v[..., i - 1, :] - v[..., j - 1, :]
    return np.sqrt(np.einsum("...i,...i->...", diff, diff))


_CHORD = re.compile(r"^chord:(\d+):(\d+)$")


def parse_functional(tag, n=None):
    """Map ``"gyradius"`` or ``"chord:i:j"`` to a vectorized function of ``(y, r)``."""
    if tag == "gyradius":
        return gyradius_squared
    m = _CHORD.match(tag)
    if m:
        i, j = int(m.group(1)), int(m.group(2))
        if n is not None and not (1 <= i <= n and 1 <= j <= n):
            raise ValueError(f"chord indices must lie in 1..{n}, got {tag!r}")
        return lambda y, r: chord_length(y, r, i, j)
    raise ValueError(f"unknown functional {tag!r}; use 'gyradius' or 'chord:i:j'")


def run_until_ci(config, functional, confidence=0.99, rel_radius=1e-3,
                 max_samples=10_000_000, threads=1):
    """Sample chunk by chunk until the CI radius drops below ``rel_radius * |mean|``."""
    if not rel_radius > 0:
        raise ValueError("rel_radius must be positive")
    fn = parse_functional(functional, config.n) if isinstance(functional, str) else functional
    acc = RatioAccumulator()
    offset = None
    chunk = 0
    step = max(1, threads)
    while acc.n < max_samples:
        group = min(step, -(-(max_samples - acc.n) // config.chunk_size))
        for part in _chunks(config, chunk, group, threads):
            take = min(len(part), max_samples - acc.n)
            logw = part.log_weight[:take]
            if offset is None:
                offset = float(np.max(logw))
            acc.add(fn(part.y[:take], config.r), np.exp(logw - offset))
            chunk += 1
            if acc.n >= 2:
                rep = acc.report(confidence)
                if rep.ci_radius <= rel_radius * abs(rep.mean):
                    return rep
    rep = acc.report(confidence)
    raise BudgetExceeded(
        f"CI radius {rep.ci_radius!r} still above {rel_radius} * |{rep.mean!r}| "
        f"after {rep.n_samples} samples", report=rep)


def _chunks(config, first, count, threads):
    def one(c):
        return sample_batch(config, config.chunk_size, first_chunk=c)

    if threads <= 1 or count == 1:
        return [one(c) for c in range(first, first + count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, range(first, first + count)))
