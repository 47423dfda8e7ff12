"""Reproducible, chunked generation of weighted closed polygons.

Chunk ``c`` of a run draws from its own Philox stream keyed by
``(seed, c)``, so the output depends only on ``(config, count)`` and never on
how many worker threads were used.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from . import weights as W
from .barycenter import DEFAULT_SETTINGS, SolverSettings, as_edge_lengths, solve_batch
from .errors import AbortAfterRedraws, DegenerateSpan, SingularGram

log = logging.getLogger(__name__)

MAX_REDRAWS = 100
# Arms are closed in blocks of about this many scalars to keep the working set small.
BLOCK_ELEMENTS = 1 << 16


@dataclass(frozen=True)
class SamplerConfig:
    n: int
    d: int
    r: np.ndarray = None
    rho: Union[W.RhoPreset, np.ndarray, str] = W.RhoPreset.SQRT_R
    seed: int = 0
    chunk_size: int = 4096
    quotient: bool = False
    settings: SolverSettings = field(default=DEFAULT_SETTINGS)

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("n must be at least 3")
        if self.d < 2:
            raise ValueError("d must be at least 2")
        if self.chunk_size < 1:
            raise ValueError("chunk_size must be positive")
        r = np.ones(self.n) if self.r is None else self.r
        object.__setattr__(self, "r", as_edge_lengths(r, self.n))
        object.__setattr__(self, "seed", int(self.seed) & 0xFFFFFFFFFFFFFFFF)

    @property
    def rho_values(self):
        return W.resolve_rho(self.rho, self.r)


@dataclass
class WeightedSample:
    w: np.ndarray
    y: np.ndarray
    weight: float
    redraw_count: int = 0


@dataclass
class SampleBatch:
    """Column-oriented storage for many weighted samples.

    Indexing and iteration yield :class:`WeightedSample` views.
    """

    w: np.ndarray
    y: np.ndarray
    log_weight: np.ndarray
    redraw_count: np.ndarray

    @property
    def weight(self):
        return np.exp(self.log_weight)

    def __len__(self):
        return self.w.shape[0]

    def __getitem__(self, i):
        return WeightedSample(self.w[i], self.y[i], float(np.exp(self.log_weight[i])),
                              int(self.redraw_count[i]))

    def __iter__(self):
        return (self[i] for i in range(len(self)))

    @classmethod
    def concatenate(cls, parts):
        return cls(*(np.concatenate([getattr(p, k) for p in parts])
                     for k in ("w", "y", "log_weight", "redraw_count")))


def chunk_rng(seed, chunk):
    """Independent generator for chunk ``chunk`` of the stream ``seed``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(chunk),))
    return np.random.Generator(np.random.Philox(ss))


def sample_arm(rng, n, d, size=None):
    """Uniform random directions on the unit sphere: shape ``(n, d)`` or ``(size, n, d)``."""
    shape = (n, d) if size is None else (size, n, d)
    x = rng.standard_normal(shape)
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    return x


def _log_weights(w, y, r, rho, quotient):
    if quotient:
        return W.log_weight_K_hat(w, y, r, rho)
    return W.log_weight_K(w, y, r, rho)


def _close_and_weigh(x, config, rho):
    """Close a block of arms; returns (w, y, log_weight, ok)."""
    res = solve_batch(x, config.r, config.settings)
    ok = res.converged.copy()
    logw = np.full(len(x), np.nan)
    if ok.any():
        idx = np.flatnonzero(ok)
        try:
            logw[idx] = _log_weights(res.w[idx], res.y[idx], config.r, rho, config.quotient)
        except (SingularGram, DegenerateSpan):
            for i in idx:
                try:
                    logw[i] = _log_weights(res.w[i], res.y[i], config.r, rho, config.quotient)
                except (SingularGram, DegenerateSpan):
                    ok[i] = False
    ok &= np.isfinite(logw)
    return res.w, res.y, logw, ok


def next_sample(rng, config):
    """Draw arms until one closes, then attach its weight."""
    rho = config.rho_values
    for redraws in range(MAX_REDRAWS):
        x = sample_arm(rng, config.n, config.d, size=1)
        w, y, logw, ok = _close_and_weigh(x, config, rho)
        if ok[0]:
            return WeightedSample(w[0], y[0], float(np.exp(logw[0])), redraws)
    raise AbortAfterRedraws(f"{MAX_REDRAWS} consecutive arms failed to close")


def sample_chunk(config, chunk, count):
    """The first ``count`` samples of chunk ``chunk``."""
    rng = chunk_rng(config.seed, chunk)
    n, d = config.n, config.d
    rho = config.rho_values
    block = max(1, BLOCK_ELEMENTS // (n * d))
    ws, ys, lws = [], [], []
    failed = []
    for start in range(0, count, block):
        m = min(block, count - start)
        x = sample_arm(rng, n, d, size=m)
        w, y, logw, ok = _close_and_weigh(x, config, rho)
        ws.append(w)
        ys.append(y)
        lws.append(logw)
        failed.extend((start + np.flatnonzero(~ok)).tolist())
    w = np.concatenate(ws)
    y = np.concatenate(ys)
    logw = np.concatenate(lws)
    redraws = np.zeros(count, dtype=np.int64)
    # Failed slots are refilled in order from the same stream after the main draw.
    for i in failed:
        for attempt in range(1, MAX_REDRAWS + 1):
            x = sample_arm(rng, n, d, size=1)
            wi, yi, lwi, ok = _close_and_weigh(x, config, rho)
            if ok[0]:
                w[i], y[i], logw[i], redraws[i] = wi[0], yi[0], lwi[0], attempt
                break
        else:
            raise AbortAfterRedraws(f"{MAX_REDRAWS} consecutive arms failed to close")
    if failed:
        log.debug("chunk %d: redrew %d of %d samples", chunk, len(failed), count)
    if log.isEnabledFor(logging.DEBUG):
        wt = np.exp(logw - logw.max())
        log.debug("chunk %d: weight cv %.4g, ess fraction %.4g", chunk,
                  wt.std() / wt.mean(), wt.sum() ** 2 / np.dot(wt, wt) / count)
    return SampleBatch(w, y, logw, redraws)


def chunk_counts(count, chunk_size):
    full, rest = divmod(count, chunk_size)
    return [chunk_size] * full + ([rest] if rest else [])


def sample_batch(config, count, threads=1, first_chunk=0):
    """Exactly ``count`` samples, made of consecutive chunks starting at ``first_chunk``."""
    if count < 1:
        raise ValueError("count must be at least 1")
    sizes = chunk_counts(count, config.chunk_size)
    jobs = [(first_chunk + k, m) for k, m in enumerate(sizes)]
    if threads <= 1 or len(jobs) == 1:
        parts = [sample_chunk(config, c, m) for c, m in jobs]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: sample_chunk(config, *job), jobs))
    return SampleBatch.concatenate(parts)
