"""Conformal barycenter of a weighted arm and the closure / opening maps.

The barycenter ``w`` of directions ``x_1..x_n`` with weights ``r`` is the
point of the open unit ball where ``F(w) = sum_i r_i shift(w, x_i)``
vanishes. It is found by damped Newton iteration. Each step is taken in the
frame where the current iterate sits at the origin: there the Jacobian is
``-2 * sum_i r_i (I - y_i y_i^T)``, which is symmetric positive definite
whenever the shifted directions are not all collinear, so the step is always
well defined. The step is mapped back with the inverse shift.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidEdgeLengths, NonConvergence, Unstable
from .hyperbolic import shift, shift_d1, shift_unchecked

BALL_LIMIT = 1.0 - 1e-9
MAX_HALVINGS = 60


def as_edge_lengths(r, n=None):
    """Validate an edge-length vector and return it as a float array."""
    r = np.asarray(r, dtype=float)
    if r.ndim != 1:
        raise InvalidEdgeLengths("edge lengths must be a 1-d vector")
    if n is not None and r.size != n:
        raise InvalidEdgeLengths(f"expected {n} edge lengths, got {r.size}")
    if r.size < 3:
        raise InvalidEdgeLengths(f"need at least 3 edges, got {r.size}")
    if not np.all(np.isfinite(r)) or np.any(r <= 0):
        raise InvalidEdgeLengths("edge lengths must be finite and positive")
    half = 0.5 * r.sum()
    bad = np.flatnonzero(r >= half)
    if bad.size:
        j = int(bad[0])
        raise InvalidEdgeLengths(
            f"edge {j + 1} has length {float(r[j])!r} >= half the total {float(half)!r}; "
            "every r_j must be < sum(r)/2"
        )
    return r


@dataclass(frozen=True)
class SolverSettings:
    residual_tol: float = 1e-12
    max_iter: int = 100
    step_shrink: float = 0.5

    def __post_init__(self):
        if not self.residual_tol > 0:
            raise ValueError("residual_tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if not 0.0 < self.step_shrink < 1.0:
            raise ValueError("step_shrink must lie in (0, 1)")


DEFAULT_SETTINGS = SolverSettings()


@dataclass
class BarycenterResult:
    """Outcome of a batched solve. Arrays carry a leading batch axis."""

    w: np.ndarray
    y: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    history: list = field(default_factory=list)


def is_stable(x, r, collision_tol=0.0):
    """True iff every cluster of (near-)coincident directions has r-mass < half.

    Clusters are the connected components of the graph joining directions
    closer than ``collision_tol``; with ``collision_tol=0`` they are groups
    of exactly equal vectors.
    """
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    n = x.shape[0]
    half = 0.5 * r.sum()
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if collision_tol > 0:
                close = np.linalg.norm(x[i] - x[j]) <= collision_tol
            else:
                close = np.array_equal(x[i], x[j])
            if close:
                parent[find(i)] = find(j)
    mass = {}
    for i in range(n):
        root = find(i)
        mass[root] = mass.get(root, 0.0) + r[i]
    return all(m < half for m in mass.values())


def closure_residual(w, x, r):
    """``sum_i r_i shift(w, x_i)``; zero exactly at the conformal barycenter."""
    w = np.asarray(w, dtype=float)
    x = np.asarray(x, dtype=float)
    return np.einsum("i,...id->...d", np.asarray(r, dtype=float), shift(w[..., None, :], x))


def residual_jacobian(w, x, r):
    """Derivative of :func:`closure_residual` in ``w``."""

    w = np.asarray(w, dtype=float)
    return np.einsum("i,...ijk->...jk", np.asarray(r, dtype=float), shift_d1(w[..., None, :], x))


def _initial_guess(x, r, total):
    w0 = (r @ x) / total
    rad = np.linalg.norm(w0, axis=-1)
    scale = np.where(rad > 0.9, 0.9 / np.where(rad > 0, rad, 1.0), 1.0)
    return w0 * scale[:, None]


def _residuals(w, x, r):
    y = shift_unchecked(w[:, None, :], x)
    f = r @ y
    return y, f, np.linalg.norm(f, axis=-1)


def _newton(w, x, r, tol, settings, history=None):
    """Damped Newton in place on ``w``; the working precision is ``w.dtype``."""
    bsz, n, d = x.shape
    total = r.sum()
    eye = np.eye(d)
    y, f, fn = _residuals(w, x, r)
    iterations = np.zeros(bsz, dtype=np.int64)
    stalled = np.zeros(bsz, dtype=bool)
    if history is not None:
        history.append(fn.astype(float))

    for _ in range(settings.max_iter):
        active = np.flatnonzero((fn > tol) & ~stalled)
        if active.size == 0:
            break
        ya, fa, fna, wa, xa = y[active], f[active], fn[active], w[active], x[active]
        # The step only needs double precision; residuals use the working dtype.
        gram = (total * eye - (np.swapaxes(ya, -1, -2) * r) @ ya).astype(float)
        rhs = fa.astype(float)
        try:
            u = 0.5 * np.linalg.solve(gram, rhs[..., None])[..., 0]
        except np.linalg.LinAlgError:
            u = np.zeros_like(rhs)
            for k in range(active.size):
                try:
                    u[k] = 0.5 * np.linalg.solve(gram[k], rhs[k])
                except np.linalg.LinAlgError:
                    stalled[active[k]] = True
        u = u.astype(w.dtype)

        t = np.ones(active.size, dtype=w.dtype)
        pending = np.arange(active.size)
        for _h in range(MAX_HALVINGS):
            step = t[pending, None] * u[pending]
            inside = np.linalg.norm(step, axis=-1) < BALL_LIMIT
            w_new = shift_unchecked(-wa[pending], step)
            inside &= np.linalg.norm(w_new, axis=-1) <= BALL_LIMIT
            y_new, f_new, fn_new = _residuals(w_new, xa[pending], r)
            ok = inside & (fn_new < fna[pending])
            glob = active[pending[ok]]
            w[glob] = w_new[ok]
            y[glob] = y_new[ok]
            f[glob] = f_new[ok]
            fn[glob] = fn_new[ok]
            iterations[glob] += 1
            pending = pending[~ok]
            if pending.size == 0:
                break
            t[pending] *= settings.step_shrink
        stalled[active[pending]] = True
        if history is not None:
            history.append(fn.astype(float))
    return y, fn, iterations


def solve_batch(x, r, settings=DEFAULT_SETTINGS, w0=None, track_history=False):
    """Conformal barycenters of a batch of arms ``x`` of shape ``(B, n, d)``.

    Samples whose residual stalls above tolerance in double precision (the
    barycenter sits so close to the sphere that rounding in ``w`` dominates)
    are polished again in extended precision. Never raises on
    non-convergence; inspect ``result.converged`` instead.
    """
    x = np.asarray(x, dtype=float)
    r = np.asarray(r, dtype=float)
    bsz, n, d = x.shape
    tol = settings.residual_tol * r.sum()

    if w0 is None:
        w = _initial_guess(x, r, r.sum())
    else:
        w = np.array(w0, dtype=float).reshape(bsz, d)
    history = [] if track_history else None
    y, fn, iterations = _newton(w, x, r, tol, settings, history)

    retry = np.flatnonzero(fn > tol)
    if retry.size and np.finfo(np.longdouble).eps < np.finfo(float).eps:
        wl = w[retry].astype(np.longdouble)
        yl, fnl, itl = _newton(wl, x[retry].astype(np.longdouble),
                               r.astype(np.longdouble), tol, settings)
        w[retry] = wl.astype(float)
        y[retry] = yl.astype(float)
        fn[retry] = fnl.astype(float)
        iterations[retry] += itl

    converged = fn <= tol
    return BarycenterResult(w=w, y=y, residual=fn, iterations=iterations,
                            converged=converged, history=history or [])


def _check_arm(x, r):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("an arm must have shape (n, d) with d >= 2")
    r = as_edge_lengths(r, x.shape[0])
    if not np.allclose(np.linalg.norm(x, axis=-1), 1.0, rtol=0, atol=1e-12):
        raise ValueError("arm directions must be unit vectors")
    return x, r


def _solve_one(x, r, settings):
    x, r = _check_arm(x, r)
    if not is_stable(x, r, 0.0):
        raise Unstable("coincident directions carry at least half the total edge length")
    res = solve_batch(x[None], r, settings)
    if not res.converged[0]:
        raise NonConvergence(
            f"no conformal barycenter within {settings.max_iter} iterations "
            f"(residual {float(res.residual[0])!r})",
            best_w=res.w[0],
            residual=float(res.residual[0]),
        )
    return res.w[0], res.y[0]


def conformal_barycenter(x, r, settings=DEFAULT_SETTINGS):
    """Conformal barycenter ``w_*(x)`` of a single arm ``x`` of shape ``(n, d)``."""
    return _solve_one(x, r, settings)[0]


def close(x, r, settings=DEFAULT_SETTINGS):
    """Closure map: returns ``(w_*, y_*)`` with ``y_*_i = shift(w_*, x_i)`` closed.

    ``y_*`` comes straight from the solver, so it keeps the closure accuracy
    of the extended-precision pass when that pass was needed.
    """
    return _solve_one(x, r, settings)


def open_polygon(w, y):
    """Opening map ``(w, y) -> shift(-w, y_i)``, the inverse of :func:`close`."""
    w = np.asarray(w, dtype=float)
    y = np.asarray(y, dtype=float)
    return shift(-w[..., None, :], y)


def interpolate_closure(x, r, t, settings=DEFAULT_SETTINGS):
    """The arm ``shift(t * w_*, x)``: ``x`` itself at ``t=0``, the closed polygon at ``t=1``."""
    if not 0.0 <= t <= 1.0:
        raise ValueError("t must lie in [0, 1]")
    x, r = _check_arm(x, r)
    w, _ = _solve_one(x, r, settings)
    return shift(t * w[None, :], x)
