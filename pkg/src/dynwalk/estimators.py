"""Monte Carlo estimators for return, annulus, joint-return and level events.

Randomness
----------
Two sources are used, both deterministic in ``seed``:

* level events on schedules with ``s_M <= DENSE_LIMIT`` use the hash-backed
  realizations of :mod:`dynwalk.core`: sample ``i`` is the realization with
  seed ``split_seed(seed, i)``, so any single sample can be regenerated alone;
* walks started at a given point, and level events on larger schedules, use
  numpy ``PCG64`` streams keyed by ``SeedSequence([seed, stream, chunk])``
  with a fixed chunk of ``CHUNK`` samples.

Long windows are simulated exactly in law by jumping: from a point at L1
distance ``d`` from the origin the walk cannot reach the origin in fewer than
``d`` steps, so ``d - 1`` steps are taken at once.  In the rotated
coordinates ``u = x + y`` and ``v = x - y`` a ``j``-step displacement is a pair
of independent ``2 Bin(j, 1/2) - j`` variables.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import rng as _rng
from .core import batch_steps, two_slice_steps
from .dirichlet import solve_hitting, walk_on_squares
from .schedule import K_of, Schedule, levels_dense

CHUNK = 8192
DENSE_LIMIT = 4096
MIN_CONDITIONING = 30
Z95 = 1.959963984540054

_WALK, _COUPLE, _HIT, _LEAVE, _ANNULUS, _LEVELS, _LEVELS_T = range(1, 8)


class UndefinedRatioError(ArithmeticError):
    """Denominator estimate indistinguishable from zero."""


@dataclass(frozen=True)
class EstimatorReport:
    mean: float
    stderr: float
    n_samples: int
    ci_level: float = 0.95
    ci_low: float = float("nan")
    ci_high: float = float("nan")

    def within(self, value: float, k: float = 3.0) -> bool:
        return abs(self.mean - value) <= k * self.stderr


@dataclass
class Tally:
    """Mergeable (count, sum, sum of squares) triple."""

    count: int = 0
    total: float = 0.0
    total_sq: float = 0.0

    @classmethod
    def of(cls, values) -> Tally:
        v = np.asarray(values, float)
        return cls(v.size, float(v.sum()), float(np.dot(v, v)))

    def merge(self, other: Tally) -> Tally:
        return Tally(self.count + other.count, self.total + other.total,
                     self.total_sq + other.total_sq)

    def report(self, bernoulli: bool = True) -> EstimatorReport:
        n = self.count
        if n == 0:
            nan = float("nan")
            return EstimatorReport(nan, nan, 0, 0.95, nan, nan)
        mean = self.total / n
        if bernoulli:
            se = math.sqrt(max(mean * (1 - mean), 0.0) / n)
        else:
            var = (self.total_sq - n * mean * mean) / (n - 1) if n > 1 else 0.0
            se = math.sqrt(max(var, 0.0) / n)
        lo, hi = mean - Z95 * se, mean + Z95 * se
        if bernoulli:
            lo, hi = max(lo, 0.0), min(hi, 1.0)
        return EstimatorReport(mean, se, n, 0.95, lo, hi)


def bernoulli_report(successes: int, n: int) -> EstimatorReport:
    return Tally(n, float(successes), float(successes)).report()


@dataclass(frozen=True)
class RatioReport:
    """``numerator / denominator**2`` with a delta-method standard error."""

    numerator: EstimatorReport
    denominator: EstimatorReport
    ratio: float
    stderr: float


def _generator(seed: int, stream: int, chunk: int) -> np.random.Generator:
    ss = np.random.SeedSequence([int(seed) & ((1 << 64) - 1), stream, chunk])
    return np.random.Generator(np.random.PCG64(ss))


def _chunks(samples: int, size: int = CHUNK):
    return [(c, min(size, samples - c * size)) for c in range(-(-samples // size))]


def _map(fn, tasks, workers: int = 1):
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(fn, *zip(*tasks)))
    return [fn(*t) for t in tasks]


def _norm(x) -> float:
    return math.hypot(x[0], x[1])


# ---------------------------------------------------------------------------
# jump samplers


def _disp(a_u, a_v, j):
    u, v = 2 * a_u - j, 2 * a_v - j
    return (u + v) // 2, (u - v) // 2


def _window(rng, px, py, L: int):
    """Walk ``L`` steps from each start; returns (hit origin at some step >= 1, x, y).

    Positions of walks that hit are frozen at the hitting point.
    """
    px, py = px.copy(), py.copy()
    hit = np.zeros(px.size, bool)
    left = np.full(px.size, L, np.int64)
    live = np.flatnonzero(left > 0)
    while live.size:
        x, y = px[live], py[live]
        j = np.clip(np.abs(x) + np.abs(y) - 1, 1, left[live])
        a_u = rng.binomial(j, 0.5)
        a_v = rng.binomial(j, 0.5)
        dx, dy = _disp(a_u, a_v, j)
        x, y = x + dx, y + dy
        px[live], py[live] = x, y
        left[live] -= j
        h = (x == 0) & (y == 0)
        hit[live[h]] = True
        live = live[~h & (left[live] > 0)]
    return hit, px, py


def _window_pair(rng_a, rng_b, p0, pt, L: int, keep: float, alive0, alivet):
    """Coupled walks over ``L`` steps; each step is shared with probability ``keep``.

    Walk 0 consumes ``rng_a`` exactly as :func:`_window` does when both walks
    coincide, so ``keep = 1`` with equal starts reproduces it bit for bit.
    Given walk 0's ``j``-step jump, its unshared steps are a uniform subset,
    so their rotated-coordinate counts are hypergeometric.
    Returns updated (alive0, alivet, p0, pt): a walk dies when it hits the origin.
    """
    (x0, y0), (xt, yt) = (p0[0].copy(), p0[1].copy()), (pt[0].copy(), pt[1].copy())
    a0, at = alive0.copy(), alivet.copy()
    left = np.full(x0.size, L, np.int64)
    live = np.flatnonzero((a0 | at) & (left > 0))
    big = np.iinfo(np.int64).max
    while live.size:
        d0 = np.where(a0[live], np.abs(x0[live]) + np.abs(y0[live]) - 1, big)
        dt = np.where(at[live], np.abs(xt[live]) + np.abs(yt[live]) - 1, big)
        j = np.clip(np.minimum(d0, dt), 1, left[live])
        a_u = rng_a.binomial(j, 0.5)
        a_v = rng_a.binomial(j, 0.5)
        u = j - rng_b.binomial(j, keep)
        h_u = rng_b.hypergeometric(a_u, j - a_u, u)
        h_v = rng_b.hypergeometric(a_v, j - a_v, u)
        f_u = rng_b.binomial(u, 0.5)
        f_v = rng_b.binomial(u, 0.5)
        dx0, dy0 = _disp(a_u, a_v, j)
        dxt, dyt = _disp(a_u - h_u + f_u, a_v - h_v + f_v, j)
        x0[live] += dx0
        y0[live] += dy0
        xt[live] += dxt
        yt[live] += dyt
        left[live] -= j
        a0[live] &= ~((x0[live] == 0) & (y0[live] == 0))
        at[live] &= ~((xt[live] == 0) & (yt[live] == 0))
        live = live[(a0[live] | at[live]) & (left[live] > 0)]
    return a0, at, (x0, y0), (xt, yt)


def _displacement(rng, j, size):
    return _disp(rng.binomial(j, 0.5, size), rng.binomial(j, 0.5, size), j)


# ---------------------------------------------------------------------------
# hitting probabilities


def _check_start(n, x):
    r = _norm(x)
    if r == 0:
        raise ValueError("start at origin")
    if r >= n:
        raise ValueError(f"start {tuple(x)} not inside radius {n}")


def hitting_prob_exact(n: int, x) -> float:
    """``P_x(reach the origin before |S| >= n)`` from the Dirichlet solve."""
    _check_start(n, x)
    return solve_hitting(int(n))(x)


def _hit_chunk(n, x, seed, c, size):
    return Tally.of(walk_on_squares(n, x, size, _generator(seed, _HIT, c)))


def hitting_prob_mc(n: int, x, samples: int, seed: int, workers: int = 1) -> EstimatorReport:
    _check_start(n, x)
    tasks = [(n, tuple(x), seed, c, m) for c, m in _chunks(samples)]
    return _merge(_map(_hit_chunk, tasks, workers)).report()


def _merge(tallies) -> Tally:
    out = Tally()
    for t in tallies:
        out = out.merge(t)
    return out


def lawler_gaps(radii, starts) -> list[tuple[int, tuple[int, int], float, float]]:
    """Rows ``(n, x, h, gap)`` with ``gap = h log n - (log n - log|x|)`` (base 2)."""
    rows = []
    for n in radii:
        for x in starts:
            h = hitting_prob_exact(n, x)
            ln = math.log2(n)
            rows.append((n, tuple(x), h, h * ln - (ln - math.log2(_norm(x)))))
    return rows


def fit_lawler_constant(radii, starts) -> float:
    """Smallest ``C >= 0`` with ``(log n - log|x| - C)/log n <= h <= (log n - log|x| + C)/log n``."""
    return max([0.0] + [abs(g) for *_, g in lawler_gaps(radii, starts)])


# ---------------------------------------------------------------------------
# single-level events from a fixed start


def _return_chunk(L, x, seed, c, size):
    g = _generator(seed, _WALK, c)
    hit, _, _ = _window(g, np.full(size, x[0], np.int64), np.full(size, x[1], np.int64), L)
    return Tally.of(hit)


def estimate_return_prob(sched: Schedule, k: int, x, samples: int, seed: int,
                         workers: int = 1) -> EstimatorReport:
    """P(walk from ``x`` visits the origin within ``s_k - s_{k-1}`` steps)."""
    if tuple(x) == (0, 0):
        raise ValueError("start at origin: the window's left end is a sure return")
    if not 1 <= k <= sched.M:
        raise ValueError(f"level {k} outside [1, {sched.M}]")
    a, b = sched.window(k)
    tasks = [(b - a, tuple(x), seed, c, m) for c, m in _chunks(samples)]
    return _merge(_map(_return_chunk, tasks, workers)).report()


def estimate_g_event(sched: Schedule, k: int, x, samples: int, seed: int) -> EstimatorReport:
    """P(walk from ``x`` is outside annulus ``k`` after ``s_k - s_{k-1}`` steps)."""
    if not 1 <= k <= sched.M:
        raise ValueError(f"level {k} outside [1, {sched.M}]")
    a, b = sched.window(k)
    tally = Tally()
    for c, m in _chunks(samples):
        dx, dy = _displacement(_generator(seed, _ANNULUS, c), b - a, m)
        tally = tally.merge(Tally.of(~sched.in_annulus(k, x[0] + dx, x[1] + dy)))
    return tally.report()


def _joint_chunk(L, x, y, keep, seed, c, size):
    ga, gb = _generator(seed, _WALK, c), _generator(seed, _COUPLE, c)
    full = lambda v: np.full(size, v, np.int64)  # noqa: E731
    alive = np.ones(size, bool)
    a0, at, _, _ = _window_pair(ga, gb, (full(x[0]), full(x[1])), (full(y[0]), full(y[1])),
                                L, keep, alive, alive)
    return Tally.of(~a0 & ~at)


def estimate_joint_return(sched: Schedule, k: int, x, y, t: float, samples: int, seed: int,
                          workers: int = 1) -> EstimatorReport:
    """P(both coupled walks, from ``x`` at time 0 and ``y`` at time ``t``, visit the origin).

    Walk 0 uses the same stream as :func:`estimate_return_prob`, so with
    ``t = 0`` and ``y = x`` both estimators see identical trajectories.
    """
    if tuple(x) == (0, 0) or tuple(y) == (0, 0):
        raise ValueError("start at origin")
    if t < 0:
        raise ValueError("t must be >= 0")
    a, b = sched.window(k)
    tasks = [(b - a, tuple(x), tuple(y), math.exp(-t), seed, c, m) for c, m in _chunks(samples)]
    return _merge(_map(_joint_chunk, tasks, workers)).report()


def joint_return_oracle(sched: Schedule, k: int, x, y, samples: int, seed: int) -> EstimatorReport:
    """Independent-pairs reference: product of two independent walks' return indicators."""
    a, b = sched.window(k)
    tally = Tally()
    for c, m in _chunks(samples):
        g = _generator(seed, _WALK, c)
        h1, _, _ = _window(g, np.full(m, x[0], np.int64), np.full(m, x[1], np.int64), b - a)
        h2, _, _ = _window(g, np.full(m, y[0], np.int64), np.full(m, y[1], np.int64), b - a)
        tally = tally.merge(Tally.of(h1 & h2))
    return tally.report()


# ---------------------------------------------------------------------------
# level events E_k at times 0 and t


def _levels_dense_chunk(sched, M, seed, t, lo, size):
    seeds = _rng.split_seed(seed, np.arange(lo, lo + size, dtype=np.uint64))
    N = sched.s[M]
    if t is None:
        return levels_dense(batch_steps(seeds, N, 0.0), sched, M), None
    c0, ct = two_slice_steps(seeds, N, t)
    return levels_dense(c0, sched, M), levels_dense(ct, sched, M)


def _levels_jump_chunk(sched, M, seed, t, c, size):
    ga = _generator(seed, _LEVELS, c)
    gb = _generator(seed, _LEVELS_T, c)
    keep = 1.0 if t is None else math.exp(-t)
    e0 = np.ones((size, M + 1), bool)
    et = np.ones((size, M + 1), bool)
    zero = np.zeros(size, np.int64)
    p0, pt = (zero, zero), (zero, zero)
    alive = np.ones(size, bool)
    # step 1 cannot end at the origin, so no visit is recorded here
    a0, at, p0, pt = _window_pair(ga, gb, p0, pt, 1, keep, alive, alive)
    for k in range(1, M + 1):
        a, b = sched.window(k)
        a0, at, p0, pt = _window_pair(ga, gb, p0, pt, b - a, keep, e0[:, k - 1], et[:, k - 1])
        e0[:, k] = a0 & sched.in_annulus(k, *p0)
        et[:, k] = at & sched.in_annulus(k, *pt)
    return e0, (None if t is None else et)


def _levels(sched, M, samples, seed, t=None, method="auto", workers=1):
    """Per-sample ``E_0..E_M`` at time 0 (and at ``t``) as boolean arrays."""
    if method == "auto":
        method = "dense" if sched.s[M] <= DENSE_LIMIT else "jump"
    if method == "dense":
        rows = max(1, min(CHUNK, (1 << 22) // max(sched.s[M], 1)))
        tasks = [(sched, M, seed, t, c * rows, m) for c, m in _chunks(samples, rows)]
        parts = _map(_levels_dense_chunk, tasks, workers)
    elif method == "jump":
        tasks = [(sched, M, seed, t, c, m) for c, m in _chunks(samples)]
        parts = _map(_levels_jump_chunk, tasks, workers)
    else:
        raise ValueError(f"unknown method {method!r}")
    e0 = np.concatenate([p[0] for p in parts]) if parts else np.ones((0, M + 1), bool)
    et = None if t is None else (np.concatenate([p[1] for p in parts]) if parts else e0)
    return e0, et


def estimate_E_M_prob(sched: Schedule, M: int | None, samples: int, seed: int,
                      method: str = "auto", workers: int = 1) -> EstimatorReport:
    """P(E_M) at a fixed time, one fresh walk per sample."""
    M = sched.M if M is None else M
    e0, _ = _levels(sched, M, samples, seed, None, method, workers)
    return Tally.of(e0[:, M]).report()


def estimate_f(sched: Schedule, M: int | None, t: float, samples: int, seed: int,
               method: str = "auto", workers: int = 1) -> RatioReport:
    """``P(E_M(0) and E_M(t)) / P(E_M(0))^2`` on coupled time slices.

    Numerator and denominator share samples, so the numerator event is
    contained in the denominator event sample by sample.  Raises
    :class:`UndefinedRatioError` when the denominator is within 5 standard
    errors of zero.
    """
    M = sched.M if M is None else M
    if t < 0:
        raise ValueError("t must be >= 0")
    e0, et = _levels(sched, M, samples, seed, t, method, workers)
    both = e0[:, M] & et[:, M]
    num, den = Tally.of(both).report(), Tally.of(e0[:, M]).report()
    if M == 0:
        return RatioReport(num, den, 1.0, 0.0)
    a, b, n = num.mean, den.mean, den.n_samples
    if b <= 0 or b <= 5 * den.stderr:
        raise UndefinedRatioError(f"P(E_{M}) estimate {b:.3g} not resolved from zero")
    var_a, var_b, cov = a * (1 - a), b * (1 - b), a - a * b
    var = (var_a / b**4 + 4 * a * a * var_b / b**6 - 4 * a * cov / b**5) / n
    return RatioReport(num, den, a / b**2, math.sqrt(max(var, 0.0)))


@dataclass(frozen=True)
class SummaryRow:
    k: int
    single: EstimatorReport  # P(E_k(0) | E_{k-1}(0))
    joint: EstimatorReport  # P(E_k(0,t) | E_{k-1}(0,t))
    single_ok: bool  # enough conditioning samples
    joint_ok: bool


@dataclass(frozen=True)
class SummaryTable:
    t: float
    K: int
    rows: list[SummaryRow]
    C_single: float  # smallest C with p^2 >= 1 - 4/k - C log k / k^2, k >= 2
    C_joint: float  # smallest C with p_t <= 1 - 4/k + C log k / k^2, k > max(K, 1)
    C: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "C", max(self.C_single, self.C_joint))


def fit_summary_constants(rows, K: int) -> tuple[float, float]:
    cs, cj = 0.0, 0.0
    for r in rows:
        if r.k < 2:
            continue
        scale = r.k**2 / math.log2(r.k)
        if r.single_ok:
            cs = max(cs, (1 - 4 / r.k - r.single.mean**2) * scale)
        if r.joint_ok and r.k > K:
            cj = max(cj, (r.joint.mean - 1 + 4 / r.k) * scale)
    return cs, cj


def check_summary(sched: Schedule, M: int | None, t: float, samples: int, seed: int,
                  method: str = "auto", workers: int = 1) -> SummaryTable:
    """Per-level conditional probabilities, conditioning by rejection.

    The fitted constants are meaningful for :func:`paper_schedule`, whose
    levels the ``4/k`` rate describes; on desk schedules read them as a trend.
    """
    M = sched.M if M is None else M
    e0, et = _levels(sched, M, samples, seed, t, method, workers)
    both = e0 & et
    rows = []
    for k in range(1, M + 1):
        n0, nb = int(e0[:, k - 1].sum()), int(both[:, k - 1].sum())
        rows.append(SummaryRow(
            k,
            bernoulli_report(int(e0[:, k].sum()), n0),
            bernoulli_report(int(both[:, k].sum()), nb),
            n0 >= MIN_CONDITIONING,
            nb >= MIN_CONDITIONING,
        ))
    K = K_of(t) if t > 0 else 0
    cs, cj = fit_summary_constants(rows, K)
    return SummaryTable(t, K, rows, cs, cj)


# ---------------------------------------------------------------------------
# second moment, leave bounds


def second_moment_lower_bound(L_samples) -> float:
    """``(E L)^2 / E(L^2)``, a lower bound on ``P(L > 0)``; 0 if every sample is 0."""
    v = np.asarray(L_samples, float)
    if v.size == 0:
        raise ValueError("need at least one sample")
    if np.any(v < 0):
        raise ValueError("samples must be nonnegative")
    sq = np.mean(v * v)
    return float(np.mean(v) ** 2 / sq) if sq > 0 else 0.0


def bootstrap_stderr(values, stat, n_boot: int = 1000, seed: int = 0) -> float:
    v = np.asarray(values, float)
    g = np.random.default_rng(seed)
    reps = [stat(v[g.integers(0, v.size, v.size)]) for _ in range(n_boot)]
    return float(np.std(reps, ddof=1))


def _exit_window(rng, steps: int, radius: float, size: int) -> np.ndarray:
    """Whether an ``steps``-step walk from the origin ever has ``|S| > radius``."""
    x = np.zeros(size, np.int64)
    y = np.zeros(size, np.int64)
    out = np.zeros(size, bool)
    left = np.full(size, steps, np.int64)
    live = np.flatnonzero(left > 0)
    while live.size:
        room = np.floor(radius - np.hypot(x[live], y[live]) + 1e-12).astype(np.int64)
        j = np.clip(room, 1, left[live])
        dx, dy = _disp(rng.binomial(j, 0.5), rng.binomial(j, 0.5), j)
        x[live] += dx
        y[live] += dy
        left[live] -= j
        o = x[live] ** 2 + y[live] ** 2 > radius**2
        out[live[o]] = True
        live = live[~o & (left[live] > 0)]
    return out


@dataclass(frozen=True)
class LeaveReport:
    far: EstimatorReport  # P(exists n' < n: |S_n'| > m sqrt n)
    near: EstimatorReport  # P(|S_n - x| < sqrt(n) / m)
    bound: float  # C / m^2
    far_ok: bool
    near_ok: bool


def check_leave(n: int, m: float, samples: int, seed: int, x=(0, 0), C: float = 1.0) -> LeaveReport:
    if not m < math.sqrt(n):
        raise ValueError("need m < sqrt(n)")
    far, near = Tally(), Tally()
    for c, size in _chunks(samples):
        g = _generator(seed, _LEAVE, c)
        far = far.merge(Tally.of(_exit_window(g, n - 1, m * math.sqrt(n), size)))
        dx, dy = _displacement(g, n, size)
        d2 = (dx - x[0]) ** 2 + (dy - x[1]) ** 2
        near = near.merge(Tally.of(d2 < n / m**2))
    far_r, near_r = far.report(), near.report()
    bound = C / m**2
    return LeaveReport(far_r, near_r, bound, far_r.mean <= bound, near_r.mean <= bound)
