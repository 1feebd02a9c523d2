"""Box-counting dimension of time sets and escape-rate scans."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import DynamicalWalkRealization, positions, refresh_events
from .schedule import PiecewiseIndicator, Schedule


@dataclass(frozen=True)
class DimensionReport:
    depths: np.ndarray
    scales: np.ndarray  # box sizes 2**-depth, in units of the domain length
    counts: np.ndarray
    slope: float
    r_squared: float
    empty: bool


def box_count_dimension(ind, depths, domain: tuple[float, float] | None = None) -> DimensionReport:
    """Least-squares slope of ``log2(count)`` against depth over dyadic boxes.

    ``ind`` is a :class:`PiecewiseIndicator` or an ``(n, 2)`` array of closed
    intervals ``[a, b]`` (``a == b`` allowed for points).  The domain is mapped
    to ``[0, 1]``; a closed box ``[i 2^-d, (i+1) 2^-d]`` counts if it meets the
    closure of the set.  Depths with zero count are dropped from the fit.
    """
    if isinstance(ind, PiecewiseIndicator):
        iv, (lo, hi) = ind.intervals, (ind.lo, ind.hi)
    else:
        iv = np.asarray(ind, float).reshape(-1, 2)
        lo, hi = domain if domain is not None else (0.0, 1.0)
    if hi <= lo:
        raise ValueError("domain must have positive length")
    depths = np.asarray(depths, int)
    if depths.size == 0 or depths.min() < 1:
        raise ValueError("depths must be >= 1")
    u = (iv - lo) / (hi - lo)
    counts = np.zeros(len(depths), np.int64)
    for j, d in enumerate(depths):
        n = 1 << int(d)
        first = np.clip(np.ceil(u[:, 0] * n) - 1, 0, n - 1).astype(np.int64)
        last = np.clip(np.floor(u[:, 1] * n), 0, n - 1).astype(np.int64)
        # merge the per-interval box ranges, counting shared boxes once
        order = np.argsort(first, kind="stable")
        total, reach = 0, -1
        for a, b in zip(first[order], last[order]):
            if b > reach:
                total += b - max(a, reach + 1) + 1
                reach = b
        counts[j] = total
    ok = counts > 0
    if ok.sum() < 2:
        return DimensionReport(depths, 2.0**-depths, counts, 0.0, float("nan"), not ok.any())
    x, y = depths[ok].astype(float), np.log2(counts[ok])
    slope, icpt = np.polyfit(x, y, 1)
    resid = y - (slope * x + icpt)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return DimensionReport(depths, 2.0**-depths, counts, float(slope), float(r2), False)


def barrier(n, eps: float):
    """``n^(1/2 - 1/(log2 n)^(1/4 + eps))`` for ``n >= 2``, and 0 for ``n < 2``."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    n = np.asarray(n, float)
    safe = np.where(n >= 2, n, 2.0)
    val = safe ** (0.5 - 1.0 / np.log2(safe) ** (0.25 + eps))
    out = np.where(n >= 2, val, 0.0)
    return out if out.ndim else float(out)


def power_barrier(n, alpha: float):
    """Pure power barrier ``n^alpha``."""
    return np.asarray(n, float) ** alpha


@dataclass(frozen=True)
class EscapeReport:
    times: np.ndarray
    survives: np.ndarray  # barrier never violated on [1, s_M]
    reach: np.ndarray  # largest n with no violation on [1, n]


def escape_rate_scan(
    r: DynamicalWalkRealization,
    sched: Schedule,
    eps: float,
    t_grid,
    alpha: float | None = None,
) -> EscapeReport:
    """Barrier test of the time-``t`` walk at every grid time.

    With ``alpha`` set the barrier is ``n^alpha`` instead of :func:`barrier`.
    The step vector is carried from one grid time to the next by applying the
    refresh events in between, visiting grid times in sorted order.
    """
    t_grid = np.asarray(t_grid, float)
    N = sched.s[-1]
    if r.N < N:
        raise ValueError(f"realization has {r.N} steps, schedule needs {N}")
    if t_grid.size and (t_grid.min() < 0 or t_grid.max() > r.t_max):
        raise ValueError("grid must lie in [0, t_max]")
    n = np.arange(1, N + 1)
    bar = power_barrier(n, alpha) if alpha is not None else barrier(n, eps)
    order = np.argsort(t_grid, kind="stable")
    survives = np.zeros(t_grid.size, bool)
    reach = np.zeros(t_grid.size, np.int64)
    if not t_grid.size:
        return EscapeReport(t_grid, survives, reach)
    t0 = t_grid[order[0]]
    codes = r.steps_at(t0, 1, N).copy()
    ev = refresh_events(r, (t0, t_grid[order[-1]]), (1, N))
    cut = np.searchsorted(ev.times, t_grid[order], side="right")
    done = 0
    for j, c in zip(order, cut):
        if c > done:
            # keep only the last ring of each index in (prev, t]
            idx, dirs = ev.indices[done:c][::-1], ev.directions[done:c][::-1]
            u, at = np.unique(idx, return_index=True)
            codes[u - 1] = dirs[at]
            done = c
        p = positions(codes)
        bad = np.hypot(p[:, 0], p[:, 1]) < bar
        hit = np.flatnonzero(bad)
        survives[j] = hit.size == 0
        reach[j] = N if hit.size == 0 else hit[0]
    return EscapeReport(t_grid, survives, reach)
