"""Stopping-time schedules, level events, and exact event-driven scans.

A schedule fixes step indices ``s_0 = 1 < s_1 < ... < s_M`` and closed annuli
``r_k <= |x| <= R_k``.  At a fixed time:

* ``R_k``: the walk visits the origin at some ``n`` in ``[s_{k-1}, s_k]``
  (both ends included);
* ``G_k``: ``S_{s_k}`` lies in annulus ``k``;
* ``E_M``: every ``G_k`` holds and no ``R_k`` does, for ``k = 1..M``.

:func:`scan_E_M` tracks ``E_M(t)`` exactly over a time window by replaying the
refresh events of a realization through a :class:`~dynwalk.prefix.PrefixState`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DynamicalWalkRealization, positions, refresh_events
from .prefix import PrefixState, _scan

_INT64_MAX = (1 << 63) - 1


@dataclass(frozen=True)
class Schedule:
    """Level boundaries ``s`` (length ``M + 1``) and annulus radii (length ``M``).

    ``inner[k - 1]`` and ``outer[k - 1]`` are the radii of level ``k``.
    """

    s: tuple[int, ...]
    inner: tuple[float, ...]
    outer: tuple[float, ...]

    def __post_init__(self):
        if not self.s or self.s[0] != 1:
            raise ValueError("schedule must start at s_0 = 1")
        if any(b <= a for a, b in zip(self.s, self.s[1:])):
            raise ValueError("schedule must be strictly increasing")
        if len(self.inner) != self.M or len(self.outer) != self.M:
            raise ValueError("need one annulus per level")
        if any(not 0 < r <= R for r, R in zip(self.inner, self.outer)):
            raise ValueError("need 0 < r_k <= R_k")
        if self.s[-1] > _INT64_MAX:
            raise OverflowError("s_M does not fit a 64-bit step index")

    @property
    def M(self) -> int:
        return len(self.s) - 1

    def truncate(self, M: int) -> Schedule:
        if not 0 <= M <= self.M:
            raise ValueError(f"level {M} outside [0, {self.M}]")
        return Schedule(self.s[: M + 1], self.inner[:M], self.outer[:M])

    def window(self, k: int) -> tuple[int, int]:
        return self.s[k - 1], self.s[k]

    def in_annulus(self, k: int, x, y) -> np.ndarray | bool:
        d2 = np.asarray(x, np.float64) ** 2 + np.asarray(y, np.float64) ** 2
        return (d2 >= self.inner[k - 1] ** 2) & (d2 <= self.outer[k - 1] ** 2)


def paper_schedule(M: int) -> Schedule:
    """``s_k = k^10 2^(2k^2)`` with annuli ``2^(k^2) <= |x| <= k^10 2^(k^2)``.

    Raises ``OverflowError`` once ``s_M`` leaves the 64-bit index range (M >= 5).
    """
    if M < 0:
        raise ValueError("M must be >= 0")
    s = [1] + [k**10 * 2 ** (2 * k * k) for k in range(1, M + 1)]
    if s[-1] > _INT64_MAX:
        raise OverflowError(f"s_{M} = {s[-1]} overflows a 64-bit step index")
    inner = tuple(2 ** (k * k) for k in range(1, M + 1))
    outer = tuple(k**10 * 2 ** (k * k) for k in range(1, M + 1))
    return Schedule(tuple(s), inner, outer)


def _ceil(v: float) -> int:
    # absorbs float noise such as sqrt(16) / 2 = 2.0000000000000004
    return math.ceil(round(v, 9))


def desk_schedule(M: int, growth: float = 4.0, width: float = 2.0) -> Schedule:
    """Geometric schedule ``s_k = ceil(growth^k)``, annuli ``sqrt(s_k)/width .. sqrt(s_k)*width``."""
    if M < 0 or growth < 2 or width < 1:
        raise ValueError("need M >= 0, growth >= 2, width >= 1")
    if float(growth).is_integer():
        s = [int(growth) ** k for k in range(M + 1)]
    else:
        s = [1] + [_ceil(growth**k) for k in range(1, M + 1)]
    root = [math.isqrt(v) if math.isqrt(v) ** 2 == v else math.sqrt(v) for v in s[1:]]
    inner = tuple(_ceil(q / width) for q in root)
    outer = tuple(_ceil(q * width) for q in root)
    return Schedule(tuple(s), inner, outer)


def K_of(t: float) -> int:
    """Smallest level index ``K`` with ``1 + |log2 t| > K >= |log2 t|``; 0 for ``t >= 1``."""
    if t <= 0:
        raise ValueError("t must be positive")
    if t >= 1:
        return 0
    return math.ceil(-math.log2(t))


def _need(state: PrefixState, n: int) -> None:
    if state.N < n:
        raise ValueError(f"state has {state.N} steps, need {n}")


def event_R_k(state: PrefixState, sched: Schedule, k: int) -> bool:
    if not 1 <= k <= sched.M:
        raise ValueError(f"level {k} outside [1, {sched.M}]")
    a, b = sched.window(k)
    _need(state, b)
    return state.has_zero_in(a, b)


def event_G_k(state: PrefixState, sched: Schedule, k: int) -> bool:
    if not 1 <= k <= sched.M:
        raise ValueError(f"level {k} outside [1, {sched.M}]")
    _need(state, sched.s[k])
    return bool(sched.in_annulus(k, *state.position(sched.s[k])))


def event_E_M(state: PrefixState, sched: Schedule, M: int | None = None) -> bool:
    M = sched.M if M is None else M
    if M:
        _need(state, sched.s[M])
    return all(event_G_k(state, sched, k) and not event_R_k(state, sched, k)
               for k in range(1, M + 1))


def levels_dense(codes, sched: Schedule, M: int | None = None) -> np.ndarray:
    """``E_0..E_M`` for a batch of explicit step vectors.

    ``codes`` has shape ``(S, n)`` with ``n >= s_M``; returns a boolean array of
    shape ``(S, M + 1)`` whose column ``k`` is ``E_k``.
    """
    M = sched.M if M is None else M
    codes = np.asarray(codes)
    S = codes.shape[0]
    out = np.ones((S, M + 1), bool)
    if M == 0:
        return out
    p = positions(codes[:, : sched.s[M]])
    zero = (p[..., 0] == 0) & (p[..., 1] == 0)
    # zero_upto[:, n] = any visit among S_1..S_n
    seen = np.concatenate([np.zeros((S, 1), np.int64), np.cumsum(zero, axis=1)], axis=1)
    for k in range(1, M + 1):
        a, b = sched.window(k)
        ret = seen[:, b] - seen[:, a - 1] > 0
        end = p[:, b - 1]
        good = sched.in_annulus(k, end[:, 0], end[:, 1])
        out[:, k] = out[:, k - 1] & good & ~ret
    return out


@dataclass(frozen=True)
class PiecewiseIndicator:
    """Truth set of a predicate on ``[lo, hi]``: sorted disjoint intervals ``[a, b)``."""

    lo: float
    hi: float
    intervals: np.ndarray  # shape (n, 2)

    def measure(self) -> float:
        iv = self.intervals
        return float(np.sum(iv[:, 1] - iv[:, 0])) if len(iv) else 0.0

    def __contains__(self, t: float) -> bool:
        iv = self.intervals
        j = np.searchsorted(iv[:, 0], t, side="right") - 1
        return bool(j >= 0 and t < iv[j, 1])

    def is_empty(self) -> bool:
        return len(self.intervals) == 0

    def interior_endpoints(self) -> np.ndarray:
        e = self.intervals.reshape(-1)
        return e[(e != self.lo) & (e != self.hi)]

    def restrict(self, lo: float, hi: float) -> PiecewiseIndicator:
        iv = np.clip(self.intervals, lo, hi)
        iv = iv[iv[:, 1] > iv[:, 0]] if len(iv) else iv
        return PiecewiseIndicator(lo, hi, iv.reshape(-1, 2))


def _intervals(lo, hi, v0, times, values) -> np.ndarray:
    # values[j] holds on [times[j], times[j + 1])
    t = np.concatenate([[lo], times, [hi]])
    v = np.concatenate([[v0], values]).astype(bool)
    flips = np.nonzero(np.diff(np.concatenate([[False], v, [False]]).astype(np.int8)))[0]
    starts, ends = t[flips[0::2]], t[flips[1::2]]
    iv = np.stack([starts, ends], axis=1)
    return iv[iv[:, 1] > iv[:, 0]]


def scan_E_M(
    r: DynamicalWalkRealization,
    sched: Schedule,
    window: tuple[float, float] | None = None,
    block_size: int | None = None,
) -> PiecewiseIndicator:
    """Exact set of times in ``window`` at which ``E_M`` holds for ``r``."""
    lo, hi = (0.0, r.t_max) if window is None else map(float, window)
    M = sched.M
    if M == 0:
        return PiecewiseIndicator(lo, hi, np.array([[lo, hi]]) if hi > lo else np.zeros((0, 2)))
    N = sched.s[M]
    if r.N < N:
        raise ValueError(f"realization has {r.N} steps, schedule needs {N}")
    state = PrefixState(r.steps_at(lo, 1, N), block_size, cuts=sched.s[:-1])
    s = np.array(sched.s, np.int64)
    r2 = np.array(sched.inner, np.float64) ** 2
    R2 = np.array(sched.outer, np.float64) ** 2
    v0 = event_E_M(state, sched)
    ev = refresh_events(r, (lo, hi), (1, N))
    last = np.ones(len(ev), bool)
    if len(ev) > 1:
        last[:-1] = ev.times[1:] != ev.times[:-1]
    vals = _scan(*state._args(), ev.indices, ev.directions, last, s, r2, R2, M)
    keep = last
    return PiecewiseIndicator(lo, hi, _intervals(lo, hi, v0, ev.times[keep], vals[keep]))


def event_R_eps_k(steps, sched: Schedule, k: int, eps: float) -> bool:
    """Whether ``|S_n| < barrier(n, eps)`` for some ``n`` in ``[s_{k-1}, s_k]``."""
    from .analysis import barrier

    if eps <= 0:
        raise ValueError("eps must be positive")
    a, b = sched.window(k)
    codes = np.asarray(steps)
    if len(codes) < b:
        raise ValueError(f"need {b} steps, got {len(codes)}")
    p = positions(codes[:b])[a - 1 :]
    n = np.arange(a, b + 1)
    return bool(np.any(np.hypot(p[:, 0], p[:, 1]) < barrier(n, eps)))
