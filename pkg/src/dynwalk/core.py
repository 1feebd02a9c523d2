"""Dynamical simple random walk on Z^2: raw randomness and queries.

Each step index ``n`` carries a rate-one Poisson clock.  At time 0 the step is
a uniform unit vector ``Y_n^0``; at every ring ``tau_n^(m)`` it is replaced by
an independent uniform ``Y_n^m``.  The step in force at time ``t`` is the
value attached to the last ring at or before ``t`` (half-open intervals
``[tau^(m), tau^(m+1))``).

Realizations are lazy: the timeline of index ``n`` is a pure function of
``(seed, n)`` (see :mod:`dynwalk.rng`), so nothing is stored until queried.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from . import rng as _rng


class Direction(IntEnum):
    """The four unit steps, coded 0..3."""

    N = 0
    S = 1
    E = 2
    W = 3

    @property
    def vector(self) -> tuple[int, int]:
        return tuple(int(v) for v in STEP_VECTORS[self])


STEP_VECTORS = np.array([[0, 1], [0, -1], [1, 0], [-1, 0]], dtype=np.int64)
STEP_X = STEP_VECTORS[:, 0].copy()
STEP_Y = STEP_VECTORS[:, 1].copy()


def positions(codes) -> np.ndarray:
    """Prefix sums ``S_1..S_N`` of a code array along its last axis.

    Returns an array of shape ``codes.shape + (2,)``.
    """
    codes = np.asarray(codes)
    out = np.empty(codes.shape + (2,), dtype=np.int64)
    np.cumsum(STEP_X[codes], axis=-1, out=out[..., 0])
    np.cumsum(STEP_Y[codes], axis=-1, out=out[..., 1])
    return out


@dataclass(frozen=True)
class RefreshTimeline:
    """Refresh times of one index, ``times[0] == 0``, with the value set at each."""

    times: np.ndarray
    directions: np.ndarray

    def value_at(self, t: float) -> Direction:
        m = int(np.searchsorted(self.times, t, side="right")) - 1
        return Direction(int(self.directions[m]))


class Timelines(NamedTuple):
    """Timelines of a contiguous index range in CSR layout.

    ``first[i]`` is the time-0 direction of the ``i``-th index of the range;
    its refresh events in ``(0, t_max]`` are ``times[offsets[i]:offsets[i+1]]``
    with new values ``directions[...]``.
    """

    first: np.ndarray
    offsets: np.ndarray
    times: np.ndarray
    directions: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return np.diff(self.offsets)

    def owners(self) -> np.ndarray:
        return np.repeat(np.arange(len(self.first)), self.counts)

    def values_at(self, t: float) -> np.ndarray:
        n = len(self.first)
        done = np.bincount(self.owners()[self.times <= t], minlength=n)
        out = self.first.copy()
        hit = done > 0
        out[hit] = self.directions[self.offsets[:-1][hit] + done[hit] - 1]
        return out


class RefreshEvents(NamedTuple):
    """Time-sorted refresh events: ring time, step index, new direction code."""

    times: np.ndarray
    indices: np.ndarray
    directions: np.ndarray

    def __len__(self):
        return len(self.times)


def _hashed_timelines(seed: int, idx: np.ndarray, t_max: float) -> Timelines:
    key = _rng.index_key(seed, idx)
    first = _rng.to_direction(_rng.draw(key, 0))
    cum = np.zeros(len(idx))
    live = np.arange(len(idx))
    own, tim, dirs = [], [], []
    m = 1
    while live.size:
        k = key[live]
        c = cum[live] + _rng.to_gap(_rng.draw(k, 2 * m - 1))
        ok = c <= t_max
        live = live[ok]
        cum[live] = c[ok]
        own.append(live)
        tim.append(c[ok])
        dirs.append(_rng.to_direction(_rng.draw(k[ok], 2 * m)))
        m += 1
    own = np.concatenate(own) if own else np.zeros(0, np.int64)
    order = np.argsort(own, kind="stable")
    counts = np.bincount(own, minlength=len(idx))
    offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return Timelines(
        first,
        offsets,
        np.concatenate(tim)[order] if tim else np.zeros(0),
        np.concatenate(dirs)[order] if dirs else np.zeros(0, np.int8),
    )


@dataclass(frozen=True)
class DynamicalWalkRealization:
    """All step timelines of indices ``1..N`` over ``[0, t_max]``.

    Either hash-backed (``seed`` set, timelines computed on demand) or
    explicit (``stored`` set, e.g. after :func:`load_realization`).
    """

    N: int
    t_max: float
    seed: int | None
    stored: Timelines | None = field(default=None, repr=False, compare=False)

    def _check_range(self, lo: int, hi: int) -> None:
        if not (1 <= lo and hi <= self.N and lo <= hi + 1):
            raise ValueError(f"index range [{lo}, {hi}] not inside [1, {self.N}]")

    def timelines(self, lo: int = 1, hi: int | None = None) -> Timelines:
        hi = self.N if hi is None else hi
        self._check_range(lo, hi)
        if self.stored is None:
            return _hashed_timelines(self.seed, np.arange(lo, hi + 1), self.t_max)
        s = self.stored
        a, b = s.offsets[lo - 1], s.offsets[hi]
        return Timelines(
            s.first[lo - 1 : hi],
            s.offsets[lo - 1 : hi + 1] - a,
            s.times[a:b],
            s.directions[a:b],
        )

    def timeline(self, n: int) -> RefreshTimeline:
        tl = self.timelines(n, n)
        return RefreshTimeline(
            np.concatenate([[0.0], tl.times]),
            np.concatenate([tl.first, tl.directions]).astype(np.int8),
        )

    def steps_at(self, t: float, lo: int = 1, hi: int | None = None) -> np.ndarray:
        """Direction codes of indices ``lo..hi`` at time ``t``."""
        self._check_time(t)
        return self.timelines(lo, hi).values_at(t)

    def _check_time(self, t: float) -> None:
        if not 0 <= t <= self.t_max:
            raise ValueError(f"time {t} outside [0, {self.t_max}]")


def sample_realization(N: int, t_max: float, seed: int) -> DynamicalWalkRealization:
    """Realization of steps ``1..N`` over ``[0, t_max]``, a pure function of its arguments."""
    if N < 0 or t_max < 0:
        raise ValueError("need N >= 0 and t_max >= 0")
    return DynamicalWalkRealization(int(N), float(t_max), int(seed) & ((1 << 64) - 1))


def step_at(r: DynamicalWalkRealization, n: int, t: float) -> Direction:
    if not 1 <= n <= r.N:
        raise ValueError(f"index {n} outside [1, {r.N}]")
    r._check_time(t)
    return Direction(int(r.timelines(n, n).values_at(t)[0]))


def refresh_events(
    r: DynamicalWalkRealization,
    time_window: tuple[float, float],
    index_range: tuple[int, int] | None = None,
) -> RefreshEvents:
    """Refresh events with ``a < tau <= b`` for the indices in range.

    The window is open on the left: the configuration at ``a`` already
    includes any ring at exactly ``a``.  Sorted by time, ties by index.
    """
    a, b = time_window
    lo, hi = index_range if index_range is not None else (1, r.N)
    if not 0 <= a <= b <= r.t_max:
        raise ValueError(f"window ({a}, {b}] not inside [0, {r.t_max}]")
    tl = r.timelines(lo, hi)
    owners = tl.owners()
    keep = (tl.times > a) & (tl.times <= b)
    t, i, d = tl.times[keep], owners[keep] + lo, tl.directions[keep]
    order = np.lexsort((i, t))
    return RefreshEvents(t[order], i[order].astype(np.int64), d[order])


def refreshed_indices(
    r: DynamicalWalkRealization, index_range: tuple[int, int], t: float
) -> np.ndarray:
    """Sorted indices in range whose clock rang at least once in ``(0, t]``."""
    lo, hi = index_range
    r._check_time(t)
    tl = r.timelines(lo, hi)
    has = tl.counts > 0
    first_ring = np.full(len(tl.first), np.inf)
    first_ring[has] = tl.times[tl.offsets[:-1][has]]
    return np.nonzero(first_ring <= t)[0] + lo


def batch_steps(seeds, n_steps: int, t: float) -> np.ndarray:
    """Time-``t`` codes of indices ``1..n_steps`` for many hash-backed realizations.

    Row ``i`` equals ``sample_realization(N, t_max, seeds[i]).steps_at(t)``
    for any ``N >= n_steps`` and ``t_max >= t``.
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1, 1)
    key = _rng.index_key(seeds, np.arange(1, n_steps + 1, dtype=np.uint64))
    key = key.reshape(-1)
    cur = _rng.to_direction(_rng.draw(key, 0))
    cum = np.zeros(key.size)
    live = np.arange(key.size)
    m = 1
    while live.size:
        c = cum[live] + _rng.to_gap(_rng.draw(key[live], 2 * m - 1))
        ok = c <= t
        live = live[ok]
        cum[live] = c[ok]
        cur[live] = _rng.to_direction(_rng.draw(key[live], 2 * m))
        m += 1
    return cur.reshape(len(seeds), n_steps)


def two_slice_steps(seeds, n_steps: int, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Codes at times 0 and ``t`` under the two-slice coupling.

    The time-0 slice is bit-identical to :func:`batch_steps` at 0.  Index ``n``
    keeps its value at ``t`` iff its first ring is after ``t`` (probability
    ``exp(-t)``, using the realization's own first gap); otherwise it takes an
    independent uniform value.  Equal in law to the realization at ``t``.
    """
    seeds = np.asarray(seeds, dtype=np.uint64).reshape(-1, 1)
    key = _rng.index_key(seeds, np.arange(1, n_steps + 1, dtype=np.uint64))
    c0 = _rng.to_direction(_rng.draw(key, 0))
    rung = _rng.to_gap(_rng.draw(key, 1)) <= t
    ct = np.where(rung, _rng.to_direction(_rng.draw(key, _rng.FRESH_SLOT)), c0)
    return c0, ct


_MAGIC = b"DWRZ"
_VERSION = 1


def save_realization(r: DynamicalWalkRealization, path) -> None:
    """Write ``r`` in full to a versioned, length-prefixed binary container."""
    tl = r.timelines() if r.N else Timelines(
        np.zeros(0, np.int8), np.zeros(1, np.int64), np.zeros(0), np.zeros(0, np.int8)
    )
    arrays = {
        "first": tl.first.astype("<i1"),
        "offsets": tl.offsets.astype("<i8"),
        "times": tl.times.astype("<f8"),
        "directions": tl.directions.astype("<i1"),
    }
    header = {
        "N": r.N,
        "t_max": r.t_max,
        "seed": r.seed,
        "prng": _rng.PRNG_ID,
        "arrays": [[k, v.dtype.str, int(v.size)] for k, v in arrays.items()],
    }
    hb = json.dumps(header, sort_keys=True).encode()
    with open(path, "wb") as f:
        f.write(_MAGIC + struct.pack("<HI", _VERSION, len(hb)) + hb)
        for v in arrays.values():
            f.write(struct.pack("<Q", v.nbytes))
            f.write(v.tobytes())


def load_realization(path) -> DynamicalWalkRealization:
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError("not a realization container")
        version, hlen = struct.unpack("<HI", f.read(6))
        if version != _VERSION:
            raise ValueError(f"unsupported container version {version}")
        header = json.loads(f.read(hlen))
        arrays = {}
        for name, dtype, size in header["arrays"]:
            (nbytes,) = struct.unpack("<Q", f.read(8))
            arrays[name] = np.frombuffer(f.read(nbytes), dtype=dtype).copy()
            if arrays[name].size != size:
                raise ValueError(f"truncated array {name}")
    stored = Timelines(
        arrays["first"].astype(np.int8),
        arrays["offsets"].astype(np.int64),
        arrays["times"].astype(np.float64),
        arrays["directions"].astype(np.int8),
    )
    return DynamicalWalkRealization(header["N"], header["t_max"], header["seed"], stored)
