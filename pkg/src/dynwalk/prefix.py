"""Prefix sums of a step vector under single-step replacement.

The index range ``1..N`` is cut into blocks of at most ``B`` steps.  Each block
stores the positions of its steps relative to the block start, an open
addressing hash set (with multiplicities) of those local positions, and an
additive offset: the walk position just before the block.  Replacing step
``i`` rebuilds the local data of its block in ``O(B)`` and shifts the offsets
of all later blocks in ``O(N/B)``.  Block ``b`` contains a visit to the origin
iff its hash set holds ``-offset[b]``; a running count of such blocks answers
"does the walk visit the origin anywhere" in ``O(1)``.

Blocks never straddle a *cut*.  Cuts split ``1..N`` into segments, and the
number of zero-containing blocks is also kept per segment; aligning the
segments with the level windows of a schedule makes each return event an
``O(1)`` query during event-driven scans.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit

from .core import STEP_X, STEP_Y

_EMPTY = -1
_KOFF = 1 << 30
_HASH = np.uint64(0x9E3779B97F4A7C15)


@njit(cache=True, inline="always")
def _key(x, y):
    return ((x + _KOFF) << 32) | (y + _KOFF)


@njit(cache=True, inline="always")
def _slot(key, shift, mask):
    return np.int64((np.uint64(key) * _HASH) >> np.uint64(shift)) & mask


@njit(cache=True)
def _contains(keys, b, key, shift, mask):
    i = _slot(key, shift, mask)
    while True:
        k = keys[b, i]
        if k == key:
            return True
        if k == _EMPTY:
            return False
        i = (i + 1) & mask


@njit(cache=True)
def _rebuild_block(keys, cnts, lx, ly, bstart, b, shift, mask, ctr):
    keys[b, :] = _EMPTY
    cnts[b, :] = 0
    for n in range(bstart[b], bstart[b + 1]):
        key = _key(lx[n], ly[n])
        i = _slot(key, shift, mask)
        while keys[b, i] != _EMPTY and keys[b, i] != key:
            i = (i + 1) & mask
        keys[b, i] = key
        cnts[b, i] += 1
    ctr[1] += keys.shape[1] + bstart[b + 1] - bstart[b]


@njit(cache=True)
def _set_flag(keys, ox, oy, zflag, group, gzero, b, shift, mask, ctr):
    f = _contains(keys, b, _key(-ox[b], -oy[b]), shift, mask)
    ctr[1] += 1
    if f != zflag[b]:
        d = 1 if f else -1
        zflag[b] = f
        ctr[0] += d
        gzero[group[b]] += d


@njit(cache=True)
def _build(codes, bstart, group, lx, ly, ox, oy, keys, cnts, zflag, gzero, shift, mask, ctr, sx, sy):
    nb = len(bstart) - 1
    px = 0
    py = 0
    for b in range(nb):
        ox[b] = px
        oy[b] = py
        x = 0
        y = 0
        for n in range(bstart[b], bstart[b + 1]):
            x += sx[codes[n]]
            y += sy[codes[n]]
            lx[n] = x
            ly[n] = y
        px += x
        py += y
        _rebuild_block(keys, cnts, lx, ly, bstart, b, shift, mask, ctr)
        zflag[b] = False
        _set_flag(keys, ox, oy, zflag, group, gzero, b, shift, mask, ctr)


@njit(cache=True)
def _update(codes, block_of, bstart, group, lx, ly, ox, oy, keys, cnts, zflag, gzero,
            shift, mask, ctr, sx, sy, i, new):
    old = codes[i]
    if old == new:
        return
    dx = sx[new] - sx[old]
    dy = sy[new] - sy[old]
    codes[i] = new
    b = block_of[i]
    for n in range(i, bstart[b + 1]):
        lx[n] += dx
        ly[n] += dy
    ctr[1] += bstart[b + 1] - i
    _rebuild_block(keys, cnts, lx, ly, bstart, b, shift, mask, ctr)
    _set_flag(keys, ox, oy, zflag, group, gzero, b, shift, mask, ctr)
    for c in range(b + 1, len(bstart) - 1):
        ox[c] += dx
        oy[c] += dy
        _set_flag(keys, ox, oy, zflag, group, gzero, c, shift, mask, ctr)


@njit(cache=True)
def _has_zero_in(block_of, bstart, lx, ly, ox, oy, zflag, a, b):
    # a, b are 0-based inclusive
    ba = block_of[a]
    bb = block_of[b]
    end = bstart[ba + 1] - 1 if ba != bb else b
    for n in range(a, end + 1):
        if ox[ba] + lx[n] == 0 and oy[ba] + ly[n] == 0:
            return True
    if ba == bb:
        return False
    for c in range(ba + 1, bb):
        if zflag[c]:
            return True
    for n in range(bstart[bb], b + 1):
        if ox[bb] + lx[n] == 0 and oy[bb] + ly[n] == 0:
            return True
    return False


@njit(cache=True)
def _pos(block_of, lx, ly, ox, oy, n):
    # n is 1-based; 0 is the origin
    if n == 0:
        return 0, 0
    b = block_of[n - 1]
    return ox[b] + lx[n - 1], oy[b] + ly[n - 1]


@njit(cache=True)
def _eval_levels(block_of, lx, ly, ox, oy, gzero, s, r2, R2, M):
    """E_M on a state whose segments are the level windows of ``s``."""
    for k in range(1, M + 1):
        x, y = _pos(block_of, lx, ly, ox, oy, s[k - 1])
        if x == 0 and y == 0:
            return False
        if gzero[k] > 0:
            return False
        x, y = _pos(block_of, lx, ly, ox, oy, s[k])
        d2 = float(x * x + y * y)
        if d2 < r2[k - 1] or d2 > R2[k - 1]:
            return False
    return True


@njit(cache=True)
def _scan(codes, block_of, bstart, group, lx, ly, ox, oy, keys, cnts, zflag, gzero,
          shift, mask, ctr, sx, sy, ev_idx, ev_code, last_in_tie, s, r2, R2, M):
    out = np.full(len(ev_idx), -1, np.int8)
    for e in range(len(ev_idx)):
        _update(codes, block_of, bstart, group, lx, ly, ox, oy, keys, cnts, zflag, gzero,
                shift, mask, ctr, sx, sy, ev_idx[e] - 1, ev_code[e])
        if last_in_tie[e]:
            out[e] = 1 if _eval_levels(block_of, lx, ly, ox, oy, gzero, s, r2, R2, M) else 0
    return out


def _blocks(N: int, B: int, cuts) -> tuple[np.ndarray, np.ndarray]:
    ends = sorted({c for c in cuts if 0 < c < N} | {N}) if N else []
    starts, groups = [0], []
    lo = 0
    for g, end in enumerate(ends):
        for a in range(lo, end, B):
            starts.append(min(a + B, end))
            groups.append(g)
        lo = end
    return np.array(starts, np.int64), np.array(groups, np.int64)


class PrefixState:
    """Prefix sums ``S_1..S_N`` with point update and zero-in-range queries.

    Indices are 1-based as in the walk: ``position(n)`` is ``S_n`` and
    ``position(0)`` is the origin.
    """

    def __init__(self, steps, block_size: int | None = None, cuts=()):
        codes = np.ascontiguousarray(steps, dtype=np.int8).copy()
        N = len(codes)
        if codes.size and (codes.min() < 0 or codes.max() > 3):
            raise ValueError("direction codes must be in 0..3")
        B = block_size or max(1, math.isqrt(N - 1) + 1 if N else 1)
        self.N = N
        self.block_size = B
        self.codes = codes
        self.bstart, self.group = _blocks(N, B, cuts)
        nb = len(self.bstart) - 1
        self.block_of = np.repeat(np.arange(nb), np.diff(self.bstart))
        widest = int(np.diff(self.bstart).max()) if nb else 1
        bits = max(1, (2 * widest - 1).bit_length())
        self._shift = 64 - bits
        self._mask = (1 << bits) - 1
        self.lx = np.zeros(N, np.int64)
        self.ly = np.zeros(N, np.int64)
        self.ox = np.zeros(nb, np.int64)
        self.oy = np.zeros(nb, np.int64)
        self.keys = np.full((nb, 1 << bits), _EMPTY, np.int64)
        self.cnts = np.zeros((nb, 1 << bits), np.int32)
        self.zflag = np.zeros(nb, np.bool_)
        self.gzero = np.zeros(int(self.group.max()) + 1 if nb else 1, np.int64)
        # ctr[0]: zero-containing blocks; ctr[1]: elementary operations
        self.ctr = np.zeros(2, np.int64)
        if nb:
            _build(self.codes, self.bstart, self.group, self.lx, self.ly, self.ox, self.oy,
                   self.keys, self.cnts, self.zflag, self.gzero, self._shift, self._mask,
                   self.ctr, STEP_X, STEP_Y)

    @classmethod
    def build(cls, steps, block_size: int | None = None, cuts=()) -> PrefixState:
        return cls(steps, block_size, cuts)

    @property
    def zero_blocks(self) -> int:
        return int(self.ctr[0])

    @property
    def op_count(self) -> int:
        return int(self.ctr[1])

    @property
    def n_blocks(self) -> int:
        return len(self.bstart) - 1

    def _args(self):
        return (self.codes, self.block_of, self.bstart, self.group, self.lx, self.ly,
                self.ox, self.oy, self.keys, self.cnts, self.zflag, self.gzero,
                self._shift, self._mask, self.ctr, STEP_X, STEP_Y)

    def point_update(self, i: int, new: int) -> None:
        """Replace step ``i`` (1-based) by direction code ``new``."""
        if not 1 <= i <= self.N:
            raise IndexError(f"step index {i} outside [1, {self.N}]")
        if not 0 <= new <= 3:
            raise ValueError(f"bad direction code {new}")
        _update(*self._args(), i - 1, int(new))

    def position(self, n: int) -> tuple[int, int]:
        if not 0 <= n <= self.N:
            raise IndexError(f"index {n} outside [0, {self.N}]")
        x, y = _pos(self.block_of, self.lx, self.ly, self.ox, self.oy, n)
        return int(x), int(y)

    def has_zero_in(self, a: int, b: int) -> bool:
        """Whether ``S_n`` is the origin for some ``n`` in ``[a, b]``."""
        if not 1 <= a <= b <= self.N:
            raise ValueError(f"bad range [{a}, {b}] for N={self.N}")
        return bool(_has_zero_in(self.block_of, self.bstart, self.lx, self.ly,
                                 self.ox, self.oy, self.zflag, a - 1, b - 1))

    def has_zero_anywhere(self) -> bool:
        return bool(self.ctr[0] > 0)

    def positions(self) -> np.ndarray:
        """All of ``S_1..S_N`` as an ``(N, 2)`` array."""
        b = self.block_of
        return np.stack([self.ox[b] + self.lx, self.oy[b] + self.ly], axis=1)

    def recount(self) -> tuple[int, np.ndarray]:
        """Zero-block count and per-segment counts recomputed from scratch."""
        p = self.positions()
        zero = (p[:, 0] == 0) & (p[:, 1] == 0)
        flags = np.zeros(self.n_blocks, bool)
        np.logical_or.at(flags, self.block_of, zero)
        per = np.bincount(self.group[flags], minlength=len(self.gzero))
        return int(flags.sum()), per
