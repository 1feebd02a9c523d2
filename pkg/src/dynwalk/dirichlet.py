"""Exact hitting probabilities for simple random walk on Z^2.

``h(x) = P_x(walk reaches the origin before |S| >= n)`` solves the discrete
Dirichlet problem on ``{y : |y| < n}``: ``h(0) = 1``, ``h = 0`` where
``|y| >= n``, and ``h`` equals the mean of its four neighbours elsewhere.

The disk and the lattice share the eight symmetries of the square, so ``h`` is
solved on the wedge ``0 <= x2 <= x1`` only.  The folded operator is weighted by
orbit sizes, which keeps it symmetric positive definite.

Also here: exit distributions of lattice squares, used for exact
walk-on-squares sampling of the same hitting event.
"""

from __future__ import annotations

import functools
import logging

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

log = logging.getLogger(__name__)

DIRECT_LIMIT = 100_000
RESIDUAL_TOL = 1e-10
MAX_SQUARE = 2048


def _wedge(n: int):
    i = np.arange(n, dtype=np.int64)
    jmax = np.minimum(i, np.floor(np.sqrt(np.maximum(n * n - 1 - i * i, 0))).astype(np.int64))
    while True:
        bad = i * i + jmax * jmax >= n * n
        if not bad.any():
            break
        jmax[bad] -= 1
    cnt = jmax + 1
    off = np.concatenate([[0], np.cumsum(cnt)])
    I = np.repeat(i, cnt)
    J = np.arange(off[-1]) - np.repeat(off[:-1], cnt)
    return I[1:], J[1:], off  # drop the origin


def _orbit(I, J):
    return np.where((J == 0) | (J == I), 4.0, 8.0)


class HittingField:
    """Solved ``h`` for one radius; index with any lattice point."""

    def __init__(self, n: int, values: np.ndarray, off: np.ndarray, residual: float):
        self.n = n
        self.values = values
        self._off = off
        self.residual = residual

    def __call__(self, x) -> float:
        a, b = sorted((abs(int(x[0])), abs(int(x[1]))), reverse=True)
        if a == 0:
            return 1.0
        if a * a + b * b >= self.n * self.n:
            return 0.0
        return float(self.values[self._off[a] + b - 1])

    def full(self) -> np.ndarray:
        """``h`` on the square ``[-n, n]^2``; entry ``[x1 + n, x2 + n]``."""
        n = self.n
        g = np.arange(-n, n + 1)
        X, Y = np.meshgrid(g, g, indexing="ij")
        a, b = np.maximum(abs(X), abs(Y)), np.minimum(abs(X), abs(Y))
        out = np.zeros(X.shape)
        inside = (X * X + Y * Y < n * n) & (a > 0)
        out[inside] = self.values[self._off[a[inside]] + b[inside] - 1]
        out[n, n] = 1.0
        return out


def _system(n: int):
    I, J, off = _wedge(n)
    nr = I.size
    orb = _orbit(I, J)
    rows, cols, vals = [np.arange(nr, dtype=np.int32)], [np.arange(nr, dtype=np.int32)], [4 * orb]
    rhs = np.zeros(nr)
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        a, b = np.abs(I + di), np.abs(J + dj)
        a, b = np.maximum(a, b), np.minimum(a, b)
        origin = a == 0
        np.add.at(rhs, np.flatnonzero(origin), orb[origin])
        inside = (a * a + b * b < n * n) & ~origin
        rows.append(np.flatnonzero(inside).astype(np.int32))
        cols.append((off[a[inside]] + b[inside] - 1).astype(np.int32))
        vals.append(-orb[inside])
        del a, b, origin, inside
    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nr, nr)
    )
    return A, rhs, orb, off


def _residual(A, h, rhs, orb) -> float:
    # mean-value defect of the unfolded equation at each wedge point
    return float(np.max(np.abs(rhs - A @ h) / (4 * orb))) if len(h) else 0.0


@functools.lru_cache(maxsize=4)
def solve_hitting(n: int) -> HittingField:
    """Solve for ``h`` on the disk of radius ``n`` with certified residual."""
    if n < 1:
        raise ValueError("radius must be >= 1")
    A, rhs, orb, off = _system(n)
    if A.shape[0] == 0:
        return HittingField(n, np.zeros(0), off, 0.0)
    if A.shape[0] < DIRECT_LIMIT:
        h = spla.spsolve(A.tocsc(), rhs)
        res = _residual(A, h, rhs, orb)
    else:
        import pyamg

        ml = pyamg.smoothed_aggregation_solver(
            A, symmetry="symmetric", improve_candidates=None, max_coarse=500
        )
        h, res = None, np.inf
        for _ in range(5):
            h = ml.solve(rhs, x0=h, tol=1e-12, accel="cg", maxiter=200)
            res = _residual(A, h, rhs, orb)
            log.debug("radius %d: residual %.3g", n, res)
            if res < RESIDUAL_TOL:
                break
    if not res < RESIDUAL_TOL:
        raise RuntimeError(f"radius {n}: residual {res:.3g} above {RESIDUAL_TOL}")
    return HittingField(n, h, off, res)


@functools.lru_cache(maxsize=None)
def square_exit_table(m: int) -> np.ndarray:
    """Exit distribution of the walk from the centre of ``[-m, m]^2`` along one side.

    Entry ``j`` is the probability of leaving through ``(m, j - m + 1)``
    given that the walk leaves through the side ``x1 = m`` (sums to 1).
    Corners are never hit.  Computed in the sine eigenbasis of the square.
    """
    if m < 1:
        raise ValueError("half-width must be >= 1")
    if m == 1:
        return np.ones(1)
    N = 2 * m - 1
    k = np.arange(1, N + 1)
    norm = np.sqrt(2.0 / (N + 1))
    lam = 2.0 - 2.0 * np.cos(np.pi * k / (N + 1))
    at_c = norm * np.sin(np.pi * k * m / (N + 1))
    at_edge = norm * np.sin(np.pi * k * N / (N + 1))
    w = np.empty(N)
    for s in range(0, N, 512):
        w[s : s + 512] = (at_edge * at_c) @ (1.0 / (lam[:, None] + lam[None, s : s + 512]))
    coef = at_c * w
    u = np.empty(N)
    for s in range(0, N, 512):
        j = k[s : s + 512]
        u[s : s + 512] = (norm * np.sin(np.pi * np.outer(j, k) / (N + 1))) @ coef
    p = np.clip(4.0 * u, 0.0, None)
    return p / p.sum()


def _cdf(m: int) -> np.ndarray:
    return np.cumsum(square_exit_table(m))


def walk_on_squares(n: int, start, samples: int, rng: np.random.Generator) -> np.ndarray:
    """Exact samples of ``1{reach origin before |S| >= n}`` from ``start``.

    Each move jumps to the exit point of the largest dyadic square centred at
    the walker that keeps the origin off its interior and its interior inside
    the disk.
    """
    px = np.full(samples, int(start[0]), np.int64)
    py = np.full(samples, int(start[1]), np.int64)
    hit = np.zeros(samples, bool)
    live = np.arange(samples)
    while live.size:
        x, y = px[live], py[live]
        linf = np.maximum(np.abs(x), np.abs(y))
        room = (n - np.hypot(x, y)) / np.sqrt(2.0)
        mmax = np.minimum(np.minimum(linf, np.floor(room - 1e-12).astype(np.int64) + 1), MAX_SQUARE)
        m = 1 << (np.floor(np.log2(np.maximum(mmax, 1))).astype(np.int64))
        m = np.where(m > mmax, m >> 1, m)  # guard float log2 at exact powers
        side = rng.integers(0, 4, live.size)
        u = rng.random(live.size)
        off = np.empty(live.size, np.int64)
        for mv in np.unique(m):
            sel = m == mv
            off[sel] = np.searchsorted(_cdf(int(mv)), u[sel], side="right") - (mv - 1)
        off = np.clip(off, -(m - 1), m - 1)
        dx = np.select([side == 0, side == 1], [m, -m], off)
        dy = np.select([side == 2, side == 3], [m, -m], off)
        x, y = x + dx, y + dy
        px[live], py[live] = x, y
        at0 = (x == 0) & (y == 0)
        out = x * x + y * y >= n * n
        hit[live[at0]] = True
        live = live[~(at0 | out)]
    return hit
