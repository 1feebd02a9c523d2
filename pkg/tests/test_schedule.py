import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynwalk import rng
from dynwalk.core import Direction, batch_steps, refresh_events, sample_realization
from dynwalk.prefix import PrefixState
from dynwalk.schedule import (
    K_of,
    PiecewiseIndicator,
    Schedule,
    desk_schedule,
    event_E_M,
    event_G_k,
    event_R_eps_k,
    event_R_k,
    levels_dense,
    paper_schedule,
    scan_E_M,
)

from oracles import naive_E, walk

E, W, N_, S = Direction.E, Direction.W, Direction.N, Direction.S


def test_paper_schedule_values():
    p = paper_schedule(2)
    assert p.s == (1, 4, 262144)
    assert (p.inner[0], p.outer[0]) == (2, 2)
    assert (p.inner[1], p.outer[1]) == (16, 16384)
    assert paper_schedule(4).s[-1] == 4**10 * 2**32
    with pytest.raises(OverflowError):
        paper_schedule(5)


def test_desk_schedule_values():
    d = desk_schedule(3, 4, 2)
    assert d.s == (1, 4, 16, 64)
    assert d.inner == (1, 2, 4) and d.outer == (4, 8, 16)
    one = desk_schedule(4, 3, 1)
    assert one.inner == one.outer == tuple(math.ceil(math.sqrt(v)) for v in one.s[1:])
    with pytest.raises(ValueError):
        desk_schedule(3, 1, 2)


@given(st.floats(2, 10), st.integers(0, 12))
def test_desk_schedule_increasing(rho, M):
    s = desk_schedule(M, rho, 2).s
    assert all(b > a for a, b in zip(s, s[1:]))


def test_schedule_validation():
    with pytest.raises(ValueError):
        Schedule((2, 4), (1,), (2,))
    with pytest.raises(ValueError):
        Schedule((1, 4, 4), (1, 1), (2, 2))
    with pytest.raises(ValueError):
        Schedule((1, 4), (3,), (2,))


def test_K_of():
    assert K_of(1) == 0 and K_of(7.5) == 0
    assert K_of(0.25) == 2 and K_of(0.3) == 2 and K_of(0.5) == 1
    with pytest.raises(ValueError):
        K_of(0)


@given(st.floats(1e-12, 0.999))
def test_K_of_range(t):
    a = abs(math.log2(t))
    assert a <= K_of(t) < 1 + a


def test_events_small():
    p = paper_schedule(1)
    # S_1 = (1,0) is not the origin; S_4 = (2,0) is on the level-1 ring
    st_ = PrefixState([E, E, N_, S])
    assert event_G_k(st_, p, 1) and not event_R_k(st_, p, 1) and event_E_M(st_, p)
    st_ = PrefixState([E, N_, E, W])
    assert not event_G_k(st_, p, 1)  # |(1,1)| < 2
    assert event_E_M(PrefixState([]), Schedule((1,), (), ()))
    assert not event_E_M(PrefixState([E] * 4), p)  # |(4,0)| > 2
    assert not event_R_k(PrefixState([E] * 64), desk_schedule(3), 3)


def test_left_endpoint_counts():
    d = desk_schedule(2, 4, 2)
    st_ = PrefixState([E, N_, W, S] + [E] * 12)  # S_4 = origin = S_{s_1}
    assert event_R_k(st_, d, 1) and event_R_k(st_, d, 2)


def test_outer_radius_closed():
    sched = Schedule((1, 2), (1.0,), (2.0,))
    assert event_G_k(PrefixState([E, E]), sched, 1)


def test_short_state_rejected():
    with pytest.raises(ValueError):
        event_E_M(PrefixState([E] * 10), desk_schedule(2))


def _paths(n, g, count):
    return g.integers(0, 4, (count, n))


def test_events_match_naive():
    g = np.random.default_rng(0)
    d = desk_schedule(3, 4, 2)
    codes = _paths(64, g, 400)
    dense = levels_dense(codes, d)
    for row, lv in zip(codes, dense):
        st_ = PrefixState(row, cuts=d.s[:-1])
        for M in range(4):
            ref = naive_E(row, d.s, d.inner, d.outer, M)
            assert lv[M] == ref == event_E_M(st_, d, M)
        p = walk(row)
        for k in (1, 2, 3):
            a, b = d.window(k)
            assert event_R_k(st_, d, k) == any(p[n - 1] == (0, 0) for n in range(a, b + 1))


def test_nesting():
    d = desk_schedule(4, 4, 2)
    lv = levels_dense(np.random.default_rng(1).integers(0, 4, (5000, 256)), d)
    assert np.all(lv[:, 1:] <= lv[:, :-1])


def _naive_indicator_at(r, sched, t):
    return naive_E(r.steps_at(t, 1, sched.s[-1]), sched.s, sched.inner, sched.outer, sched.M)


@pytest.mark.parametrize("sched", [desk_schedule(3, 4, 2), desk_schedule(4, 4, 2),
                                   desk_schedule(2, 3, 1.5), paper_schedule(1)])
def test_scan_midpoints_match_naive(sched):
    for seed in range(6):
        r = sample_realization(sched.s[-1], 1.0, seed)
        ind = scan_E_M(r, sched, block_size=int(seed % 3) + 3)
        ev = refresh_events(r, (0.0, 1.0), (1, sched.s[-1]))
        cuts = np.unique(np.concatenate([[0.0], ev.times, [1.0]]))
        for a, b in zip(cuts, cuts[1:]):
            m = 0.5 * (a + b)
            assert (m in ind) == _naive_indicator_at(r, sched, m)


def test_scan_no_events_is_constant():
    sched = desk_schedule(2, 4, 2)
    r = sample_realization(16, 0.0, 3)
    ind = scan_E_M(r, sched, (0.0, 0.0))
    assert ind.is_empty()
    r = sample_realization(16, 1.0, 3)
    ev = refresh_events(r, (0.0, 1.0))
    t0 = ev.times[0]
    ind = scan_E_M(r, sched, (0.0, t0 * 0.5))
    v = event_E_M(PrefixState(r.steps_at(0.0)), sched)
    assert ind.measure() == (t0 * 0.5 if v else 0.0)


def test_scan_M0_is_whole_window():
    ind = scan_E_M(sample_realization(1, 1.0, 0), Schedule((1,), (), ()), (0.2, 0.9))
    assert ind.measure() == pytest.approx(0.7)


def test_boundary_in_refresh_times():
    sched = desk_schedule(3, 4, 2)
    for seed in range(30):
        r = sample_realization(64, 1.0, seed)
        ind = scan_E_M(r, sched)
        lam = set(refresh_events(r, (0.0, 1.0), (1, 64)).times.tolist())
        assert set(ind.interior_endpoints().tolist()) <= lam


def test_scan_measures_nested_in_M():
    d = desk_schedule(4, 4, 2)
    for seed in range(10):
        r = sample_realization(256, 1.0, seed)
        m = [scan_E_M(r, d.truncate(M)).measure() for M in range(5)]
        assert all(b <= a + 1e-15 for a, b in zip(m, m[1:]))


def test_subwindow_is_restriction():
    sched = desk_schedule(3, 4, 2)
    for seed in range(10):
        r = sample_realization(64, 1.0, seed)
        full = scan_E_M(r, sched).restrict(0.3, 0.7)
        sub = scan_E_M(r, sched, (0.3, 0.7))
        assert np.array_equal(full.intervals, sub.intervals)


def test_indicator_helpers():
    ind = PiecewiseIndicator(0.0, 1.0, np.array([[0.0, 0.25], [0.5, 0.75]]))
    assert ind.measure() == 0.5
    assert 0.0 in ind and 0.25 not in ind and 0.6 in ind and 0.75 not in ind
    assert ind.interior_endpoints().tolist() == [0.25, 0.5, 0.75]
    assert ind.restrict(0.2, 0.6).intervals.tolist() == [[0.2, 0.25], [0.5, 0.6]]


def test_stationarity_of_pair_law():
    sched = desk_schedule(2, 4, 2)
    n = 20_000
    seeds = rng.split_seed(31, np.arange(n, dtype=np.uint64))
    pair = []
    for a, b in [(0.2, 0.5), (0.0, 0.3)]:
        la = levels_dense(batch_steps(seeds, 16, a), sched)[:, -1]
        lb = levels_dense(batch_steps(seeds, 16, b), sched)[:, -1]
        pair.append(np.mean(la & lb))
    p = np.mean(pair)
    se = math.sqrt(2 * p * (1 - p) / n)
    assert abs(pair[0] - pair[1]) < 3 * se


def _barrier_indep(n, eps):
    # written out separately from the package version
    if n < 2:
        return 0.0
    L = math.log(n) / math.log(2)
    return math.exp(math.log(n) * (0.5 - L ** -(0.25 + eps)))


def test_R_eps_matches_independent_scan():
    sched = desk_schedule(3, 4, 2)
    g = np.random.default_rng(4)
    for row in g.integers(0, 4, (300, 64)):
        p = walk(row)
        for k in (1, 2, 3):
            a, b = sched.window(k)
            for eps in (0.1, 0.5):
                ref = any(math.hypot(*p[n - 1]) < _barrier_indep(n, eps) for n in range(a, b + 1))
                assert event_R_eps_k(row, sched, k, eps) == ref


def test_R_eps_examples():
    sched = desk_schedule(3, 4, 2)
    assert event_R_eps_k([E, W] * 32, sched, 2, 0.25)
    assert not event_R_eps_k([E] * 64, sched, 3, 0.25)
    with pytest.raises(ValueError):
        event_R_eps_k([E] * 64, sched, 3, 0.0)
