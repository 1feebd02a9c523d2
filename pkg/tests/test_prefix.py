import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynwalk.core import Direction, positions
from dynwalk.prefix import PrefixState, _has_zero_in, _pos, _update

from oracles import make_driver, random_ops, walk

E, W, N_, S = Direction.E, Direction.W, Direction.N, Direction.S
DELTAS = {(0, 0), (2, 0), (-2, 0), (0, 2), (0, -2), (1, 1), (1, -1), (-1, 1), (-1, -1)}


def naive_zero(codes, a, b):
    p = walk(codes)
    return any(p[n - 1] == (0, 0) for n in range(a, b + 1))


def test_small_examples():
    s = PrefixState([E, W])
    assert s.position(1) == (1, 0) and s.position(2) == (0, 0)
    assert s.has_zero_in(1, 2) and not s.has_zero_in(1, 1)
    s.point_update(2, N_)
    assert s.position(2) == (1, 1)
    assert PrefixState([N_, N_, E]).position(3) == (1, 2)
    assert PrefixState([E, W, N_, S]).has_zero_anywhere()
    assert not PrefixState([E, N_]).has_zero_anywhere()
    assert PrefixState([E]).position(0) == (0, 0)


def test_empty():
    s = PrefixState([])
    assert s.N == 0 and not s.has_zero_anywhere() and s.position(0) == (0, 0)


def test_all_east_never_returns():
    s = PrefixState([E] * 300)
    assert not s.has_zero_anywhere()
    assert not any(s.has_zero_in(a, b) for a, b in [(1, 300), (17, 17), (100, 250)])


def test_bad_arguments():
    s = PrefixState([E, W, E])
    with pytest.raises(ValueError):
        s.has_zero_in(3, 2)
    with pytest.raises(ValueError):
        s.has_zero_in(0, 2)
    with pytest.raises(IndexError):
        s.point_update(4, 0)
    with pytest.raises(ValueError):
        s.point_update(1, 7)


def test_update_to_same_value_is_noop():
    codes = np.random.default_rng(0).integers(0, 4, 500)
    s = PrefixState(codes)
    before = s.positions().copy(), s.zero_blocks, s.gzero.copy()
    s.point_update(123, int(codes[122]))
    assert np.array_equal(s.positions(), before[0])
    assert s.zero_blocks == before[1] and np.array_equal(s.gzero, before[2])


def test_random_builds_match_naive():
    g = np.random.default_rng(1)
    for _ in range(1000):
        codes = g.integers(0, 4, int(g.integers(1, 4097)))
        assert np.array_equal(PrefixState(codes).positions(), positions(codes))


@st.composite
def op_sequences(draw):
    N = draw(st.integers(1, 120))
    codes = draw(st.lists(st.integers(0, 3), min_size=N, max_size=N))
    B = draw(st.sampled_from([None, 1, 3, 7, 50]))
    cut_pool = list(range(2, N + 1))
    cuts = sorted(draw(st.sets(st.sampled_from(cut_pool), max_size=4))) if cut_pool else []
    ops = draw(st.lists(st.tuples(st.integers(1, N), st.integers(0, 3)), max_size=40))
    return codes, B, [1] + cuts, ops


@settings(max_examples=150, deadline=None)
@given(op_sequences())
def test_oracle_equivalence_under_updates(case):
    codes, B, cuts, ops = case
    s = PrefixState(codes, B, cuts)
    ref = list(codes)
    for i, new in ops:
        old = s.position(i)
        s.point_update(i, new)
        ref[i - 1] = new
        d = tuple(np.subtract(s.position(i), old))
        assert d in DELTAS
        p = walk(ref)
        assert np.array_equal(s.positions(), np.array(p))
        assert s.has_zero_anywhere() == any(q == (0, 0) for q in p)
        assert s.has_zero_anywhere() == s.has_zero_in(1, len(ref))
        a, b = sorted((i, len(ref) - i + 1))
        assert s.has_zero_in(a, b) == naive_zero(ref, a, b)
        count, per = s.recount()
        assert count == s.zero_blocks
        assert np.array_equal(per, s.gzero)


def test_compiled_oracle_sequences():
    drive = make_driver(_update, _has_zero_in, _pos)
    g = np.random.default_rng(2)
    for _ in range(50):
        N = int(g.integers(1, 4097))
        s = PrefixState(g.integers(0, 4, N))
        ops = random_ops(g, N, 2000)
        assert drive(s.codes.astype(np.int64), *s._args(), ops) == 0
        count, per = s.recount()
        assert count == s.zero_blocks and np.array_equal(per, s.gzero)


def _per_update_ops(N, n_updates=2000, seed=0):
    g = np.random.default_rng(seed)
    s = PrefixState(g.integers(0, 4, N))
    c0 = s.op_count
    for i, v in zip(g.integers(1, N + 1, n_updates), g.integers(0, 4, n_updates)):
        s.point_update(int(i), int(v))
    return (s.op_count - c0) / n_updates


def test_update_cost_grows_like_sqrt_n():
    costs = [_per_update_ops(1 << e) for e in (10, 14, 18)]
    # N grows 16x per step, so sqrt scaling predicts a 4x cost ratio
    for a, b in zip(costs, costs[1:]):
        assert 3.0 < b / a < 5.3
