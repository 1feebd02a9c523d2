import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from dynwalk import rng
from dynwalk.core import (
    Direction,
    batch_steps,
    load_realization,
    positions,
    refresh_events,
    refreshed_indices,
    sample_realization,
    save_realization,
    step_at,
    two_slice_steps,
)

from oracles import all_paths


def test_direction_vectors():
    assert [d.vector for d in Direction] == [(0, 1), (0, -1), (1, 0), (-1, 0)]


def test_mix64_known_values():
    # splitmix64 finalizer reference outputs
    assert int(rng.mix64(np.uint64(0))) == 0
    assert int(rng.mix64(np.uint64(1))) == 0x5692161D100B05E5


def test_tmax_zero_single_entry():
    r = sample_realization(1, 0.0, 11)
    tl = r.timeline(1)
    assert tl.times.tolist() == [0.0]
    assert step_at(r, 1, 0.0) == tl.directions[0]


def test_determinism():
    a = sample_realization(500, 2.0, 99).timelines()
    b = sample_realization(500, 2.0, 99).timelines()
    for u, v in zip(a, b):
        assert np.array_equal(u, v)


def test_index_timeline_independent_of_range():
    r = sample_realization(1000, 1.5, 3)
    tl = r.timeline(417)
    sub = r.timelines(400, 450)
    j = 417 - 400
    seg = slice(sub.offsets[j], sub.offsets[j + 1])
    assert np.array_equal(tl.times[1:], sub.times[seg])


def test_poisson_mean_count():
    tl = sample_realization(100_000, 1.0, 5).timelines()
    c = tl.counts
    assert abs(c.mean() - 1.0) < 3 * c.std() / np.sqrt(c.size)


def test_poisson_counts_chi_square():
    c = sample_realization(100_000, 1.0, 6).timelines().counts
    obs = np.array([np.sum(c == k) for k in range(5)] + [np.sum(c >= 5)])
    p = stats.poisson.pmf(np.arange(5), 1.0)
    exp = c.size * np.append(p, 1 - p.sum())
    assert stats.chisquare(obs, exp).pvalue > 1e-3


@pytest.mark.parametrize("t", [0.0, 0.5, 3.0])
def test_direction_uniformity(t):
    codes = batch_steps(rng.split_seed(17, np.arange(100_000, dtype=np.uint64)), 1, t)[:, 0]
    obs = np.bincount(codes, minlength=4)
    assert stats.chisquare(obs).pvalue > 1e-3


def test_s2_return_law_at_zero():
    # oracle: 4 of the 16 two-step paths come back
    p = all_paths(2)
    exact = np.mean(np.all(positions(p)[:, 1] == 0, axis=1))
    assert exact == 0.25
    codes = batch_steps(rng.split_seed(8, np.arange(100_000, dtype=np.uint64)), 2, 0.0)
    hit = np.all(positions(codes)[:, 1] == 0, axis=1)
    se = np.sqrt(exact * (1 - exact) / hit.size)
    assert abs(hit.mean() - exact) < 3 * se


def test_half_open_convention():
    r = sample_realization(50, 5.0, 21)
    for n in range(1, 51):
        tl = r.timeline(n)
        if len(tl.times) < 2:
            continue
        t1 = tl.times[1]
        assert step_at(r, n, 0.0) == tl.directions[0]
        assert step_at(r, n, t1) == tl.directions[1]
        assert step_at(r, n, np.nextafter(t1, 0)) == tl.directions[0]
        assert step_at(r, n, 5.0) == tl.directions[-1]
        return
    pytest.fail("no index rang")


def test_out_of_range_is_an_error():
    r = sample_realization(10, 1.0, 0)
    for n, t in [(0, 0.5), (11, 0.5), (1, -0.1), (1, 1.1)]:
        with pytest.raises(ValueError):
            step_at(r, n, t)


def test_refresh_events_basic():
    r = sample_realization(300, 2.0, 4)
    assert len(refresh_events(r, (0.7, 0.7))) == 0
    ev = refresh_events(r, (0.0, 2.0))
    assert len(ev) == r.timelines().counts.sum()
    assert np.all(np.diff(ev.times) >= 0)
    assert np.all(ev.times > 0)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**63), N=st.integers(1, 200), t_max=st.floats(0.0, 3.0))
def test_replay_reproduces_direct_queries(seed, N, t_max):
    r = sample_realization(N, t_max, seed)
    ev = refresh_events(r, (0.0, t_max))
    codes = r.steps_at(0.0).copy()
    bounds = np.concatenate([[0.0], ev.times, [t_max]])
    for j in range(len(ev)):
        codes[ev.indices[j] - 1] = ev.directions[j]
        mid = 0.5 * (bounds[j + 1] + bounds[j + 2])
        if j + 1 < len(ev) and ev.times[j + 1] == ev.times[j]:
            continue
        assert np.array_equal(codes, r.steps_at(mid))
    assert np.array_equal(codes, r.steps_at(t_max))


def test_refreshed_indices():
    r = sample_realization(100, 1.0, 2)
    assert refreshed_indices(r, (1, 100), 0.0).size == 0
    I = set(refreshed_indices(r, (1, 100), 0.6).tolist())
    for n in range(1, 101):
        tl = r.timeline(n)
        assert (n in I) == bool(np.any((tl.times > 0) & (tl.times <= 0.6)))


def test_refreshed_count_mean():
    t, n, reps = 0.4, 64, 10_000
    sizes = np.array([refreshed_indices(sample_realization(n, t, s), (1, n), t).size
                      for s in range(reps)])
    assert abs(sizes.mean() - (1 - np.exp(-t)) * n) < 3 * sizes.std() / np.sqrt(reps)


def test_batch_matches_realizations():
    seeds = [1, 2, 3, 2**63 + 5]
    for t in (0.0, 0.37, 1.0):
        b = batch_steps(seeds, 40, t)
        for row, s in zip(b, seeds):
            assert np.array_equal(row, sample_realization(64, 2.0, s).steps_at(t, 1, 40))


def test_two_slice_law_and_identity():
    seeds = rng.split_seed(3, np.arange(20_000, dtype=np.uint64))
    c0, ct = two_slice_steps(seeds, 8, 0.7)
    assert np.array_equal(c0, batch_steps(seeds, 8, 0.0))
    same = np.mean(c0 == ct)
    exp = np.exp(-0.7) + (1 - np.exp(-0.7)) / 4
    assert abs(same - exp) < 3 * np.sqrt(exp * (1 - exp) / c0.size)
    c0, c0b = two_slice_steps(seeds, 8, 0.0)
    assert np.array_equal(c0, c0b)


def test_serialization_round_trip(tmp_path):
    r = sample_realization(200, 1.5, 77)
    save_realization(r, tmp_path / "r.bin")
    q = load_realization(tmp_path / "r.bin")
    assert (q.N, q.t_max, q.seed) == (r.N, r.t_max, r.seed)
    for u, v in zip(r.timelines(), q.timelines()):
        assert np.array_equal(u, v)
    assert np.array_equal(q.steps_at(0.9), r.steps_at(0.9))
    (tmp_path / "bad.bin").write_bytes(b"XXXX")
    with pytest.raises(ValueError):
        load_realization(tmp_path / "bad.bin")
