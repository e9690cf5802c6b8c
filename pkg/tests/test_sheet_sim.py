import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from levynoise.levy_measure import FiniteAtomic, LevyTriplet, ParetoTail
from levynoise.path_sim import simulate_path
from levynoise.sheet_sim import (
    Skeleton,
    band_count,
    default_grid,
    independence_check,
    simulate_sheet,
)
from levynoise.sheet_sim import slice as sheet_slice


def sheet_with_jumps(pos, sizes, T=(4.0, 4.0), gamma=0.0):
    """Deterministic pure-jump sheet with the given record."""
    pos = np.asarray(pos, dtype=float).reshape(-1, len(T))
    dt, cells = default_grid(T)
    z = lambda *s: np.zeros(s)  # noqa: E731
    return Skeleton(LevyTriplet(gamma, 0.0, FiniteAtomic()), tuple(T), dt, cells, 1.0, 0, 0, pos,
                    np.asarray(sizes, dtype=float), z(0, len(T)), z(0), np.zeros(0, int), 0.0, 0.0)


def corners(sk, a, b):
    """Oracle: alternating sum of evaluations over the corners of ]a, b]."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    total = 0.0
    for eps in np.ndindex(*(2,) * len(a)):
        c = np.where(np.array(eps) == 1, a, b)
        total += (-1) ** sum(eps) * float(sk.evaluate(c[None, :])[0])
    return total


MIXED = LevyTriplet(0.4, 0.8, ParetoTail(1.2, 0.5))


class TestSimulate:
    def test_d1_matches_path_law(self):
        """Sheet with d = 1 and the path simulator give the same jump-count law."""
        tr = LevyTriplet(0.0, 0.0, ParetoTail(0.5, 2.0))
        a = [len(simulate_sheet(tr, 10.0, seed=s).jump_size) for s in range(3000)]
        b = [len(simulate_path(tr, 10.0, seed=s).jump_size) for s in range(3000)]
        assert abs(np.mean(a) - np.mean(b)) <= 3 * math.sqrt(2 * 20 / 3000)

    def test_brownian_sheet_variance(self):
        tr = LevyTriplet(0.0, 1.0, FiniteAtomic())
        n, t = 10 ** 4, (0.75, 1.5)
        x = np.array([simulate_sheet(tr, (1.0, 2.0), grid_dt=0.25, seed=s).evaluate([t])[0] for s in range(n)])
        assert x.var(ddof=1) == pytest.approx(t[0] * t[1], rel=0.05)

    def test_jump_count_poisson(self):
        lam, T, n = 1.5, 3.0, 10 ** 4
        tr = LevyTriplet(0.0, 0.0, FiniteAtomic(((2.0, lam),)))
        counts = np.array([len(simulate_sheet(tr, T, d=2, grid_dt=T, seed=s).jump_size) for s in range(n)])
        assert abs(counts.mean() - lam * T * T) <= 3 * math.sqrt(lam * T * T / n)

    def test_sub_box_count(self):
        """Counts in a sub-box B are Poisson(lambda Leb(B))."""
        lam, n = 2.0, 10 ** 4
        tr = LevyTriplet(0.0, 0.0, FiniteAtomic(((-3.0, lam),)))
        lo, hi = np.array([0.5, 1.0]), np.array([1.5, 1.5])
        counts = []
        for s in range(n):
            sk = simulate_sheet(tr, (2.0, 2.0), grid_dt=2.0, seed=s)
            counts.append(int(np.sum(np.all((sk.jump_pos > lo) & (sk.jump_pos <= hi), axis=1))))
        mu = lam * 0.5
        counts = np.array(counts)
        assert abs(counts.mean() - mu) <= 3 * math.sqrt(mu / n)
        observed = np.bincount(counts, minlength=6)[:6]
        expected = n * stats.poisson(mu).pmf(np.arange(6))
        assert stats.chisquare(observed[:4], expected[:4] * observed[:4].sum() / expected[:4].sum()).pvalue > 1e-3

    def test_exact_positions(self):
        tr = LevyTriplet(0.0, 0.0, ParetoTail(0.5, 5.0))
        sk = simulate_sheet(tr, (3.0, 2.0), grid_dt=0.5, seed=8)
        assert not np.allclose(sk.jump_pos / 0.5, np.round(sk.jump_pos / 0.5))

    def test_bad_args(self):
        with pytest.raises(ValueError):
            simulate_sheet(MIXED, (1.0, 0.0))
        with pytest.raises(ValueError):
            simulate_sheet(MIXED, (1.0, 1.0), d=3)

    def test_grid_cap(self):
        dt, cells = default_grid((10.0, 10.0, 10.0))
        assert math.prod(c + 1 for c in cells) <= 2 ** 20

    def test_band_count(self):
        assert band_count(2.0 ** -10) == 10
        assert band_count(1.0) == 0


class TestLamp:
    @given(seed=st.integers(0, 1000), u=st.floats(0, 2), v=st.floats(0, 2))
    @settings(max_examples=30, deadline=None)
    def test_vanishes_on_axes(self, seed, u, v):
        sk = simulate_sheet(MIXED, 2.0, d=2, grid_dt=0.1, seed=seed)
        assert np.all(sk.evaluate(np.array([[0.0, v], [u, 0.0]])) == 0.0)

    def test_vanishes_d3(self):
        sk = simulate_sheet(MIXED, 1.0, d=3, grid_dt=0.1, seed=1)
        pts = np.array([[0.0, 0.5, 0.7], [0.2, 0.0, 1.0], [1.0, 1.0, 0.0]])
        assert np.all(sk.evaluate(pts) == 0.0)


class TestIncrement:
    def test_d1_difference(self):
        sk = simulate_sheet(MIXED, 5.0, seed=3)
        assert sk.increment([1.0], [4.0]) == pytest.approx(
            float(sk.evaluate([[4.0]])[0] - sk.evaluate([[1.0]])[0]), abs=1e-12)

    def test_single_jump(self):
        sk = sheet_with_jumps([[1.0, 2.0]], [3.5])
        assert sk.increment([0.5, 1.0], [2.0, 3.0]) == 3.5
        assert corners(sk, [0.5, 1.0], [2.0, 3.0]) == 3.5

    def test_empty_box(self):
        sk = sheet_with_jumps([[1.0, 2.0]], [3.5])
        assert sk.increment([1.5, 0.0], [3.0, 4.0]) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_corner_sum(self, seed):
        sk = simulate_sheet(MIXED, 2.0, d=2, grid_dt=0.125, seed=seed)
        a, b = [0.25, 0.5], [1.5, 1.75]
        assert sk.increment(a, b) == pytest.approx(corners(sk, a, b), abs=1e-10)

    def test_rejects_unordered(self):
        sk = simulate_sheet(MIXED, 2.0, d=2)
        with pytest.raises(ValueError):
            sk.increment([1.0, 1.0], [0.5, 2.0])

    @given(cut=st.floats(0.3, 1.7))
    @settings(max_examples=25, deadline=None)
    def test_additivity_jumps_and_drift(self, cut):
        tr = LevyTriplet(0.7, 0.0, ParetoTail(0.9, 4.0))
        sk = simulate_sheet(tr, 2.0, d=2, seed=11)
        a, b = np.array([0.2, 0.1]), np.array([1.9, 1.6])
        mid_b, mid_a = b.copy(), a.copy()
        mid_b[0] = mid_a[0] = cut
        whole = sk.increment(a, b)
        assert whole == pytest.approx(sk.increment(a, mid_b) + sk.increment(mid_a, b), abs=1e-12)

    def test_additivity_brownian_on_grid(self):
        tr = LevyTriplet(0.0, 1.0, FiniteAtomic())
        sk = simulate_sheet(tr, 2.0, d=2, grid_dt=0.25, seed=2)
        a, m, b = [0.25, 0.5], 1.0, [1.75, 1.5]
        left = sk.increment(a, [m, b[1]])
        right = sk.increment([m, a[1]], b)
        assert sk.increment(a, b) == pytest.approx(left + right, abs=1e-12)

    def test_stationarity(self):
        tr = LevyTriplet(0.1, 0.5, ParetoTail(1.5, 1.0))
        x, y = [], []
        for s in range(10 ** 4):
            sk = simulate_sheet(tr, 2.0, d=2, grid_dt=0.25, seed=s)
            x.append(sk.increment([0.0, 0.25], [0.5, 1.0]))
            y.append(sk.increment([1.0, 1.0], [1.5, 1.75]))
        assert stats.ks_2samp(x, y).pvalue > 1e-3


class TestSlice:
    def test_literal_record(self):
        sk = sheet_with_jumps([[0.5, 3.0]], [2.5])
        s = sheet_slice(sk, 1, 1.0)
        np.testing.assert_array_equal(s.jump_times, [3.0])
        np.testing.assert_array_equal(s.jump_sizes, [2.5])
        assert len(sheet_slice(sk, 1, 0.4).jump_times) == 0

    def test_drift_slice(self):
        sk = sheet_with_jumps(np.zeros((0, 2)), [], gamma=1.5)
        s = sheet_slice(sk, 1, 0.6)
        t = np.linspace(0, 4, 9)
        np.testing.assert_allclose(s.evaluate(t), 1.5 * 0.6 * t, atol=1e-14)

    def test_large_part_matches_record(self):
        sk = simulate_sheet(MIXED, (2.0, 30.0), grid_dt=0.5, seed=5)
        L = sheet_slice(sk, 1, 1.0, part="large")
        keep = sk.jump_pos[:, 0] <= 1.0
        assert sorted(L.jump_times) == sorted(sk.jump_pos[keep, 1])
        t = np.linspace(0, 30, 301)
        oracle = [sk.jump_size[keep & (sk.jump_pos[:, 1] <= u)].sum() for u in t]
        np.testing.assert_allclose(L.evaluate(t), oracle, atol=1e-12)

    def test_full_slice_matches_evaluate(self):
        sk = simulate_sheet(MIXED, 2.0, d=2, grid_dt=0.1, seed=6)
        s = sheet_slice(sk, 0, 1.3)
        t = np.linspace(0, 2, 17)
        np.testing.assert_array_equal(s.evaluate(t), sk.evaluate(np.stack([t, np.full_like(t, 1.3)], -1)))

    @pytest.mark.parametrize("axis,fixed", [(2, 1.0), (-1, 1.0), (1, 5.0)])
    def test_rejects(self, axis, fixed):
        sk = simulate_sheet(MIXED, 2.0, d=2)
        with pytest.raises(ValueError):
            sheet_slice(sk, axis, fixed)

    def test_bad_part(self):
        with pytest.raises(ValueError):
            sheet_slice(simulate_sheet(MIXED, 2.0, d=2), 1, 1.0, part="small")


@pytest.fixture(scope="module")
def sheets():
    tr = LevyTriplet(0.0, 1.0, ParetoTail(2.5, 1.0))
    return [simulate_sheet(tr, 2.0, d=2, grid_dt=0.5, seed=s) for s in range(TestIndependence.N)]


class TestIndependence:
    N = 10 ** 4

    def test_two_boxes(self, sheets):
        c = independence_check(sheets, [([0, 0], [1, 1]), ([1, 1], [2, 2])])
        assert abs(c[0, 1]) <= 3 / math.sqrt(self.N)

    def test_three_boxes(self, sheets):
        boxes = [([0, 0], [1, 1]), ([1, 0], [2, 1]), ([0, 1], [2, 2])]
        c = independence_check(sheets, boxes)
        assert c.shape == (3, 3)
        off = c[~np.eye(3, dtype=bool)]
        assert np.all(np.abs(off) <= 3 / math.sqrt(self.N))

    def test_overlap_rejected(self, sheets):
        with pytest.raises(ValueError):
            independence_check(sheets[:5], [([0, 0], [1, 1]), ([0, 0], [1, 1])])
