import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from levynoise.levy_measure import FiniteAtomic, LevyTriplet, LogSquaredTail, ParetoTail, custom_from_expression
from levynoise.pairing import (
    BUDGET_KEYS,
    PairingResult,
    exact_jump_sum,
    fubini_consistency,
    noise_test_function,
    pair_field,
    pair_noise,
    stochastic_integral,
)
from levynoise.path_sim import path_from_jumps, simulate_path
from levynoise.schwartz import Mollifier, bump_family_1d, from_id
from levynoise.sheet_sim import simulate_sheet

ZERO = LevyTriplet(0.0, 0.0, FiniteAtomic())
POSITIVE_SMALL = custom_from_expression("where((x > 0) & (x <= 1), x**-1.5, 0)")
COMPACT_IDS = ["mollifier", "bump1d:2:1", "bump1d:1.5:2", "bump1d:3:1"]


def drift(gamma, T=4.0, d=1):
    return simulate_sheet(LevyTriplet(gamma, 0.0, FiniteAtomic()), T, d=d)


class TestPairField:
    def test_empty_path(self):
        r = pair_field(simulate_path(ZERO, 4.0), from_id("mollifier"))
        assert r.value == 0.0

    def test_jump_after_support(self):
        p = path_from_jumps([1.0], [2.0], 4.0)
        assert pair_field(p, from_id("mollifier")).value == 0.0

    def test_jump_after_support_2d(self):
        sk = simulate_sheet(ZERO, 4.0, d=2)
        sk = type(sk)(**{**sk.__dict__, "jump_pos": np.array([[1.0, 1.5]]), "jump_size": np.array([2.0])})
        assert pair_field(sk, from_id("mollifier", 2)).value == 0.0

    def test_drift_mollifier(self):
        m = Mollifier()
        oracle = integrate.quad(lambda t: t * m(t), 0, 1, epsabs=1e-14)[0]
        assert pair_field(drift(1.0), m).value == pytest.approx(oracle, abs=1e-8)

    def test_drift_2d(self):
        m = Mollifier()
        one = integrate.quad(lambda t: t * m(t), 0, 1, epsabs=1e-14)[0]
        assert pair_field(drift(2.0, d=2), from_id("mollifier", 2)).value == pytest.approx(2 * one ** 2, abs=1e-8)

    def test_single_jump_tail(self):
        f = bump_family_1d(2.0, 1)
        p = path_from_jumps([2.3], [1.7], 4.0)
        oracle = 1.7 * integrate.quad(f, 2.3, 3.0, epsabs=1e-14)[0]
        assert pair_field(p, f).value == pytest.approx(oracle, abs=1e-10)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            pair_field(drift(1.0), from_id("mollifier", 2))

    def test_window_outside_box(self):
        with pytest.raises(ValueError):
            pair_field(simulate_path(ZERO, 0.5), from_id("mollifier"))

    def test_gaussian_truncated_by_certificate(self):
        p = simulate_path(LevyTriplet(1.0, 0.0, FiniteAtomic()), 40.0)
        oracle = integrate.quad(lambda t: t * math.exp(-t * t / 2), 0, np.inf)[0]
        assert pair_field(p, from_id("gaussian")).value == pytest.approx(oracle, abs=1e-8)

    def test_budget_components(self):
        tr = LevyTriplet(0.3, 1.0, ParetoTail(0.5) + POSITIVE_SMALL)
        r = pair_field(simulate_path(tr, 2.0, eps=2 ** -6, seed=1), from_id("mollifier"))
        assert set(r.budget) == set(BUDGET_KEYS)
        assert all(v >= 0 for v in r.budget.values()) and r.neglected >= 0
        assert r.budget["brownian_grid"] > 0 and r.budget["small_jump_grid"] > 0

    def test_negative_budget_rejected(self):
        with pytest.raises(ValueError):
            PairingResult(0.0, "quadrature", {"quadrature": -1.0})


class TestPairNoise:
    @pytest.mark.parametrize("gamma", [1.0, -0.5])
    def test_drift_equals_integral(self, gamma):
        """<X', phi> = gamma int_0^inf phi: oracle is -int gamma t phi'(t) dt after integration by parts."""
        f = from_id("gaussian").factors[0]
        oracle = -gamma * integrate.quad(lambda t: t * f.deriv(1, np.array([t]))[0], 0, np.inf, epsabs=1e-13)[0]
        p = simulate_path(LevyTriplet(gamma, 0.0, FiniteAtomic()), 40.0)
        assert pair_noise(p, f).value == pytest.approx(oracle, abs=1e-8)
        assert oracle == pytest.approx(gamma * math.sqrt(math.pi / 2), abs=1e-10)

    def test_zero_triplet(self):
        assert pair_noise(simulate_sheet(ZERO, 40.0, d=2), from_id("gaussian", 2)).value == 0.0

    @given(tau=st.floats(0.0, 3.9), y=st.floats(-50, 50).filter(lambda v: abs(v) > 1))
    @settings(max_examples=40, deadline=None)
    def test_single_jump_point_value(self, tau, y):
        f = bump_family_1d(1.2, 1)
        p = path_from_jumps([tau], [y], 4.0)
        assert pair_noise(p, f).value == pytest.approx(y * float(f(np.array([tau]))[0]), abs=1e-9)

    @given(a=st.floats(-5, 5), b=st.floats(-5, 5), seed=st.integers(0, 10 ** 6))
    @settings(max_examples=25, deadline=None)
    def test_linear(self, a, b, seed):
        tr = LevyTriplet(0.5, 0.7, ParetoTail(0.8, 2.0) + POSITIVE_SMALL)
        sk = simulate_path(tr, 3.0, grid_dt=0.01, eps=2 ** -5, seed=seed)
        f, g = from_id("mollifier"), from_id("bump1d:1.5:2")
        lhs = pair_noise(sk, a * f + b * g).value
        rhs = a * pair_noise(sk, f).value + b * pair_noise(sk, g).value
        assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs), abs(a * pair_noise(sk, f).value),
                                             abs(b * pair_noise(sk, g).value))

    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("seed", range(5))
    def test_noise_is_derivative_of_jump_field(self, d, seed):
        """Pairing the Poisson measure with phi equals pairing the jump field with (-1)^d phi^(1_d)."""
        tr = LevyTriplet(0.0, 0.0, ParetoTail(0.6, 3.0))
        sk = simulate_sheet(tr, 3.0, d=d, seed=seed)
        phi = from_id("bump-dd:1.5", d) if d == 2 else from_id("bump1d:1.2:1")
        direct = exact_jump_sum(sk, phi).value
        assert abs(direct - pair_field(sk, noise_test_function(phi)).value) <= 1e-6
        signed = pair_field(sk, phi.mixed_derivative()).value
        assert abs((-1) ** d * signed - direct) <= 1e-6


class TestStochasticIntegral:
    def test_drift_only(self):
        r = stochastic_integral(drift(1.5), from_id("mollifier"))
        assert r.value == pytest.approx(1.5 * Mollifier().total(), abs=1e-12)
        assert r.parts["A2"] == r.parts["A3"] == 0.0

    def test_large_jump_exact(self):
        p = path_from_jumps([0.2, 0.5, 1.4], [2.0, -3.0, 5.0], 4.0)
        m = Mollifier()
        r = stochastic_integral(p, m)
        assert r.value == float(2.0 * m(np.array([0.2]))[0] - 3.0 * m(np.array([0.5]))[0])
        assert r.value == exact_jump_sum(p, m).value

    def test_wiener_isometry(self):
        m = Mollifier()
        l2 = integrate.quad(lambda t: m(t) ** 2, 0, 1, epsabs=1e-14)[0]
        tr = LevyTriplet(0.0, 1.0, FiniteAtomic())
        x = np.array([stochastic_integral(simulate_path(tr, 1.0, grid_dt=1 / 256, seed=s), m).value
                      for s in range(10 ** 4)])
        assert x.var(ddof=1) == pytest.approx(l2, rel=0.05)

    def test_no_pam_unbounded_rejected(self):
        p = simulate_path(LevyTriplet(0, 0, LogSquaredTail(0.5)), 40.0, seed=1)
        with pytest.raises(ValueError, match="positive absolute moment"):
            stochastic_integral(p, from_id("gaussian"))

    def test_no_pam_compact_allowed(self):
        p = simulate_path(LevyTriplet(0, 0, LogSquaredTail(0.5)), 4.0, seed=1)
        r = stochastic_integral(p, from_id("mollifier"))
        assert r.value == exact_jump_sum(p, from_id("mollifier")).value

    def test_pam_unbounded_allowed(self):
        p = simulate_path(LevyTriplet(0, 0, ParetoTail(0.5)), 40.0, seed=1)
        assert stochastic_integral(p, from_id("gaussian")).method == "stochastic-integral"


class TestFubini:
    @given(seed=st.integers(0, 2 ** 40), pid=st.sampled_from(COMPACT_IDS))
    @settings(max_examples=100, deadline=None)
    def test_pure_jump_exact(self, seed, pid):
        tr = LevyTriplet(0.0, 0.0, ParetoTail(0.7, 4.0))
        r = fubini_consistency(simulate_path(tr, 4.0, eps=1.0, seed=seed), from_id(pid))
        assert r.difference <= 1e-6

    @pytest.mark.parametrize("d", [1, 2])
    def test_drift_only(self, d):
        r = fubini_consistency(drift(-1.3, d=d), from_id("mollifier", d))
        assert r.difference <= 1e-8

    @pytest.mark.parametrize("d", [1, 2])
    @pytest.mark.parametrize("seed", range(4))
    def test_full_triplet_within_budget(self, d, seed):
        tr = LevyTriplet(0.5, 1.0, ParetoTail(0.5) + POSITIVE_SMALL)
        sk = simulate_sheet(tr, 2.0, d=d, grid_dt=1 / 128, eps=2 ** -6, seed=seed)
        r = fubini_consistency(sk, from_id("mollifier", d))
        assert r.passed, (r.difference, r.budget)

    def test_rejects_unbounded(self):
        with pytest.raises(ValueError):
            fubini_consistency(drift(1.0, T=40.0), from_id("gaussian"))

    @pytest.mark.parametrize("triplet", [LevyTriplet(0.0, 0.0, POSITIVE_SMALL), LevyTriplet(0.0, 1.0, FiniteAtomic())],
                             ids=["small-jumps", "brownian"])
    def test_grid_refinement_order(self, triplet):
        """Mean discrepancy over seeds decays at least linearly in grid_dt."""
        hs = 2.0 ** -np.arange(5, 10)
        phi = from_id("mollifier")
        errs = [np.mean([fubini_consistency(simulate_path(triplet, 2.0, grid_dt=h, eps=2 ** -8, seed=s),
                                            phi).difference for s in range(40)]) for h in hs]
        assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 0.8

    @pytest.mark.parametrize("h", [1 / 32, 1 / 256])
    def test_drift_part_independent_of_grid(self, h):
        m = Mollifier()
        oracle = integrate.quad(lambda t: t * m(t), 0, 1, epsabs=1e-14)[0]
        p = simulate_path(LevyTriplet(1.0, 0.0, FiniteAtomic()), 2.0, grid_dt=h)
        assert abs(pair_field(p, m).parts["drift"] - oracle) <= 1e-8
