import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from levynoise.schwartz import (
    P_MAX,
    Mollifier,
    PolyGaussian,
    SmoothStep,
    Tensor,
    antiderivative_I,
    bump_family_1d,
    bump_family_dd,
    cutoff_theta_dd,
    from_id,
    gaussian,
    grando_constant,
    hermite,
    iphi_constant,
    np2_constant,
    phi_tail_constant,
    seminorm,
    tail_integral_Phi,
    tensor_I_d,
)

ONE_D = {
    "gaussian": gaussian(),
    "hermite-3": hermite(3),
    "t-gaussian": PolyGaussian((0.0, 1.0)),
    "mollifier": Mollifier(),
    "bump-2.5-2": bump_family_1d(2.5, 2),
}


def _t(f, n=4001):
    lo, hi = f.window()
    return np.linspace(lo - 1, hi + 1, n)


class TestSeminorm:
    def test_gaussian_p0(self):
        assert seminorm(gaussian(), 0).lower == pytest.approx(1.0, abs=1e-6)

    def test_t_gaussian_p0(self):
        """sup |t e^{-t^2/2}| is attained at t = 1."""
        assert seminorm(PolyGaussian((0.0, 1.0)), 0).lower == pytest.approx(math.exp(-0.5), abs=1e-6)

    @pytest.mark.parametrize("name", list(ONE_D))
    def test_lower_le_upper(self, name):
        for p in range(4):
            est = seminorm(ONE_D[name], p)
            assert 0 <= est.lower <= est.upper

    @given(name=st.sampled_from(list(ONE_D)), p=st.integers(0, P_MAX - 1))
    @settings(max_examples=25, deadline=None)
    def test_monotone_in_p(self, name, p):
        f = ONE_D[name]
        assert seminorm(f, p).lower <= seminorm(f, p + 1).lower

    def test_monotone_in_p_2d(self):
        f = from_id("bump-dd:1.5", 2)
        vals = [seminorm(f, p).lower for p in range(4)]
        assert vals == sorted(vals)

    @pytest.mark.parametrize("name", ["gaussian", "mollifier", "hermite-3"])
    def test_refinement_nondecreasing(self, name):
        f = ONE_D[name]
        coarse = seminorm(f, 2, resolution=2 ** 10).lower
        fine = seminorm(f, 2, resolution=2 ** 13).lower
        assert fine >= coarse * (1 - 1e-12)

    def test_p_max(self):
        with pytest.raises(ValueError):
            seminorm(gaussian(), P_MAX + 1)

    def test_certificate_dominates_grid(self):
        for f in ONE_D.values():
            for a in range(3):
                for b in range(3):
                    assert f.sup_cert(a, b) >= f.sup_abs(a, b, polish=False)


class TestBumpFamilies:
    @pytest.mark.parametrize("S", [1.0, 2.5, 10.0])
    def test_unit_mass(self, S):
        f = bump_family_1d(S, 2)
        val, _ = integrate.quad(f, S, S + S ** -2, epsabs=1e-14, epsrel=1e-13, limit=200)
        assert val == pytest.approx(1.0, abs=1e-9)
        assert f.total() == pytest.approx(1.0, abs=1e-9)

    def test_support_scale_one(self):
        f = bump_family_1d(1.0, 2)
        assert f.support == (1.0, 2.0)
        outside = np.concatenate([np.linspace(-3, 1, 50), np.linspace(2, 5, 50)])
        assert np.all(f(outside) == 0.0)

    @pytest.mark.parametrize("S", [1.5, 4.0])
    def test_support_containment(self, S):
        f = bump_family_1d(S, 2)
        lo, hi = S, S + S ** -2
        t = np.concatenate([np.linspace(lo - 1, lo, 30), np.linspace(hi, hi + 1, 30)])
        assert np.all(f(t) == 0.0)
        for k in range(1, 4):
            assert np.all(f.deriv(k, t) == 0.0)

    def test_rejects_nonpositive_S(self):
        with pytest.raises(ValueError):
            bump_family_1d(0.0, 2)
        with pytest.raises(ValueError):
            bump_family_dd(-1.0, 2)

    def test_dd_support_and_mass(self):
        f = bump_family_dd(1.0, 2)
        assert f.box() == [(1.0, 2.0), (1.0, 2.0)]
        assert f.integral_pos()[0] == pytest.approx(1.0, abs=1e-9)
        pts = np.array([[0.99, 1.5], [1.5, 2.01], [2.0, 1.5], [3.0, 3.0]])
        assert np.all(f(pts) == 0.0)

    def test_dd_reduces_to_1d_with_k3(self):
        S = 1.7
        a, b = bump_family_dd(S, 1), bump_family_1d(S, 3)
        t = np.linspace(S - 0.1, S + S ** -3 + 0.1, 301)
        np.testing.assert_array_equal(a(t), b(t))

    def test_np2_example(self):
        """S_n = 4, k = 2, p = 1: N_1(phi_n) <= C N_1(phi) 4^5."""
        lhs = seminorm(bump_family_1d(4.0, 2), 1)
        base = seminorm(Mollifier(), 1)
        assert lhs.upper <= np2_constant(1) * base.lower * 4.0 ** 5

    def test_grando_example(self):
        """d = 2, S_n = 3, p = 0: N_0(phi_n) <= C_0 N_0(phi) 3^6."""
        lhs = seminorm(bump_family_dd(3.0, 2), 0)
        base = seminorm(Tensor((Mollifier(), Mollifier())), 0)
        assert lhs.lower <= grando_constant(0, 2) * base.upper * 3.0 ** 6

    @pytest.mark.parametrize("S", [1.0, 2.0, 4.0, 8.0, 16.0])
    def test_np2_grando_grid(self, S):
        for p in range(3):
            one = seminorm(bump_family_1d(S, 2), p).lower
            assert one <= np2_constant(p) * seminorm(Mollifier(), p).upper * S ** ((p + 1) * 2 + p)
            two = seminorm(bump_family_dd(S, 2), p).lower
            base = seminorm(Tensor((Mollifier(), Mollifier())), p).upper
            assert two <= grando_constant(p, 2) * base * S ** (6 + 4 * p)

    def test_base_contract(self):
        with pytest.raises(ValueError):
            bump_family_1d(2.0, 2, base=gaussian())


class TestOperatorI:
    def test_theta_maps_to_zero(self):
        t = np.linspace(-2, 3, 501)
        assert np.max(np.abs(antiderivative_I(Mollifier())(t))) <= 1e-15

    @pytest.mark.parametrize("f", [gaussian(), hermite(3)], ids=["gaussian", "hermite-3"])
    def test_inverts_derivative(self, f):
        t = _t(f, 20001)
        assert np.max(np.abs(antiderivative_I(f.derivative(1))(t) - f(t))) <= 1e-9

    def test_far_tail_against_quadrature(self):
        """Direct quadrature of int_{-inf}^t (phi - theta int phi) for |t| >= 10."""
        g, th = gaussian(), Mollifier()
        Ig = antiderivative_I(g)
        mass = math.sqrt(2 * math.pi)
        for t in (-15.0, -10.0, 10.0, 15.0):
            oracle = integrate.quad(g, -np.inf, t, epsabs=1e-15)[0]
            if t > 0:
                oracle -= mass * integrate.quad(th, 0, 1, epsabs=1e-15)[0]
            assert float(Ig(np.array([t]))[0]) == pytest.approx(oracle, abs=1e-12)
        tail = np.concatenate([np.linspace(-30, -10, 500), np.linspace(10, 30, 500)])
        assert np.max(np.abs(Ig(tail))) <= iphi_constant(0) * seminorm(g, 2).lower

    @pytest.mark.parametrize("f", [gaussian(), hermite(3), PolyGaussian((1.0, 0.0, -2.0))])
    @pytest.mark.parametrize("p", [0, 1, 2])
    def test_weighted_bound(self, f, p):
        assert antiderivative_I(f).sup_cert(p, 0) <= iphi_constant(p) * seminorm(f, p + 2).lower

    @given(a=st.floats(-3, 3), b=st.floats(-3, 3))
    @settings(max_examples=30, deadline=None)
    def test_linear(self, a, b):
        c1, c2 = np.array([0.0, 1.0, 0.0, 0.0]), np.array([0.0, -3.0, 0.0, 1.0])
        t = np.linspace(-8, 8, 401)
        lhs = antiderivative_I(PolyGaussian(tuple(a * c1 + b * c2)))(t)
        rhs = a * antiderivative_I(PolyGaussian(tuple(c1)))(t) + b * antiderivative_I(PolyGaussian(tuple(c2)))(t)
        assert np.max(np.abs(lhs - rhs)) <= 1e-12

    def test_derivative_finite_difference(self):
        """(I phi)' = phi - theta int phi; central differences converge at order h^2."""
        g, th = hermite(2), Mollifier()
        Ig = antiderivative_I(g)
        t = np.linspace(-3, 3, 61)
        exact = g(t) - th(t) * g.total()
        errs = []
        for h in (1e-3, 1e-4):
            fd = (Ig(t + h) - Ig(t - h)) / (2 * h)
            errs.append(np.max(np.abs(fd - exact)))
        assert 50 <= errs[0] / errs[1] <= 200

    def test_theta_contract(self):
        with pytest.raises(ValueError):
            antiderivative_I(gaussian(), theta=gaussian())


class TestTensorI:
    def test_inverts_mixed_derivative(self):
        g = gaussian()
        G = Tensor((g, g))
        u = np.linspace(-9, 9, 301)
        pts = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
        assert np.max(np.abs(tensor_I_d(G.mixed_derivative())(pts) - G(pts))) <= 1e-9

    def test_theta_tensor_vanishes(self):
        th = Mollifier()
        u = np.linspace(-1, 2, 61)
        pts = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
        assert np.max(np.abs(tensor_I_d(Tensor((th, th)))(pts))) <= 1e-15

    def test_d1_matches(self):
        f = hermite(3)
        t = np.linspace(-6, 6, 201)
        np.testing.assert_array_equal(tensor_I_d(Tensor((f,)))(t), antiderivative_I(f)(t))

    def test_rejects_combination(self):
        g = from_id("gaussian", 2)
        with pytest.raises(ValueError):
            tensor_I_d(g + g)


class TestTailIntegral:
    def test_compact_beyond_support(self):
        Phi = tail_integral_Phi(from_id("mollifier", 2))
        pts = np.array([[1.2, 0.0], [0.3, 1.01], [2.0, 2.0]])
        assert np.all(Phi(pts) == 0.0)

    def test_gaussian_at_zero(self):
        Phi = tail_integral_Phi(gaussian())
        assert float(Phi(np.array([0.0]))[0]) == pytest.approx(math.sqrt(math.pi / 2), abs=1e-9)

    def test_bump_plateaus(self):
        S = 3.0
        Phi = tail_integral_Phi(bump_family_1d(S, 2))
        assert np.all(Phi(np.linspace(-2, S, 40)) == 1.0)
        assert np.all(Phi(np.linspace(S + S ** -2, S + 3, 40)) == 0.0)

    @pytest.mark.parametrize("name", ["gaussian", "hermite-3", "mollifier"])
    def test_against_quadrature(self, name):
        f = from_id(name).factors[0]
        Phi = tail_integral_Phi(f)
        rng = np.random.default_rng(4)
        for t in rng.uniform(-4, 4, 100):
            oracle = integrate.quad(f, t, np.inf if f.support is None else max(t, f.support[1]), epsabs=1e-13,
                                    limit=200)[0]
            assert float(Phi(np.array([t]))[0]) == pytest.approx(oracle, abs=1e-8)

    @pytest.mark.parametrize("p", [0, 1])
    def test_weighted_estimate_1d(self, p):
        """sup_{t >= -1} |(1 + |t|^a) Phi^(b)(t)| <= C N_{p+2}(phi) for a, b <= p."""
        g = gaussian()
        Phi = tail_integral_Phi(g).factors[0]
        t = np.linspace(-1, 40, 40001)
        rhs = phi_tail_constant(p, 1) * seminorm(g, p + 2).lower
        for a in range(p + 1):
            for b in range(p + 1):
                assert np.max(np.abs((1 + np.abs(t) ** a) * Phi.deriv(b, t))) <= rhs

    def test_weighted_estimate_2d(self):
        g2 = from_id("gaussian", 2)
        Phi = tail_integral_Phi(g2)
        u = np.linspace(-1, 12, 261)
        pts = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
        lhs = np.max(np.abs((1 + np.abs(pts[:, 0] * pts[:, 1])) * Phi(pts)))
        assert lhs <= phi_tail_constant(1, 2) * seminorm(g2, 5).lower


class TestCutoff:
    def test_plateaus(self):
        th = cutoff_theta_dd(3)
        assert float(th(np.zeros((1, 3)))[0]) == 1.0
        pts = np.array([[-1.0, 5.0, 0.0], [3.0, -1.0, 2.0], [-2.0, -3.0, -1.5]])
        assert np.all(th(pts) == 0.0)
        assert float(th(np.array([[-0.5, -0.5, 7.0]]))[0]) == 1.0

    def test_partial_derivative_bound(self):
        step = SmoothStep(-1.0, -0.5)
        s = np.linspace(-1, -0.5, 20001)
        bound = np.max(np.abs(step.deriv(1, s)))
        th = cutoff_theta_dd(2)
        u = np.linspace(-1.5, 1.0, 501)
        pts = np.stack(np.meshgrid(u, u, indexing="ij"), -1).reshape(-1, 2)
        assert np.max(np.abs(th.deriv((1, 0), pts))) <= bound * (1 + 1e-12)


class TestIdentifiers:
    @pytest.mark.parametrize("name", ["gaussian", "hermite-4", "mollifier", "bump1d:2:1", "bump-dd:2"])
    def test_resolves(self, name):
        f = from_id(name, 2)
        assert f.dim == 2

    @pytest.mark.parametrize("name", ["sinc", "bump1d:2", "hermite-x"])
    def test_unknown(self, name):
        with pytest.raises(ValueError):
            from_id(name)
