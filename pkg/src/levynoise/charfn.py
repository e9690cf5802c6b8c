"""Lévy symbol, characteristic functional and its Monte-Carlo counterpart.

``psi(z) = i gamma z - sigma^2 z^2 / 2 + int (e^{ixz} - 1 - ixz 1_{|x|<=1}) nu(dx)``
and ``E exp(i <X', phi>) = exp(int_{R_+^d} psi(phi(t)) dt)``.
"""
from __future__ import annotations

import math

import numpy as np
from scipy import integrate, special

from .levy_measure import (Composite, Custom, FiniteAtomic, GaussianDensity, LevyMeasure, LevyTriplet,
                           LogSquaredTail, ParetoTail)
from .pairing import PAM_GRID
from .levy_measure import classify_pam
from .schwartz import Combination, as_test_function, is_compact
from .seeding import CHUNK, LARGE_JUMPS, SMALL_JUMPS, BROWNIAN, chunk_rngs, derive_rng

TAYLOR_GUARD = 1e-4
_GL = np.polynomial.legendre.leggauss(16)


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 500)
    kw.setdefault("epsabs", 1e-14)
    kw.setdefault("epsrel", 1e-12)
    return integrate.quad(f, a, b, **kw)[0]


def _expm1_comp(u):
    """``e^{iu} - 1 - iu`` with a Taylor guard for ``|u| < TAYLOR_GUARD``."""
    scalar = np.ndim(u) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    small = np.abs(u) < TAYLOR_GUARD
    out = np.exp(1j * u) - 1.0 - 1j * u
    us = u[small]
    out[small] = -0.5 * us ** 2 - 1j * us ** 3 / 6.0 + us ** 4 / 24.0
    return out[0] if scalar else out


def _pareto_cos_integral(beta: float, a: float) -> float:
    """``int_1^inf (cos(a x) - 1) x^{-beta-1} dx`` for ``a >= 0``."""
    if a == 0:
        return 0.0
    if 0 < beta < 2 and abs(beta - 1) > 1e-9 and a <= 10:
        # a^beta Gamma(-beta) cos(pi beta/2) - sum_k (-1)^k a^{2k} / ((2k)! (2k - beta))
        head = a ** beta * special.gamma(-beta) * math.cos(math.pi * beta / 2)
        s, k, term = 0.0, 1, 1.0
        while True:
            term = (-1) ** k * a ** (2 * k) / (math.factorial(2 * k) * (2 * k - beta))
            s += term
            if abs(term) < 1e-17 * max(1.0, abs(s)) and k > a:
                break
            k += 1
        return head - s
    osc = integrate.quad(lambda x: x ** (-beta - 1), 1.0, np.inf, weight="cos", wvar=a, limlst=200)[0]
    return osc - 1.0 / beta


def _logsq_integral(a: float) -> complex:
    """``int_e^inf (e^{iax} - 1) dx / (x log^2 x)``."""
    if a == 0:
        return 0.0
    w = lambda x: 1.0 / (x * math.log(x) ** 2)
    sgn = 1.0 if a > 0 else -1.0
    a = abs(a)
    if a < 1e-150:
        re, im = _logsq_scaled(a)
        return complex(re, sgn * im)
    # split at a finite point: QAWF on [x0, inf) and plain quadrature below
    x0 = max(math.e + 1.0, 50.0 / a)
    re = _quad(lambda x: (math.cos(a * x) - 1.0) * w(x), math.e, x0)
    im = _quad(lambda x: math.sin(a * x) * w(x), math.e, x0)
    re += integrate.quad(w, x0, np.inf, weight="cos", wvar=a, limlst=200)[0] - 1.0 / math.log(x0)
    im += integrate.quad(w, x0, np.inf, weight="sin", wvar=a, limlst=200)[0]
    return complex(re, sgn * im)


def _logsq_scaled(a: float) -> tuple:
    # u = a x: int_{ae}^inf (e^{iu} - 1) du / (u (log u + L)^2), L = -log a; 50/a would overflow
    L = -math.log(a)
    lo = math.log(a) + 1.0
    re = _quad(lambda v: (math.cos(math.exp(v)) - 1.0) / (v + L) ** 2, lo, math.log(50.0))
    im = _quad(lambda v: math.sin(math.exp(v)) / (v + L) ** 2, lo, math.log(50.0))
    w = lambda u: 1.0 / (u * (math.log(u) + L) ** 2)
    re += integrate.quad(w, 50.0, np.inf, weight="cos", wvar=1.0, limlst=200)[0] - 1.0 / (math.log(50.0) + L)
    im += integrate.quad(w, 50.0, np.inf, weight="sin", wvar=1.0, limlst=200)[0]
    return re, im


def _custom_integral(nu: Custom, z: float) -> complex:
    if z == 0:
        return 0.0
    f = lambda x: float(nu.density(np.array([x]))[0])
    re = im = 0.0
    for lo, hi in ((-1.0, 0.0), (0.0, 1.0)):
        re += _quad(lambda x: _expm1_comp(x * z).real * f(x), lo, hi)
        im += _quad(lambda x: _expm1_comp(x * z).imag * f(x), lo, hi)
    for sgn in (1.0, -1.0):
        g = lambda x: f(sgn * x)
        mass = _quad(g, 1.0, np.inf)
        if mass == 0.0:
            continue
        c = integrate.quad(g, 1.0, np.inf, weight="cos", wvar=abs(z), limlst=200)[0]
        s = integrate.quad(g, 1.0, np.inf, weight="sin", wvar=abs(z), limlst=200)[0]
        re += c - mass
        im += sgn * math.copysign(1.0, z) * s
    return complex(re, im)


def jump_integral(nu: LevyMeasure, z) -> np.ndarray:
    """``int (e^{ixz} - 1 - ixz 1_{|x|<=1}) nu(dx)`` for each entry of ``z``."""
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    if isinstance(nu, Composite):
        return sum((jump_integral(p, z) for p in nu.parts), np.zeros(z.shape, complex))
    if isinstance(nu, FiniteAtomic):
        out = np.zeros(flat.shape, complex)
        for x, m in nu.atoms:
            out += m * (_expm1_comp(x * flat) if abs(x) <= 1 else np.exp(1j * x * flat) - 1.0)
        return out.reshape(z.shape)
    if isinstance(nu, GaussianDensity):
        return (nu.mass * np.expm1(-0.5 * (nu.scale * z) ** 2)).astype(complex)
    if isinstance(nu, ParetoTail):
        cache = {}
        vals = np.empty(flat.shape)
        for i, a in enumerate(np.abs(flat)):
            if a not in cache:
                cache[a] = nu.mass * nu.beta * _pareto_cos_integral(nu.beta, float(a))
            vals[i] = cache[a]
        return vals.reshape(z.shape).astype(complex)
    if isinstance(nu, LogSquaredTail):
        return np.array([nu.mass * _logsq_integral(float(a)) for a in flat], complex).reshape(z.shape)
    if isinstance(nu, Custom):
        return np.array([_custom_integral(nu, float(a)) for a in flat], complex).reshape(z.shape)
    raise TypeError(f"no Lévy symbol for {type(nu).__name__}")


def levy_symbol(triplet: LevyTriplet, z):
    """``psi(z)``; scalar in, complex out, or elementwise on arrays."""
    za = np.asarray(z, dtype=float)
    out = 1j * triplet.gamma * za - 0.5 * triplet.sigma ** 2 * za ** 2 + jump_integral(triplet.nu, za)
    return complex(out) if np.ndim(z) == 0 else out


def _box(phi, stretch: float = 2.0):
    """Integration box on ``R_+^d``; unbounded windows are stretched to follow ``|psi(phi)|``."""
    out = []
    for i, (lo, hi) in enumerate(phi.box()):
        terms = phi.terms if isinstance(phi, Combination) else (phi,)
        compact = all(is_compact(t.factors[i]) for t in terms)
        if not compact:
            hi = hi * stretch
        out.append((max(lo, 0.0), max(hi, 0.0)))
    return out


def _require_pam(triplet, phi):
    if not phi.compact:
        v = classify_pam(triplet.nu, PAM_GRID)
        if v.has_pam is not True:
            raise ValueError(f"test function with unbounded support needs a PAM Lévy measure ({v.label})")


def functional_log(triplet: LevyTriplet, phi, panels: int = 64) -> complex:
    """``int_{R_+^d} psi(phi(t)) dt``.

    One-dimensional: adaptive quadrature on each component. Higher
    dimension: tensor Gauss–Legendre with ``panels`` x 16 nodes per axis.
    """
    phi = as_test_function(phi)
    _require_pam(triplet, phi)
    box = _box(phi)
    if any(hi <= lo for lo, hi in box):
        return 0j
    if phi.dim == 1:
        lo, hi = box[0]
        g = lambda t: levy_symbol(triplet, float(phi(np.array([t]))[0]))
        pts = np.linspace(lo, hi, 17)[1:-1]
        re = _quad(lambda t: g(t).real, lo, hi, points=pts)
        im = _quad(lambda t: g(t).imag, lo, hi, points=pts)
        return complex(re, im)
    nodes, weights = _GL
    axes, wts = [], []
    for lo, hi in box:
        e = np.linspace(lo, hi, panels + 1)
        mid, half = 0.5 * (e[:-1] + e[1:]), 0.5 * (e[1:] - e[:-1])
        axes.append((mid[:, None] + half[:, None] * nodes).ravel())
        wts.append((half[:, None] * weights).ravel())
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w = wts[0]
    for x in wts[1:]:
        w = np.multiply.outer(w, x)
    vals = phi(mesh)
    uniq, inv = np.unique(np.round(vals, 15), return_inverse=True)
    psi = levy_symbol(triplet, uniq)[inv].reshape(vals.shape)
    return complex(np.sum(w * psi))


def characteristic_functional(triplet: LevyTriplet, phi) -> complex:
    return complex(np.exp(functional_log(triplet, phi)))


def _l2_pos(phi, box):
    nodes, weights = _GL
    total = 0.0
    terms = phi.terms if isinstance(phi, Combination) else (phi,)
    # cross terms of a combination: integrate the full square on a tensor grid
    axes, wts = [], []
    for lo, hi in box:
        e = np.linspace(lo, hi, 257)
        mid, half = 0.5 * (e[:-1] + e[1:]), 0.5 * (e[1:] - e[:-1])
        axes.append((mid[:, None] + half[:, None] * nodes).ravel())
        wts.append((half[:, None] * weights).ravel())
    if len(terms) == 1:
        t = terms[0]
        total = t.coef ** 2
        for f, x, w in zip(t.factors, axes, wts):
            total *= float(np.sum(w * f(x) ** 2))
        return total
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    w = wts[0]
    for x in wts[1:]:
        w = np.multiply.outer(w, x)
    return float(np.sum(w * phi(mesh) ** 2))


def sample_noise_pairings(triplet: LevyTriplet, phi, n: int, seed: int) -> np.ndarray:
    """``n`` independent draws of ``<X', phi>`` from its exact law.

    ``A2`` is drawn as ``N(0, int phi^2)``; jumps (large, and small band by
    band) are Poisson points on the integration box with exact sizes.
    Replicate ``j`` only depends on ``(seed, j)``.
    """
    phi = as_test_function(phi)
    _require_pam(triplet, phi)
    box = _box(phi)
    vol = math.prod(hi - lo for lo, hi in box)
    lo_v = np.array([b[0] for b in box])
    span = np.array([b[1] - b[0] for b in box])
    A1 = phi.integral_pos()[0]
    nu = triplet.nu
    sd = triplet.sigma * math.sqrt(_l2_pos(phi, box)) if triplet.sigma > 0 else 0.0
    lam = nu.large_jump_mass()
    bands = []
    if nu.small_second_moment() > 0:
        from .sheet_sim import band_count, DEFAULT_EPS
        bands = [k for k in range(band_count(DEFAULT_EPS)) if nu.band_mass(k) > 0]
    comp = sum(nu.band_mean(k) for k in bands)
    out = np.empty(n)
    for start, stop, _ in chunk_rngs(seed, n):
        c = start // CHUNK
        vals = np.full(CHUNK, (triplet.gamma - comp) * A1)
        if sd > 0:
            vals += sd * derive_rng(seed, BROWNIAN, c).standard_normal(CHUNK)
        sources = [(lam, derive_rng(seed, LARGE_JUMPS, c), nu.sample_large)] if lam > 0 else []
        for k in bands:
            sources.append((nu.band_mass(k), derive_rng(seed, SMALL_JUMPS, k, c),
                            lambda r, m, _k=k: nu.sample_band(_k, r, m)))
        for rate, rng, draw in sources:
            counts = rng.poisson(rate * vol, CHUNK)
            total = int(counts.sum())
            if total == 0:
                continue
            pos = lo_v + rng.random((total, len(box))) * span
            y = draw(rng, total)
            owner = np.repeat(np.arange(CHUNK), counts)
            contrib = y * phi(pos)
            contrib[~np.isfinite(contrib)] = np.nan
            vals += np.bincount(owner, weights=contrib, minlength=CHUNK)
        out[start:stop] = vals[: stop - start]
    return out


def mc_char_functional(triplet: LevyTriplet, phi, N: int, seed: int):
    """Monte-Carlo ``E exp(i <X', phi>)`` and its componentwise standard error."""
    if N < 1000:
        raise ValueError(f"N must be >= 1000, got {N}")
    v = sample_noise_pairings(triplet, phi, N, seed)
    e = np.exp(1j * v)
    mean = complex(e.mean())
    se = complex(e.real.std(ddof=1) / math.sqrt(N), e.imag.std(ddof=1) / math.sqrt(N))
    return mean, se
