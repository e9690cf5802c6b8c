"""Test functions, Schwartz seminorms, bump families and antiderivative operators.

One-dimensional building blocks derive from :class:`Fn1D`. Functions on
``R^d`` are :class:`Tensor` products of 1-d factors or finite
:class:`Combination` sums of tensors. Everything is immutable and evaluation
is vectorized over numpy arrays.

Seminorms follow ``N_p(phi) = sum_{|alpha|,|beta| <= p} sup |t^alpha phi^(beta)(t)|``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import Optional, Sequence

import numpy as np
from numpy.polynomial import Polynomial
from scipy import integrate, optimize, special

P_MAX = 6
# derivatives up to this order are available internally (certificate slack needs p+1)
ORDER_LIMIT = P_MAX + 4
WINDOW_TOL = 1e-13
GRID_POINTS = 2 ** 14

__all__ = [
    "P_MAX", "Fn1D", "PolyGaussian", "Mollifier", "Affine", "Cumulative1D", "SmoothStep",
    "Antiderivative", "Derivative1D", "Product1D", "TailIntegral1D", "Tensor", "Combination",
    "SeminormEstimate", "seminorm", "bump_family_1d", "bump_family_dd", "antiderivative_I",
    "tensor_I_d", "tail_integral_Phi", "cutoff_theta_dd", "gaussian", "hermite", "mollifier",
    "multi_indices", "np2_constant", "grando_constant", "iphi_constant", "phi_tail_constant",
    "from_id",
]


def _arr(t):
    return np.asarray(t, dtype=float)


def _check_order(k, limit=ORDER_LIMIT):
    if k < 0 or k > limit:
        raise ValueError(f"derivative order {k} outside [0, {limit}]")


# ---------------------------------------------------------------------------
# one-dimensional functions


class Fn1D:
    """Smooth function on ``R`` with derivatives, limits and integrals."""

    #: ``(lo, hi)``, possibly with infinite ends, outside which f vanishes; None for the whole line
    support: Optional[tuple] = None
    #: True when the function and all its derivatives decay faster than any power
    schwartz: bool = True

    def deriv(self, k: int, t):
        raise NotImplementedError

    def __call__(self, t):
        return self.deriv(0, t)

    def limits(self, k: int = 0) -> tuple:
        """``(f^(k)(-inf), f^(k)(+inf))``."""
        return (0.0, 0.0)

    def cumulative(self, t):
        """``int_{-inf}^t f``."""
        raise NotImplementedError(f"{type(self).__name__} has no cumulative integral")

    def upper(self, t):
        """``int_t^inf f``."""
        raise NotImplementedError(f"{type(self).__name__} has no upper tail integral")

    def total(self) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no total integral")

    def window(self) -> tuple:
        """Finite interval outside which every derivative sits at its limit up to ``WINDOW_TOL``."""
        raise NotImplementedError

    def cert(self, a: int, b: int) -> Optional[float]:
        """Analytic bound on ``sup |t^a f^(b)(t)|``, or None when only a numeric one exists."""
        return None

    # -- arithmetic convenience ---------------------------------------------
    def derivative(self, j: int = 1) -> "Fn1D":
        return Derivative1D(self, j)

    def weighted(self, a: int, b: int, t):
        t = _arr(t)
        return t ** a * self.deriv(b, t)

    def sup_abs(self, a: int, b: int, n: int = GRID_POINTS, polish: bool = True) -> float:
        """Grid maximum of ``|t^a f^(b)|`` over :meth:`window`, optionally polished by Brent."""
        lo, hi = self.window()
        t = np.linspace(lo, hi, n + 1)
        v = np.abs(self.weighted(a, b, t))
        i = int(np.argmax(v))
        best = float(v[i])
        if polish and best > 0:
            l, r = t[max(i - 1, 0)], t[min(i + 1, n)]
            res = optimize.minimize_scalar(lambda s: -abs(float(self.weighted(a, b, np.array([s]))[0])),
                                           bounds=(l, r), method="bounded",
                                           options={"xatol": 1e-12 * max(1.0, abs(l))})
            best = max(best, -float(res.fun))
        return best

    def sup_cert(self, a: int, b: int, n: int = GRID_POINTS) -> float:
        """Upper bound on ``sup |t^a f^(b)|``.

        Analytic when :meth:`cert` provides one; otherwise the grid maximum
        plus a Lipschitz slack ``h/2 * sup |(t^a f^(b))'|`` (itself taken on
        the grid and doubled) plus the tail allowance ``WINDOW_TOL``.
        """
        c = self.cert(a, b)
        if c is not None:
            return c
        lo, hi = self.window()
        t = np.linspace(lo, hi, n + 1)
        h = (hi - lo) / n
        g = np.abs(self.weighted(a, b, t))
        dg = np.abs(self.weighted(a, b + 1, t))
        if a > 0:
            dg = dg + a * np.abs(t ** (a - 1) * self.deriv(b, t))
        return float(g.max() + h * dg.max() + WINDOW_TOL)

    def tail_radius(self, a: int, b: int, tol: float) -> Optional[float]:
        """Radius beyond which ``|t^a f^(b)| < tol`` according to the certificates."""
        best = None
        for m in range(2, 61, 2):
            c = self.cert(a + m, b)
            if c is None:
                return None
            r = (c / tol) ** (1.0 / m)
            best = r if best is None else min(best, r)
        return best


def is_compact(f: Fn1D) -> bool:
    s = f.support
    return s is not None and math.isfinite(s[0]) and math.isfinite(s[1])


def _meet(s1, s2):
    if s1 is None:
        return s2
    if s2 is None:
        return s1
    lo, hi = max(s1[0], s2[0]), min(s1[1], s2[1])
    return (lo, max(lo, hi))


def _hull(*ivs):
    return (min(i[0] for i in ivs), max(i[1] for i in ivs))


@dataclass(frozen=True)
class PolyGaussian(Fn1D):
    """``p(t) exp(-t^2/2)`` for a polynomial ``p`` given by ascending coefficients."""

    coeffs: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs) or (0.0,))

    @cached_property
    def _polys(self):
        # p_{k+1} = p_k' - t p_k
        out = [Polynomial(self.coeffs)]
        t = Polynomial([0.0, 1.0])
        for _ in range(ORDER_LIMIT + 60):
            out.append(out[-1].deriv() - t * out[-1])
        return out

    def deriv(self, k, t):
        _check_order(k, ORDER_LIMIT + 60)
        t = _arr(t)
        return self._polys[k](t) * np.exp(-0.5 * t * t)

    def derivative(self, j=1):
        return PolyGaussian(tuple(self._polys[j].coef))

    @cached_property
    def _antider(self):
        # p = q' - t q + c  =>  int_{-inf}^t p e^{-s^2/2} = q(t) e^{-t^2/2} + c sqrt(2 pi) Phi(t)
        p = list(self.coeffs)
        n = len(p) - 1
        if n == 0:
            return Polynomial([0.0]), p[0]
        q = [0.0] * (n + 1)
        q[n - 1] = -p[n]
        for j in range(n - 1, 0, -1):
            q[j - 1] = (j + 1) * q[j + 1] - p[j]
        c = p[0] - q[1]
        return Polynomial(q[:n]), c

    def cumulative(self, t):
        t = _arr(t)
        q, c = self._antider
        return q(t) * np.exp(-0.5 * t * t) + c * math.sqrt(2 * math.pi) * special.ndtr(t)

    def upper(self, t):
        t = _arr(t)
        q, c = self._antider
        return -q(t) * np.exp(-0.5 * t * t) + c * math.sqrt(2 * math.pi) * special.ndtr(-t)

    def total(self):
        return self._antider[1] * math.sqrt(2 * math.pi)

    def cert(self, a, b):
        # sup |t^j e^{-t^2/2}| = (j/e)^{j/2}
        poly = (Polynomial([0.0] * a + [1.0]) * self._polys[b]).coef
        return float(sum(abs(c) * ((j / math.e) ** (j / 2) if j else 1.0) for j, c in enumerate(poly)))

    @cached_property
    def _window(self):
        r = max(self.tail_radius(a, b, WINDOW_TOL) for a in range(P_MAX + 1) for b in range(P_MAX + 2))
        return (-r, r)

    def window(self):
        return self._window


def gaussian() -> PolyGaussian:
    return PolyGaussian((1.0,))


def hermite(k: int) -> PolyGaussian:
    """Probabilists' Hermite function ``He_k(t) exp(-t^2/2)``."""
    if k < 0:
        raise ValueError("hermite order must be >= 0")
    return PolyGaussian(tuple(special.hermitenorm(k).coef[::-1]))


# -- the standard mollifier ---------------------------------------------------

_GL16 = np.polynomial.legendre.leggauss(16)
_MOLL_PANELS = 4096


@lru_cache(maxsize=None)
def _moll_polys(k):
    # f^(k) = P_k / q^{2k} * exp(-1/q),  q = x - x^2
    if k == 0:
        return Polynomial([1.0])
    q = Polynomial([0.0, 1.0, -1.0])
    dq = q.deriv()
    P = _moll_polys(k - 1)
    j = k - 1
    return P.deriv() * q * q - 2 * j * P * q * dq + P * dq


def _moll_raw(k, x):
    x = _arr(x)
    out = np.zeros_like(x)
    m = (x > 0) & (x < 1)
    xm = x[m]
    q = xm - xm * xm
    with np.errstate(under="ignore"):
        out[m] = _moll_polys(k)(xm) * np.exp(-1.0 / q - 2 * k * np.log(q))
    return out


def _gl_panels(f, edges):
    nodes, weights = _GL16
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    return (f(x.ravel()).reshape(x.shape) * weights[None, :]).sum(axis=1) * half


@lru_cache(maxsize=1)
def _moll_table():
    edges = np.linspace(0.0, 1.0, _MOLL_PANELS + 1)
    pieces = _gl_panels(lambda x: _moll_raw(0, x), edges)
    cum = np.concatenate([[0.0], np.cumsum(pieces)])
    return edges, cum / cum[-1], float(cum[-1])


@dataclass(frozen=True)
class Mollifier(Fn1D):
    """``exp(-1/(x(1-x)))`` on ``(0, 1)``, normalized to unit integral."""

    support = (0.0, 1.0)

    @property
    def norm(self) -> float:
        return _moll_table()[2]

    def deriv(self, k, t):
        _check_order(k, 40)
        return _moll_raw(k, t) / self.norm

    def cumulative(self, t):
        t = _arr(t)
        edges, cum, _ = _moll_table()
        out = np.where(t >= 1.0, 1.0, 0.0)
        m = (t > 0) & (t < 1)
        if m.any():
            x = t[m]
            j = np.minimum((x * _MOLL_PANELS).astype(int), _MOLL_PANELS - 1)
            a = edges[j]
            nodes, weights = _GL16
            half = 0.5 * (x - a)
            pts = (a + half)[:, None] + half[:, None] * nodes[None, :]
            part = (_moll_raw(0, pts.ravel()).reshape(pts.shape) * weights).sum(axis=1) * half / self.norm
            out[m] = cum[j] + part
        return out

    def upper(self, t):
        t = _arr(t)
        return np.where(t <= 0.0, 1.0, 1.0 - self.cumulative(t))

    def total(self):
        return 1.0

    def window(self):
        return (0.0, 1.0)


def mollifier() -> Mollifier:
    return Mollifier()


@dataclass(frozen=True)
class Affine(Fn1D):
    """``amp * base(scale * (t - shift))`` with ``scale > 0``."""

    base: Fn1D
    shift: float = 0.0
    scale: float = 1.0
    amp: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")

    def _u(self, t):
        return self.scale * (_arr(t) - self.shift)

    @property
    def support(self):
        s = self.base.support
        return None if s is None else (self.shift + s[0] / self.scale, self.shift + s[1] / self.scale)

    @property
    def schwartz(self):
        return self.base.schwartz

    def deriv(self, k, t):
        return self.amp * self.scale ** k * self.base.deriv(k, self._u(t))

    def limits(self, k=0):
        lo, hi = self.base.limits(k)
        return (self.amp * self.scale ** k * lo, self.amp * self.scale ** k * hi)

    def cumulative(self, t):
        return self.amp / self.scale * self.base.cumulative(self._u(t))

    def upper(self, t):
        return self.amp / self.scale * self.base.upper(self._u(t))

    def total(self):
        return self.amp / self.scale * self.base.total()

    def window(self):
        lo, hi = self.base.window()
        return (self.shift + lo / self.scale, self.shift + hi / self.scale)

    def cert(self, a, b):
        # t = shift + u/scale;  |t|^a <= sum_j C(a,j) |shift|^{a-j} scale^{-j} |u|^j
        total = 0.0
        for j in range(a + 1):
            c = self.base.cert(j, b)
            if c is None:
                c = self.base.sup_cert(j, b)
            total += math.comb(a, j) * abs(self.shift) ** (a - j) * self.scale ** (-j) * c
        return abs(self.amp) * self.scale ** b * total


@dataclass(frozen=True)
class Cumulative1D(Fn1D):
    """``F(t) = int_{-inf}^t f``; not Schwartz unless ``int f = 0``."""

    f: Fn1D
    schwartz = False

    @property
    def support(self):
        s = self.f.support
        return None if s is None else (s[0], math.inf)

    def deriv(self, k, t):
        return self.f.cumulative(t) if k == 0 else self.f.deriv(k - 1, t)

    def limits(self, k=0):
        return (0.0, self.f.total()) if k == 0 else self.f.limits(k - 1)

    def window(self):
        return self.f.window()


def SmoothStep(lo: float = -1.0, hi: float = -0.5) -> Cumulative1D:
    """Smooth step equal to 0 on ``(-inf, lo]`` and 1 on ``[hi, inf)``: the rescaled mollifier integral."""
    if not hi > lo:
        raise ValueError("need hi > lo")
    w = hi - lo
    return Cumulative1D(Affine(Mollifier(), lo, 1.0 / w, 1.0 / w))


def _is_cutoff(theta: Fn1D) -> None:
    s = theta.support
    if not is_compact(theta) or s[0] < 0.0 or s[1] > 1.0:
        raise ValueError("theta must be supported in [0, 1]")
    if abs(theta.total() - 1.0) > 1e-9:
        raise ValueError(f"theta must have unit integral, got {theta.total()}")
    lo, hi = s
    grid = np.linspace(lo, hi, 4097)
    if np.min(theta(grid)) < 0:
        raise ValueError("theta must be non-negative")


@dataclass(frozen=True)
class Antiderivative(Fn1D):
    """``I f(t) = int_{-inf}^t (f(s) - theta(s) int f) ds``: a Schwartz antiderivative."""

    f: Fn1D
    theta: Fn1D

    def __post_init__(self):
        _is_cutoff(self.theta)

    @cached_property
    def mass(self) -> float:
        return float(self.f.total())

    @property
    def support(self):
        return _hull(self.f.support, self.theta.support) if is_compact(self.f) else None

    def deriv(self, k, t):
        t = _arr(t)
        if k > 0:
            return self.f.deriv(k - 1, t) - self.mass * self.theta.deriv(k - 1, t)
        right = t >= self.theta.support[1]
        out = np.empty_like(t)
        # right of theta's support, I f = -int_t^inf f; this avoids cancellation
        out[right] = -self.f.upper(t[right])
        tl = t[~right]
        out[~right] = self.f.cumulative(tl) - self.mass * self.theta.cumulative(tl)
        return out

    def cumulative(self, t):
        raise NotImplementedError("cumulative integral of I f is not provided")

    def window(self):
        return _hull(self.f.window(), self.theta.support)


@dataclass(frozen=True)
class Derivative1D(Fn1D):
    """``f^(j)``; its integrals come exactly from ``f^(j-1)`` and the limits."""

    f: Fn1D
    j: int = 1

    def __post_init__(self):
        if self.j < 1:
            raise ValueError("derivative order must be >= 1")

    @property
    def support(self):
        return self.f.support

    def deriv(self, k, t):
        return self.f.deriv(k + self.j, t)

    def limits(self, k=0):
        return self.f.limits(k + self.j)

    def cumulative(self, t):
        return self.f.deriv(self.j - 1, t) - self.f.limits(self.j - 1)[0]

    def upper(self, t):
        return self.f.limits(self.j - 1)[1] - self.f.deriv(self.j - 1, t)

    def total(self):
        lo, hi = self.f.limits(self.j - 1)
        return hi - lo

    def window(self):
        return self.f.window()

    def cert(self, a, b):
        return self.f.cert(a, b + self.j)


@dataclass(frozen=True)
class Product1D(Fn1D):
    """Pointwise product; derivatives by the Leibniz rule."""

    f: Fn1D
    g: Fn1D

    @property
    def schwartz(self):
        return self.f.schwartz or self.g.schwartz or is_compact(self)

    @property
    def support(self):
        return _meet(self.f.support, self.g.support)

    def deriv(self, k, t):
        t = _arr(t)
        return sum(math.comb(k, i) * self.f.deriv(i, t) * self.g.deriv(k - i, t) for i in range(k + 1))

    def limits(self, k=0):
        out = [0.0, 0.0]
        for side in (0, 1):
            out[side] = sum(math.comb(k, i) * self.f.limits(i)[side] * self.g.limits(k - i)[side]
                            for i in range(k + 1))
        return tuple(out)

    def window(self):
        if is_compact(self):
            return self.support
        ws = [h.window() for h in (self.f, self.g) if h.schwartz]
        if not ws:
            return _hull(self.f.window(), self.g.window())
        lo = max(w[0] for w in ws)
        hi = min(w[1] for w in ws)
        return (lo, max(lo, hi))

    def _quad(self, a, b):
        v, _ = integrate.quad(lambda s: float(self(np.array([s]))[0]), a, b, limit=400,
                              epsabs=1e-14, epsrel=1e-12)
        return v

    def cumulative(self, t):
        lo, _ = self.window()
        return np.array([self._quad(lo, s) if s > lo else 0.0 for s in np.atleast_1d(_arr(t))])

    def upper(self, t):
        _, hi = self.window()
        return np.array([self._quad(s, hi) if s < hi else 0.0 for s in np.atleast_1d(_arr(t))])

    def total(self):
        return self._quad(*self.window())


@dataclass(frozen=True)
class TailIntegral1D(Fn1D):
    """``Phi(t) = int_t^inf f``: smooth and bounded, but not Schwartz."""

    f: Fn1D
    schwartz = False

    @property
    def support(self):
        s = self.f.support
        return None if s is None else (-math.inf, s[1])

    def deriv(self, k, t):
        return self.f.upper(t) if k == 0 else -self.f.deriv(k - 1, t)

    def limits(self, k=0):
        if k == 0:
            return (self.f.total(), 0.0)
        lo, hi = self.f.limits(k - 1)
        return (-lo, -hi)

    def window(self):
        return self.f.window()


# ---------------------------------------------------------------------------
# d-dimensional test functions


def multi_indices(d: int, p: int):
    """All ``alpha`` in ``N^d`` with ``|alpha| <= p``."""
    return [a for a in itertools.product(range(p + 1), repeat=d) if sum(a) <= p]


class TestFunction:
    """Interface shared by :class:`Tensor` and :class:`Combination`."""

    __test__ = False  # not a pytest class
    dim: int

    def deriv(self, beta, pts):
        raise NotImplementedError

    def __call__(self, pts):
        return self.deriv((0,) * self.dim, pts)

    def _pts(self, pts):
        pts = _arr(pts)
        if self.dim == 1 and (pts.ndim < 2 or pts.shape[-1] != 1):
            pts = pts[..., None]
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points must have trailing dimension {self.dim}")
        return pts

    def __add__(self, other):
        return Combination(tuple(_terms(self) + _terms(other)))

    def __rmul__(self, c):
        return Combination(tuple(Tensor(t.factors, c * t.coef) for t in _terms(self)))

    def __neg__(self):
        return (-1.0) * self

    def __sub__(self, other):
        return self + (-1.0) * other


def _terms(f):
    return list(f.terms) if isinstance(f, Combination) else [f]


@dataclass(frozen=True)
class Tensor(TestFunction):
    """``coef * f_1(t_1) * ... * f_d(t_d)``."""

    factors: tuple
    coef: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("a tensor needs at least one factor")

    @property
    def dim(self):
        return len(self.factors)

    @property
    def terms(self):
        return (self,)

    def deriv(self, beta, pts):
        pts = self._pts(pts)
        out = np.full(pts.shape[:-1], float(self.coef))
        for i, f in enumerate(self.factors):
            out = out * f.deriv(beta[i], pts[..., i])
        return out

    def on_grid(self, axes: Sequence[np.ndarray], beta=None) -> np.ndarray:
        """Values on the tensor grid ``axes[0] x ... x axes[d-1]``."""
        beta = beta or (0,) * self.dim
        vecs = [f.deriv(b, ax) for f, b, ax in zip(self.factors, beta, axes)]
        out = self.coef * vecs[0]
        for v in vecs[1:]:
            out = np.multiply.outer(out, v)
        return out

    def axis_vectors(self, axes, beta=None):
        beta = beta or (0,) * self.dim
        return [f.deriv(b, ax) for f, b, ax in zip(self.factors, beta, axes)]

    def mixed_derivative(self) -> "Tensor":
        """``d^d / dt_1 ... dt_d``."""
        return Tensor(tuple(f.derivative(1) for f in self.factors), self.coef)

    def upper_tail(self, pts):
        """``Phi(t) = int_{[t, inf)} phi``."""
        pts = self._pts(pts)
        out = np.full(pts.shape[:-1], float(self.coef))
        for i, f in enumerate(self.factors):
            out = out * f.upper(pts[..., i])
        return out

    def box(self):
        """Per-axis windows: outside this box every term is negligible or at its limit."""
        return [f.window() for f in self.factors]

    @property
    def compact(self) -> bool:
        return all(is_compact(f) for f in self.factors)

    def integral_pos(self, weights=None):
        """``int_{R_+^d} w(t) phi(t) dt`` with per-axis monomial weights ``t_i^{weights_i}``.

        Returns ``(value, abs_error)``.
        """
        weights = weights or (0,) * self.dim
        val, err = float(self.coef), 0.0
        for f, w in zip(self.factors, weights):
            v, e = _quad_pos(f, w)
            err = abs(val) * e + abs(v) * err + e * err
            val *= v
        return val, err


def _quad_pos(f: Fn1D, w: int):
    lo, hi = f.window()
    lo = max(lo, 0.0)
    if hi <= lo:
        return 0.0, 0.0
    if w == 0 and is_compact(f):
        # exact route through the tail integral where available
        try:
            return float(f.upper(np.array([lo]))[0]) - float(f.upper(np.array([hi]))[0]), 1e-15
        except NotImplementedError:
            pass
    g = lambda s: s ** w * float(f(np.array([s]))[0])
    pts = np.linspace(lo, hi, 9)[1:-1]
    # full_output keeps quad from touching the (process-global) warning filters
    v, e, info, *msg = integrate.quad(g, lo, hi, points=pts, limit=500, epsabs=1e-15, epsrel=1e-13, full_output=1)
    if not msg:
        return v, e
    # the strict request hit roundoff: widen the error by the disagreement with a default-tolerance run
    v2, e2, *_ = integrate.quad(g, lo, hi, points=pts, limit=500, full_output=1)
    return v, max(e, e2, abs(v - v2))


@dataclass(frozen=True)
class Combination(TestFunction):
    """Finite sum of tensors of equal dimension."""

    terms: tuple

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("empty combination")
        if len({t.dim for t in self.terms}) != 1:
            raise ValueError("all terms must share one dimension")

    @property
    def dim(self):
        return self.terms[0].dim

    def deriv(self, beta, pts):
        return sum(t.deriv(beta, pts) for t in self.terms)

    def on_grid(self, axes, beta=None):
        return sum(t.on_grid(axes, beta) for t in self.terms)

    def mixed_derivative(self):
        return Combination(tuple(t.mixed_derivative() for t in self.terms))

    def upper_tail(self, pts):
        return sum(t.upper_tail(pts) for t in self.terms)

    def box(self):
        boxes = [t.box() for t in self.terms]
        return [_hull(*[b[i] for b in boxes]) for i in range(self.dim)]

    @property
    def compact(self):
        return all(t.compact for t in self.terms)

    def integral_pos(self, weights=None):
        vals = [t.integral_pos(weights) for t in self.terms]
        return sum(v for v, _ in vals), sum(e for _, e in vals)


def as_test_function(phi) -> TestFunction:
    if isinstance(phi, TestFunction):
        return phi
    if isinstance(phi, Fn1D):
        return Tensor((phi,))
    raise TypeError(f"not a test function: {phi!r}")


# ---------------------------------------------------------------------------
# seminorms


@dataclass(frozen=True)
class SeminormEstimate:
    p: int
    lower: float
    upper: float
    grid: str

    def __post_init__(self):
        if not 0 <= self.lower <= self.upper * (1 + 1e-12) + 1e-300:
            raise ValueError(f"inconsistent seminorm estimate {self.lower} > {self.upper}")


def _axis_tables(f: Fn1D, p: int, n: int):
    low = np.zeros((p + 1, p + 1))
    up = np.zeros((p + 1, p + 1))
    for a in range(p + 1):
        for b in range(p + 1):
            low[a, b] = f.sup_abs(a, b, n)
            up[a, b] = max(f.sup_cert(a, b, n), low[a, b])
    return low, up


def seminorm(phi, p: int, resolution: int = GRID_POINTS) -> SeminormEstimate:
    """Lower (grid) and upper (certificate) estimates of ``N_p(phi)``.

    For tensors the supremum factorizes over axes, so each table entry is a
    1-d sup on ``resolution + 1`` points. Combinations fall back to a joint
    grid with ``resolution ** (1/d)`` points per axis and no certificate
    beyond the triangle inequality over terms.
    """
    if p < 0 or p > P_MAX:
        raise ValueError(f"p must lie in [0, {P_MAX}], got {p}")
    phi = as_test_function(phi)
    for f in (fac for t in _terms(phi) for fac in t.factors):
        if not f.schwartz:
            raise ValueError(f"{type(f).__name__} is not a Schwartz function; seminorms are undefined")
    d = phi.dim
    idx = multi_indices(d, p)
    if isinstance(phi, Tensor) or len(phi.terms) == 1:
        t = _terms(phi)[0]
        tabs = [_axis_tables(f, p, resolution) for f in t.factors]
        lower = upper = 0.0
        for al in idx:
            for be in idx:
                lower += abs(t.coef) * math.prod(tabs[i][0][al[i], be[i]] for i in range(d))
                upper += abs(t.coef) * math.prod(tabs[i][1][al[i], be[i]] for i in range(d))
        return SeminormEstimate(p, lower, upper, f"tensor {resolution + 1}/axis")
    m = max(int(round(resolution ** (1.0 / d))), 16)
    axes = [np.linspace(lo, hi, m + 1) for lo, hi in phi.box()]
    mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
    lower = 0.0
    for be in idx:
        vals = np.abs(phi.deriv(be, mesh))
        for al in idx:
            lower += float(np.max(vals * np.prod(np.abs(mesh) ** np.array(al), axis=-1)))
    upper = sum(seminorm(t, p, resolution).upper for t in phi.terms)
    return SeminormEstimate(p, lower, max(upper, lower), f"joint {m + 1}^{d}")


# ---------------------------------------------------------------------------
# operators and families


def bump_family_1d(S_n: float, k: int, base: Optional[Fn1D] = None) -> Affine:
    """``phi_n(t) = S_n^k phi((t - S_n) S_n^k)``, supported in ``[S_n, S_n + S_n^-k]``."""
    if not S_n > 0:
        raise ValueError(f"S_n must be > 0, got {S_n}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    base = base or Mollifier()
    _check_base(base)
    s = float(S_n) ** k
    return Affine(base, float(S_n), s, s)


def _check_base(base: Fn1D):
    s = base.support
    if not is_compact(base) or s[0] < 0 or s[1] > 1:
        raise ValueError("base function must be supported in [0, 1]")
    if abs(base.total() - 1.0) > 1e-9:
        raise ValueError("base function must have unit integral")


def bump_family_dd(S_n: float, d: int, base: Optional[Fn1D] = None) -> Tensor:
    """``S_n^{3d} phi((t_1-1) S_n^3, ..., (t_d - S_n) S_n^3)`` with a tensor-power base."""
    if not S_n > 0:
        raise ValueError(f"S_n must be > 0, got {S_n}")
    if d < 1:
        raise ValueError("d must be >= 1")
    base = base or Mollifier()
    _check_base(base)
    s = float(S_n) ** 3
    facs = [Affine(base, 1.0, s, s) for _ in range(d - 1)] + [Affine(base, float(S_n), s, s)]
    return Tensor(tuple(facs))


def antiderivative_I(phi: Fn1D, theta: Optional[Fn1D] = None) -> Antiderivative:
    """The operator ``I`` with cutoff ``theta`` (default: the mollifier)."""
    if isinstance(phi, Tensor):
        if phi.dim != 1:
            raise ValueError("antiderivative_I is one-dimensional; use tensor_I_d")
        return Affine(Antiderivative(phi.factors[0], theta or Mollifier()), 0.0, 1.0, phi.coef)
    return Antiderivative(phi, theta or Mollifier())


def tensor_I_d(phi, theta: Optional[Fn1D] = None) -> Tensor:
    """``I_d(phi_1 x ... x phi_d) = (I phi_1) x ... x (I phi_d)``; tensors only."""
    theta = theta or Mollifier()
    if isinstance(phi, Combination):
        if len(phi.terms) != 1:
            raise ValueError("tensor_I_d accepts tensor-product functions only")
        phi = phi.terms[0]
    if isinstance(phi, Fn1D):
        phi = Tensor((phi,))
    if not isinstance(phi, Tensor):
        raise ValueError("tensor_I_d accepts tensor-product functions only")
    return Tensor(tuple(Antiderivative(f, theta) for f in phi.factors), phi.coef)


def tail_integral_Phi(phi) -> Tensor:
    """``Phi(t) = int_{[t, inf)} phi`` as a tensor of 1-d tail integrals."""
    phi = as_test_function(phi)
    if isinstance(phi, Combination):
        return Combination(tuple(tail_integral_Phi(t) for t in phi.terms))
    return Tensor(tuple(TailIntegral1D(f) for f in phi.factors), phi.coef)


def cutoff_theta_dd(d: int) -> Tensor:
    """``theta = 0`` where ``min t_i <= -1`` and ``theta = 1`` where ``min t_i >= -1/2``."""
    if d < 1:
        raise ValueError("d must be >= 1")
    step = SmoothStep(-1.0, -0.5)
    return Tensor(tuple(step for _ in range(d)))


def tensor_product(a: Tensor, b: Tensor) -> Tensor:
    """Pointwise product of two tensors of the same dimension."""
    if a.dim != b.dim:
        raise ValueError("dimension mismatch")
    return Tensor(tuple(Product1D(f, g) for f, g in zip(a.factors, b.factors)), a.coef * b.coef)


# -- explicit constants ----------------------------------------------------------

def np2_constant(p: int) -> float:
    """``C`` with ``N_p(phi_n) <= C N_p(phi) S_n^{(p+1)k+p}`` for ``S_n >= 1``.

    From ``sup |x^a phi_n^(b)| <= (S_n + S_n^-k)^a S_n^{k(b+1)} sup |phi^(b)|``:
    ``(S_n + S_n^-k)^a <= 2^p S_n^p``, and there are ``(p+1)^2`` pairs.
    """
    return (p + 1) ** 2 * 2.0 ** p


def grando_constant(p: int, d: int) -> float:
    """``C'_p`` with ``N_p(phi_n) <= C'_p N_p(phi) S_n^{3d+4p}`` for ``S_n >= 1``.

    Each of the ``comb(p+d, d)^2`` index pairs is bounded by
    ``2^{sum alpha_i} (S_n+1)^{alpha_d} S_n^{3(d+|beta|)} N_p(phi) <= 2^p S_n^{3d+4p} N_p(phi)``.
    """
    return math.comb(p + d, d) ** 2 * 2.0 ** p


def iphi_constant(p: int) -> float:
    """``C_p`` with ``sup |t|^p |I phi(t)| <= C_p N_{p+2}(phi)``.

    ``|s|^p |phi(s)| (1 + s^2) <= N_{p+2}``, so the tail pieces are bounded by
    ``pi N_{p+2}`` and the window ``(0, 1)``, where theta is active, by
    ``2 int |phi| <= 2 pi N_2``.
    """
    if p < 0:
        raise ValueError("p must be >= 0")
    return 2.0 * math.pi


def phi_tail_constant(p: int, d: int) -> float:
    """``C`` with ``sup_{t >= -1} |(1 + |t^alpha|) Phi^(beta)(t)| <= C N_{p+2d}(phi)``.

    Uses the tensorized weight ``prod (1 + u_i^2)``: ``(1 + |t^alpha|)`` is
    dominated by ``1 + prod(1 + |u_i|^{alpha_i})`` with ``u = s + t`` on
    ``t >= -1``, each of the ``1 + 2^d`` monomials times ``prod(1+u_i^2)``
    contributes at most ``2^d N_{p+2d}``, and ``int prod (1+u_i^2)^-1 = pi^d``.
    """
    if p < 0 or d < 1:
        raise ValueError("need p >= 0 and d >= 1")
    return (1 + 2.0 ** d) * 2.0 ** d * math.pi ** d


# -- identifiers -------------------------------------------------------------------

def from_id(name: str, d: int = 1) -> TestFunction:
    """Resolve ``gaussian``, ``hermite-k``, ``mollifier``, ``bump1d:Sn:k`` or ``bump-dd:Sn``.

    One-dimensional identifiers are raised to the ``d``-th tensor power.
    """
    name = name.strip()
    if name.startswith("bump-dd:"):
        return bump_family_dd(float(name.split(":")[1]), d)
    if name == "gaussian":
        f = gaussian()
    elif name.startswith("hermite-"):
        f = hermite(int(name.split("-", 1)[1]))
    elif name == "mollifier":
        f = Mollifier()
    elif name.startswith("bump1d:"):
        parts = name.split(":")
        if len(parts) != 3:
            raise ValueError(f"expected bump1d:Sn:k, got {name!r}")
        f = bump_family_1d(float(parts[1]), int(parts[2]))
    else:
        raise ValueError(f"unknown test function {name!r}")
    return Tensor(tuple(f for _ in range(d)))
