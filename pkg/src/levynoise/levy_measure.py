"""Lévy measures, characteristic triplets and the PAM classification.

Jumps are scalar. The truncation function is fixed to ``1_{|x| <= 1}``: jumps
with ``|x| > 1`` form the compound Poisson part, the rest is split into dyadic
bands ``2^-(n+1) < |x| <= 2^-n`` for the compensated small-jump part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate, special

INF = math.inf

__all__ = [
    "IndeterminateMoment",
    "LevyMeasure",
    "FiniteAtomic",
    "ParetoTail",
    "LogSquaredTail",
    "GaussianDensity",
    "Custom",
    "Composite",
    "LevyTriplet",
    "PamVerdict",
    "tail_moment",
    "classify_pam",
    "sample_large_jump",
    "small_jump_band_variance",
    "band_edges",
    "measure_from_dict",
    "custom_from_expression",
]


class IndeterminateMoment(ArithmeticError):
    """Raised when a tail moment can be neither certified finite nor divergent."""


def band_edges(n: int) -> tuple[float, float]:
    """Edges ``(a, b)`` of the dyadic band ``a < |x| <= b``."""
    if n < 0:
        raise ValueError(f"band index must be >= 0, got {n}")
    return 2.0 ** -(n + 1), 2.0 ** -n


def _quad(f, a, b, **kw):
    kw.setdefault("limit", 400)
    kw.setdefault("epsabs", 1e-14)
    kw.setdefault("epsrel", 1e-12)
    return integrate.quad(f, a, b, **kw)


class LevyMeasure:
    """Base class. Subclasses are frozen dataclasses."""

    family: str = "abstract"

    # -- masses and moments -------------------------------------------------
    def large_jump_mass(self) -> float:
        """``lambda = nu({|x| > 1})``."""
        raise NotImplementedError

    def tail_moment(self, eta: float) -> float:
        raise NotImplementedError

    def small_second_moment(self) -> float:
        """``int_{|x|<=1} x^2 nu(dx)``."""
        raise NotImplementedError

    def band_mass(self, n: int) -> float:
        raise NotImplementedError

    def band_mean(self, n: int) -> float:
        """``int_band x nu(dx)``, the per-unit-volume compensator of band ``n``."""
        raise NotImplementedError

    def band_variance(self, n: int) -> float:
        raise NotImplementedError

    # -- sampling -----------------------------------------------------------
    def sample_large(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def sample_band(self, n: int, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def has_small_jumps(self) -> bool:
        return self.small_second_moment() > 0.0

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __add__(self, other: "LevyMeasure") -> "Composite":
        return Composite(tuple(_parts(self) + _parts(other)))


def _parts(nu: LevyMeasure) -> list:
    return list(nu.parts) if isinstance(nu, Composite) else [nu]


@dataclass(frozen=True)
class FiniteAtomic(LevyMeasure):
    """Finitely many atoms ``(position, mass)``; the empty tuple is the zero measure."""

    atoms: tuple = ()
    family = "atomic"

    def __post_init__(self):
        atoms = tuple((float(x), float(m)) for x, m in self.atoms)
        for x, m in atoms:
            if x == 0.0:
                raise ValueError("atom positions must be non-zero")
            if not m > 0.0:
                raise ValueError(f"atom masses must be positive, got {m}")
        object.__setattr__(self, "atoms", atoms)

    def _select(self, lo: float, hi: float):
        return [(x, m) for x, m in self.atoms if lo < abs(x) <= hi]

    def large_jump_mass(self):
        return sum(m for _, m in self._select(1.0, INF))

    def tail_moment(self, eta):
        return sum(m * abs(x) ** eta for x, m in self._select(1.0, INF))

    def small_second_moment(self):
        return sum(m * x * x for x, m in self._select(0.0, 1.0))

    def band_mass(self, n):
        return sum(m for _, m in self._select(*band_edges(n)))

    def band_mean(self, n):
        return sum(m * x for x, m in self._select(*band_edges(n)))

    def band_variance(self, n):
        return sum(m * x * x for x, m in self._select(*band_edges(n)))

    def _draw(self, atoms, rng, size):
        if not atoms:
            raise ValueError("no atoms in the requested range")
        xs = np.array([x for x, _ in atoms])
        ps = np.array([m for _, m in atoms])
        if len(xs) == 1:
            rng.random(size)  # keep stream consumption independent of atom count
            return np.full(size, xs[0])
        return xs[np.searchsorted(np.cumsum(ps) / ps.sum(), rng.random(size), side="right")]

    def sample_large(self, rng, size):
        return self._draw(self._select(1.0, INF), rng, size)

    def sample_band(self, n, rng, size):
        return self._draw(self._select(*band_edges(n)), rng, size)

    def to_dict(self):
        return {"family": self.family, "atoms": [list(a) for a in self.atoms]}


@dataclass(frozen=True)
class ParetoTail(LevyMeasure):
    """Symmetric Pareto tail: density ``mass * (beta/2) |x|^(-beta-1)`` on ``|x| > 1``.

    ``|Y|`` has CDF ``1 - x^-beta``; moments of order ``eta`` are finite iff ``eta < beta``.
    """

    beta: float
    mass: float = 1.0
    family = "pareto"

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")

    def large_jump_mass(self):
        return float(self.mass)

    def tail_moment(self, eta):
        return self.mass * self.beta / (self.beta - eta) if eta < self.beta else INF

    def small_second_moment(self):
        return 0.0

    def band_mass(self, n):
        return 0.0

    band_mean = band_variance = band_mass

    def sample_large(self, rng, size):
        u = 1.0 - rng.random(size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        return sign * u ** (-1.0 / self.beta)

    def sample_band(self, n, rng, size):
        raise ValueError("ParetoTail has no small jumps")

    def to_dict(self):
        return {"family": self.family, "beta": self.beta, "mass": self.mass}


@dataclass(frozen=True)
class LogSquaredTail(LevyMeasure):
    """Density ``mass / (x log^2 x)`` on ``x > e``: every positive moment is infinite.

    Samples are ``exp(1/U)``; they overflow to ``inf`` for ``U < 1/709``, which
    is the honest float representation of a jump beyond ``1.8e308``.
    """

    mass: float = 1.0
    family = "logsquared"

    def __post_init__(self):
        if not self.mass > 0:
            raise ValueError(f"mass must be > 0, got {self.mass}")

    def large_jump_mass(self):
        return float(self.mass)

    def tail_moment(self, eta):
        return INF

    def small_second_moment(self):
        return 0.0

    def band_mass(self, n):
        return 0.0

    band_mean = band_variance = band_mass

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(x > math.e, 1.0 - 1.0 / np.log(np.maximum(x, math.e)), 0.0)

    def sample_large(self, rng, size):
        u = 1.0 - rng.random(size)
        with np.errstate(over="ignore"):
            return np.exp(1.0 / u)

    def sample_band(self, n, rng, size):
        raise ValueError("LogSquaredTail has no small jumps")

    def to_dict(self):
        return {"family": self.family, "mass": self.mass}


@dataclass(frozen=True)
class GaussianDensity(LevyMeasure):
    """``nu(dx) = mass * N(0, scale^2)(dx)``: a finite, symmetric Lévy measure."""

    scale: float = 1.0
    mass: float = 1.0
    family = "gaussian"

    def __post_init__(self):
        if not self.scale > 0 or not self.mass > 0:
            raise ValueError("scale and mass must be > 0")

    def _prob(self, a, b):
        # P(a < |X| <= b)
        s = self.scale
        return 2.0 * (special.ndtr(-a / s) - special.ndtr(-b / s)) if b < INF else 2.0 * special.ndtr(-a / s)

    def _second(self, a, b):
        # E[X^2 ; a < |X| <= b] = 2 s^2 [ (Phi(v) - v phi(v)) ]_{a/s}^{b/s}
        s = self.scale
        def g(v):
            if v == INF:
                return 1.0
            return special.ndtr(v) - v * math.exp(-0.5 * v * v) / math.sqrt(2 * math.pi)
        return 2.0 * s * s * (g(b / s) - g(a / s))

    def large_jump_mass(self):
        return self.mass * self._prob(1.0, INF)

    def tail_moment(self, eta):
        s = self.scale
        h = 0.5 * (eta + 1.0)
        val = (2 * s * s) ** (eta / 2) / math.sqrt(math.pi) * special.gamma(h) * special.gammaincc(h, 0.5 / (s * s))
        return self.mass * val

    def small_second_moment(self):
        return self.mass * self._second(0.0, 1.0)

    def band_mass(self, n):
        return self.mass * self._prob(*band_edges(n))

    def band_mean(self, n):
        return 0.0

    def band_variance(self, n):
        return self.mass * self._second(*band_edges(n))

    def _draw(self, a, b, rng, size):
        s = self.scale
        u = rng.random(size)
        sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
        # |X| in (a, b] by inverting the upper tail Q(v) = ndtr(-v)
        qa = special.ndtr(-a / s)
        qb = special.ndtr(-b / s) if b < INF else 0.0
        q = qb + u * (qa - qb)
        return sign * (-s * special.ndtri(q))

    def sample_large(self, rng, size):
        return self._draw(1.0, INF, rng, size)

    def sample_band(self, n, rng, size):
        return self._draw(*band_edges(n), rng, size)

    def to_dict(self):
        return {"family": self.family, "scale": self.scale, "mass": self.mass}


@dataclass(frozen=True, eq=False)
class Custom(LevyMeasure):
    """Measure given by a density on ``R \\ {0}``.

    ``density`` must accept numpy arrays. ``tail_oracle(eta)`` may supply the
    analytic value of the tail moment (``inf`` when divergent); without it the
    moment is computed by nested-interval quadrature. ``source`` keeps the
    textual form when built from a configuration expression.
    """

    density: Callable
    tail_oracle: Optional[Callable] = None
    source: Optional[str] = None
    upper: float = 1e12  # table range for large-jump sampling
    family = "custom"

    def _f(self, x):
        return float(self.density(np.array([x], dtype=float))[0])

    def _side_integral(self, g, a, b):
        # int over a < |x| <= b of g(x) density(x), both sides
        val = 0.0
        for sgn in (1.0, -1.0):
            v, _ = _quad(lambda x: g(sgn * x) * self._f(sgn * x), a, b)
            val += v
        return val

    @cached_property
    def _large_mass(self):
        return self._numeric_tail(0.0)

    def large_jump_mass(self):
        return self._large_mass

    def _numeric_tail(self, eta):
        # nested intervals [1, 10^k], k <= 8
        partial = []
        for k in range(1, 9):
            a = 1.0 if k == 1 else 10.0 ** (k - 1)
            inc = 0.0
            for sgn in (1.0, -1.0):
                with np.errstate(all="ignore"):
                    v, err = _quad(lambda x: x ** eta * self._f(sgn * x), a, 10.0 ** k)
                if not np.isfinite(v) or not np.isfinite(err) or err > 1e-6 * max(abs(v), 1.0):
                    raise IndeterminateMoment(
                        f"quadrature failed on [{a:g}, {10.0**k:g}] (value={v}, error={err})")
                inc += v
            partial.append((partial[-1] if partial else 0.0) + inc)
        total = partial[-1]
        if total == 0.0:
            return 0.0
        last = partial[-1] - partial[-2]
        if last >= 0.01 * partial[-2]:
            return INF
        prev = partial[-2] - partial[-3]
        # Aitken / geometric Richardson on the decade increments
        if prev > 0 and 0 <= last < prev:
            r = last / prev
            return total + last * r / (1.0 - r)
        return total

    def tail_moment(self, eta):
        if self.tail_oracle is not None:
            return float(self.tail_oracle(eta))
        return self._numeric_tail(eta)

    def small_second_moment(self):
        total, n = 0.0, 0
        while n < 400:
            v = self.band_variance(n)
            total += v
            if v < 1e-16 * max(total, 1e-300) or (v == 0.0 and n > 60):
                break
            n += 1
        return total

    @cached_property
    def _memo(self):
        # band integrals and sampling tables, keyed by (kind, n); the measure is immutable
        return {}

    def _band(self, kind, n):
        key = (kind, n)
        if key not in self._memo:
            g = {"mass": lambda x: 1.0, "mean": lambda x: x, "variance": lambda x: x * x}[kind]
            self._memo[key] = self._side_integral(g, *band_edges(n))
        return self._memo[key]

    def band_mass(self, n):
        return self._band("mass", n)

    def band_mean(self, n):
        return self._band("mean", n)

    def band_variance(self, n):
        return self._band("variance", n)

    def _table(self, a, b, geometric):
        # CDF tables for both sides on (a, b]; returns list of (sign, xs, cdf, mass)
        out = []
        for sgn in (1.0, -1.0):
            if geometric:
                xs = np.geomspace(a, b, 8001)
            else:
                xs = np.linspace(a, b, 2049)
            fx = np.asarray(self.density(sgn * xs), dtype=float)
            if geometric:
                u = np.log(xs)
                cdf = integrate.cumulative_trapezoid(fx * xs, u, initial=0.0)
            else:
                cdf = integrate.cumulative_simpson(fx, x=xs, initial=0.0)
            out.append((sgn, xs, cdf, float(cdf[-1])))
        return out

    def _draw(self, tables, rng, size):
        u = rng.random(size)
        v = rng.random(size)
        masses = np.array([t[3] for t in tables])
        if masses.sum() <= 0:
            raise ValueError("zero mass in the requested range")
        pos = u < masses[0] / masses.sum()
        out = np.empty(size)
        for mask, (sgn, xs, cdf, mass) in ((pos, tables[0]), (~pos, tables[1])):
            if mask.any():
                out[mask] = sgn * np.interp(v[mask] * mass, cdf, xs)
        return out

    @cached_property
    def _large_tables(self):
        return self._table(1.0, self.upper, geometric=True)

    def sample_large(self, rng, size):
        return self._draw(self._large_tables, rng, size)

    def sample_band(self, n, rng, size):
        key = ("table", n)
        if key not in self._memo:
            self._memo[key] = self._table(*band_edges(n), geometric=False)
        return self._draw(self._memo[key], rng, size)

    def to_dict(self):
        if self.source is None:
            raise ValueError("Custom measure without a textual source cannot be serialized")
        return {"family": self.family, "density": self.source}


@dataclass(frozen=True)
class Composite(LevyMeasure):
    """Sum of measures; every quantity is additive."""

    parts: tuple = field(default_factory=tuple)
    family = "composite"

    def large_jump_mass(self):
        return sum(p.large_jump_mass() for p in self.parts)

    def tail_moment(self, eta):
        return sum(p.tail_moment(eta) for p in self.parts)

    def small_second_moment(self):
        return sum(p.small_second_moment() for p in self.parts)

    def band_mass(self, n):
        return sum(p.band_mass(n) for p in self.parts)

    def band_mean(self, n):
        return sum(p.band_mean(n) for p in self.parts)

    def band_variance(self, n):
        return sum(p.band_variance(n) for p in self.parts)

    def _mixture(self, masses, draw, rng, size):
        masses = np.asarray(masses, dtype=float)
        if masses.sum() <= 0:
            raise ValueError("zero mass in the requested range")
        which = np.searchsorted(np.cumsum(masses) / masses.sum(), rng.random(size), side="right")
        which = np.minimum(which, len(masses) - 1)
        out = np.empty(size)
        for i, p in enumerate(self.parts):
            k = int(np.count_nonzero(which == i))
            if k:
                out[which == i] = draw(p, k)
        return out

    def sample_large(self, rng, size):
        return self._mixture([p.large_jump_mass() for p in self.parts],
                             lambda p, k: p.sample_large(rng, k), rng, size)

    def sample_band(self, n, rng, size):
        return self._mixture([p.band_mass(n) for p in self.parts],
                             lambda p, k: p.sample_band(n, rng, k), rng, size)

    def to_dict(self):
        return {"family": self.family, "parts": [p.to_dict() for p in self.parts]}


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LevyTriplet:
    """Characteristic triplet ``(gamma, sigma, nu)`` under truncation ``1_{|x|<=1}``."""

    gamma: float = 0.0
    sigma: float = 0.0
    nu: LevyMeasure = field(default_factory=FiniteAtomic)

    def __post_init__(self):
        if not self.sigma >= 0:
            raise ValueError(f"sigma must be >= 0, got {self.sigma}")
        if not math.isfinite(self.gamma):
            raise ValueError("gamma must be finite")

    @property
    def large_jump_rate(self) -> float:
        return self.nu.large_jump_mass()

    def to_dict(self) -> dict:
        return {"gamma": self.gamma, "sigma": self.sigma, "nu": self.nu.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "LevyTriplet":
        nu = data.get("nu")
        return cls(float(data.get("gamma", 0.0)), float(data.get("sigma", 0.0)),
                   measure_from_dict(nu) if nu else FiniteAtomic())


@dataclass(frozen=True)
class PamVerdict:
    """Outcome of :func:`classify_pam`. ``has_pam is None`` is the *unknown* variant."""

    has_pam: Optional[bool]
    witness_eta: Optional[float]
    evidence: str

    def __post_init__(self):
        if self.has_pam and self.witness_eta is None:
            raise ValueError("a positive verdict needs a witness")

    @property
    def unknown(self) -> bool:
        return self.has_pam is None

    @property
    def label(self) -> str:
        return {True: "pam", False: "no-pam", None: "unknown"}[self.has_pam]


def tail_moment(nu: LevyMeasure, eta: float) -> float:
    """``int_{|x|>1} |x|^eta nu(dx)``; ``inf`` when divergent.

    Raises :class:`IndeterminateMoment` when a density without a tail oracle
    defeats the quadrature.
    """
    if not eta > 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    return nu.tail_moment(eta)


def _analytic_no_pam(nu: LevyMeasure) -> bool:
    parts = _parts(nu)
    return any(isinstance(p, LogSquaredTail) for p in parts)


def _analytic_pam_witness(nu: LevyMeasure) -> Optional[float]:
    # a witness below every Pareto index, when all parts are closed-form with some PAM
    parts = _parts(nu)
    if any(isinstance(p, (Custom, LogSquaredTail)) for p in parts):
        return None
    betas = [p.beta for p in parts if isinstance(p, ParetoTail)]
    return 0.5 * min(betas) if betas else 1.0


def classify_pam(nu: LevyMeasure, eta_grid: Sequence[float]) -> PamVerdict:
    """Decide whether ``nu`` has a positive absolute moment.

    ``eta_grid`` must be non-empty, positive and sorted descending. The
    witness is the largest grid value with a finite tail moment; closed-form
    families fall back to an analytic witness when the grid misses.
    """
    grid = [float(e) for e in eta_grid]
    if not grid:
        raise ValueError("eta_grid must be non-empty")
    if any(e <= 0 for e in grid):
        raise ValueError("eta_grid must be strictly positive")
    if any(a < b for a, b in zip(grid, grid[1:])):
        raise ValueError("eta_grid must be sorted descending")

    if _analytic_no_pam(nu):
        return PamVerdict(False, None, "log-squared tail: int x^(eta-1)/log^2 x diverges for every eta > 0")

    tried = []
    for eta in grid:
        try:
            m = tail_moment(nu, eta)
        except IndeterminateMoment as exc:
            return PamVerdict(None, None, f"indeterminate tail moment at eta={eta:g}: {exc}")
        tried.append((eta, m))
        if math.isfinite(m):
            return PamVerdict(True, eta, f"tail moment at eta={eta:g} is {m:.6g}")

    witness = _analytic_pam_witness(nu)
    if witness is not None:
        m = tail_moment(nu, witness)
        if math.isfinite(m):
            return PamVerdict(True, witness,
                              f"grid {grid} diverges; analytic witness eta={witness:g} gives {m:.6g}")
    return PamVerdict(None, None, f"all grid moments diverge {tried}; no analytic statement for this family")


def sample_large_jump(nu: LevyMeasure, rng: np.random.Generator, size: Optional[int] = None):
    """Draw from ``lambda^-1 1_{|x|>1} nu(dx)``. Scalar when ``size`` is None."""
    lam = nu.large_jump_mass()
    if not lam > 0 or not math.isfinite(lam):
        raise ValueError(f"large-jump mass must be finite and positive, got {lam}")
    out = nu.sample_large(rng, 1 if size is None else size)
    return float(out[0]) if size is None else out


def small_jump_band_variance(nu: LevyMeasure, n: int) -> float:
    """``int_{2^-(n+1) < |x| <= 2^-n} x^2 nu(dx)``."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    return nu.band_variance(n)


# -- configuration round trip ------------------------------------------------

_SAFE = {"np": np, "abs": np.abs, "exp": np.exp, "log": np.log, "sqrt": np.sqrt,
         "where": np.where, "pi": np.pi, "e": np.e}


def custom_from_expression(expr: str) -> Custom:
    """Custom measure from a numpy expression in ``x`` (e.g. ``"where(abs(x)<=1, abs(x)**-1.5, 0)"``)."""
    code = compile(expr, "<density>", "eval")
    for name in code.co_names:
        if name not in _SAFE and name != "x":
            raise ValueError(f"name {name!r} not allowed in a density expression")

    def density(x, _code=code):
        x = np.asarray(x, dtype=float)
        with np.errstate(all="ignore"):
            return np.broadcast_to(eval(_code, {"__builtins__": {}}, {**_SAFE, "x": x}), x.shape).astype(float)

    return Custom(density=density, source=expr)


_FIELDS = {"atomic": ((), ("atoms",)), "pareto": (("beta",), ("mass",)), "logsquared": ((), ("mass",)),
           "gaussian": ((), ("scale", "mass")), "custom": (("density",), ()), "composite": (("parts",), ())}


def measure_from_dict(data: dict) -> LevyMeasure:
    if not isinstance(data, dict) or "family" not in data:
        raise ValueError("measure description needs a 'family' field")
    fam = data["family"]
    args = {k: v for k, v in data.items() if k != "family"}
    if fam not in _FIELDS:
        raise ValueError(f"unknown measure family {fam!r}")
    required, optional = _FIELDS[fam]
    missing = [k for k in required if k not in args]
    extra = sorted(set(args) - set(required) - set(optional))
    if missing or extra:
        raise ValueError(f"{fam} measure: missing {missing}, unexpected {extra}")
    try:
        if fam == "atomic":
            return FiniteAtomic(tuple(tuple(a) for a in args.get("atoms", ())))
        if fam == "pareto":
            return ParetoTail(float(args["beta"]), float(args.get("mass", 1.0)))
        if fam == "logsquared":
            return LogSquaredTail(float(args.get("mass", 1.0)))
        if fam == "gaussian":
            return GaussianDensity(float(args.get("scale", 1.0)), float(args.get("mass", 1.0)))
        if fam == "custom":
            return custom_from_expression(str(args["density"]))
        return Composite(tuple(measure_from_dict(p) for p in args["parts"]))
    except TypeError as exc:
        raise ValueError(f"{fam} measure: {exc}") from None
