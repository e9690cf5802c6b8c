"""Growth of simulated paths and slices at infinity.

A Lévy field is a tempered distribution exactly when its paths grow at most
polynomially, which happens exactly when the Lévy measure has a positive
absolute moment. The tools here measure that growth on finite horizons:
growth-ratio profiles, Marcinkiewicz-Zygmund normalized partial sums,
dyadic-block suprema of the martingale part, and the bump-pairing probe that
recovers path values from pairings.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .levy_measure import LevyTriplet, classify_pam
from .pairing import PAM_GRID, pair_field, pair_noise
from .path_sim import PathSkeleton1D, simulate_path
from .schwartz import bump_family_1d, bump_family_dd, cutoff_theta_dd, tail_integral_Phi, tensor_product
from .seeding import replicate_seed
from .sheet_sim import Skeleton, simulate_sheet
from .sheet_sim import slice as sheet_slice

DIVERGENT_FACTOR = 10.0
BOUNDED_FACTOR = 2.0
NO_PAM_ALPHAS = (1.0, 2.0, 4.0, 8.0)


# ---------------------------------------------------------------------------
# profiles


@dataclass(frozen=True)
class GrowthProfile:
    """``sup_{t <= T} |X_t| / (1 + t^alpha)`` at each checkpoint ``T``."""

    alpha: float
    checkpoints: tuple
    argmax: tuple = ()

    @property
    def horizons(self) -> np.ndarray:
        return np.array([c[0] for c in self.checkpoints])

    @property
    def values(self) -> np.ndarray:
        return np.array([c[1] for c in self.checkpoints])

    @property
    def growth_factor(self) -> float:
        """Last checkpoint over first; ``inf`` if the first is zero and the last is not."""
        v = self.values
        return _ratio(v[-1], v[0])

    def to_rows(self) -> list:
        return [{"alpha": self.alpha, "T": T, "value": v, "argmax": a}
                for (T, v), a in zip(self.checkpoints, self.argmax or (None,) * len(self.checkpoints))]


def _ratio(a: float, b: float) -> float:
    if b == 0:
        return 0.0 if a == 0 else math.inf
    if math.isinf(b):
        return 1.0 if math.isinf(a) else 0.0
    return float(a / b)


def _candidates(path):
    """Times and values at which the running sup of ``|X|`` can be attained."""
    times = np.asarray(path.jump_times, dtype=float)
    sizes = np.asarray(path.jump_sizes, dtype=float)
    if path.has_continuous_part:
        grid = np.asarray(path.grid_times(), dtype=float)
        t = np.concatenate([grid, times])
        x = np.asarray(path.evaluate(t), dtype=float)
        # left limits at the jumps
        with np.errstate(invalid="ignore"):
            left = x[len(grid):] - sizes
        return np.concatenate([t, times]), np.concatenate([x, left])
    # piecewise constant: right values are the partial sums, left limits the shifted ones
    with np.errstate(invalid="ignore"):
        z = np.cumsum(sizes)
    left = np.concatenate([[0.0], z[:-1]])
    return np.concatenate([times, times]), np.concatenate([z, left])


def growth_profile(path, alpha: float, checkpoints: Sequence[float]) -> GrowthProfile:
    """Running sup of ``|X_t| / (1 + t^alpha)`` over jump times and grid points.

    ``path`` is a :class:`PathSkeleton1D` or a slice view; values may be
    ``inf`` when a heavy-tailed jump overflows.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    cps = np.asarray(sorted(float(c) for c in checkpoints))
    if not len(cps):
        raise ValueError("need at least one checkpoint")
    T = path.horizon if hasattr(path, "horizon") else path.T
    if cps[-1] > T * (1 + 1e-12):
        raise ValueError(f"checkpoint {cps[-1]:g} beyond the simulated horizon {T:g}")
    t, x = _candidates(path)
    with np.errstate(invalid="ignore", over="ignore"):
        r = np.abs(x) / (1.0 + t ** alpha)
    r = np.where(np.isnan(r), np.inf, r)
    order = np.argsort(t, kind="stable")
    t, r = t[order], r[order]
    running = np.maximum.accumulate(r) if len(r) else r
    where = np.maximum.accumulate(np.where(r == running, np.arange(len(r)), 0)) if len(r) else r
    vals, arg = [], []
    for c in cps:
        i = int(np.searchsorted(t, c, side="right"))
        vals.append(float(running[i - 1]) if i else 0.0)
        arg.append(float(t[int(where[i - 1])]) if i else 0.0)
    return GrowthProfile(float(alpha), tuple(zip(cps.tolist(), vals)), tuple(arg))


@dataclass(frozen=True)
class MZScaling:
    p: float
    sequence: np.ndarray
    n0: int
    N: int

    @property
    def max(self) -> float:
        seg = self.sequence[self.n0 - 1:self.N]
        return float(np.max(seg)) if len(seg) else 0.0


def mz_scaling(Z, p: float, n0: int = 1, N: Optional[int] = None) -> MZScaling:
    """``n^{-1/p} |Z_n|``; the summary is the max over ``n0 <= n <= N``."""
    if not 0 < p <= 1:
        raise ValueError(f"p must lie in (0, 1], got {p}")
    Z = np.asarray(Z, dtype=float)
    N = len(Z) if N is None else int(N)
    if not 1 <= n0 <= max(N, 1) or N > len(Z):
        raise ValueError(f"need 1 <= n0 <= N <= {len(Z)}")
    n = np.arange(1, len(Z) + 1, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        seq = np.abs(Z) * n ** (-1.0 / p)
    return MZScaling(float(p), np.where(np.isnan(seq), np.inf, seq), int(n0), N)


# ---------------------------------------------------------------------------
# dyadic blocks


def default_blocks(d: int) -> list:
    """``k = 2..8`` for ``d = 1``; diagonal blocks with ``sum k in {2, 4, 6, 8}`` otherwise."""
    if d == 1:
        return [(k,) for k in range(2, 9)]
    return [(k,) * d for k in range(1, 9) if 2 <= k * d <= 8]


@dataclass(frozen=True)
class DyadicReport:
    alpha: float
    blocks: tuple
    means: np.ndarray
    stderrs: np.ndarray
    n: int

    @property
    def ksums(self) -> np.ndarray:
        return np.array([sum(b) for b in self.blocks], dtype=float)

    @property
    def exponent(self) -> float:
        """Least-squares decay rate ``c`` in ``mean ~ 2^{-c sum k}``; ``nan`` for a zero field."""
        m = self.means
        if np.any(m <= 0) or len(m) < 2:
            return math.nan
        slope = np.polyfit(self.ksums, np.log2(m), 1)[0]
        return float(-slope)

    def predicted(self, d: int) -> float:
        return self.alpha / d - 0.5

    def to_rows(self) -> list:
        return [{"block": list(b), "sum_k": int(sum(b)), "mean": float(m), "stderr": float(s)}
                for b, m, s in zip(self.blocks, self.means, self.stderrs)]


def _martingale_nodes(sk: Skeleton) -> np.ndarray:
    tr = sk.triplet
    if tr.gamma != 0 or len(sk.jump_size) or tr.nu.large_jump_mass() > 0:
        raise ValueError("dyadic_block_sup needs a mean-zero martingale field (gamma = 0, no large jumps)")
    F = np.zeros(tuple(c + 1 for c in sk.cells))
    if sk.W is not None:
        F = F + tr.sigma * sk.W
    if len(sk.small_size) or sk.comp_rate != 0.0:
        F = F + sk.small_nodes()
    return F


def _block_sup(F, axes, block, alpha):
    sl, coords = [], []
    for ax, k in zip(axes, block):
        a, b = 2.0 ** (k - 1), 2.0 ** k
        if b > ax[-1] * (1 + 1e-12):
            raise ValueError(f"block {block} reaches beyond the simulated box")
        i0 = int(np.searchsorted(ax, a - 1e-12, side="left"))
        i1 = int(np.searchsorted(ax, b + 1e-12, side="right"))
        sl.append(slice(i0, i1))
        coords.append(ax[i0:i1])
    mesh = np.meshgrid(*coords, indexing="ij")
    norm = np.sqrt(sum(m * m for m in mesh))
    return float(np.max(np.abs(F[tuple(sl)]) / norm ** alpha))


def dyadic_block_sup(skeletons, alpha: Optional[float] = None, blocks=None) -> DyadicReport:
    """MC estimate of ``E sup_{s in [a_k, b_k]} |M_s| / |s|^alpha`` per dyadic block.

    ``a_k = (2^{k_1 - 1}, ...)`` and ``b_k = (2^{k_1}, ...)``; the sup is taken
    over grid nodes.
    """
    skeletons = list(skeletons)
    if not skeletons:
        raise ValueError("need at least one skeleton")
    d = skeletons[0].dim
    alpha = float(d // 2 + 1) if alpha is None else float(alpha)
    blocks = [tuple(int(k) for k in b) for b in (blocks or default_blocks(d))]
    if any(len(b) != d for b in blocks):
        raise ValueError(f"blocks must have {d} indices")
    vals = np.empty((len(skeletons), len(blocks)))
    for i, sk in enumerate(skeletons):
        F = _martingale_nodes(sk)
        axes = sk.axes()
        vals[i] = [_block_sup(F, axes, b, alpha) for b in blocks]
    n = len(skeletons)
    se = vals.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.full(len(blocks), math.inf)
    return DyadicReport(alpha, tuple(blocks), vals.mean(axis=0), se, n)


def dyadic_experiment(triplet: LevyTriplet, d: int, seeds: int = 200, seed: int = 0,
                      alpha: Optional[float] = None, blocks=None, grid_dt: Optional[float] = None) -> DyadicReport:
    """Simulate ``seeds`` fields on the smallest box holding every block and run :func:`dyadic_block_sup`."""
    blocks = blocks or default_blocks(d)
    top = max(max(b) for b in blocks)
    T = (2.0 ** top,) * d
    if grid_dt is None:
        grid_dt = 2.0 ** -6 if d == 1 else 2.0 ** -5
    sks = (simulate_sheet(triplet, T, grid_dt=grid_dt, seed=replicate_seed(seed, i)) if d > 1
           else simulate_path(triplet, T[0], grid_dt=grid_dt, seed=replicate_seed(seed, i)) for i in range(seeds))
    return dyadic_block_sup(sks, alpha, blocks)


# ---------------------------------------------------------------------------
# dichotomy


@dataclass(frozen=True)
class DichotomyConfig:
    """Finite-horizon settings; ``alpha=None`` picks the default from the moment verdict."""

    seeds: int = 200
    seed: int = 0
    horizons: tuple = (1e2, 1e4)
    alpha: Optional[float] = None
    slice_axis: Optional[int] = None
    strip_width: float = 2.0
    eta_grid: tuple = PAM_GRID
    mz_n0: int = 10

    def __post_init__(self):
        if self.seeds < 1:
            raise ValueError("seeds must be >= 1")
        if len(self.horizons) != 2 or not 0 < self.horizons[0] < self.horizons[1]:
            raise ValueError("horizons must be two increasing positive values")
        if self.strip_width < 1:
            raise ValueError("strip_width must be >= 1 so the slice at 1 lies inside")


@dataclass(frozen=True)
class DichotomyReport:
    pam_verdict: str
    witness_eta: Optional[float]
    trend: str
    consistent: bool
    alphas: tuple
    ratios: dict
    medians: dict
    mz: dict = field(default_factory=dict)
    method: str = "growth-profile"
    message: str = ""

    def to_record(self) -> dict:
        return {"pam_verdict": self.pam_verdict, "witness_eta": self.witness_eta, "trend": self.trend,
                "consistent": self.consistent, "method": self.method, "alphas": list(self.alphas),
                "ratios": {str(k): v for k, v in self.ratios.items()},
                "medians": {str(k): v for k, v in self.medians.items()}, "mz": self.mz, "message": self.message}


def classify_trend(ratio: float) -> str:
    if ratio >= DIVERGENT_FACTOR:
        return "divergent"
    if ratio <= BOUNDED_FACTOR:
        return "bounded"
    return "inconclusive"


def _large_slice(triplet, d, H, cfg, seed):
    tr = LevyTriplet(0.0, 0.0, triplet.nu)
    if d == 1:
        return simulate_path(tr, H, grid_dt=H, eps=1.0, seed=seed)
    axis = d - 1 if cfg.slice_axis is None else cfg.slice_axis
    T = [cfg.strip_width] * d
    T[axis] = H
    sk = simulate_sheet(tr, tuple(T), grid_dt=max(T), eps=1.0, seed=seed)
    return sheet_slice(sk, axis, 1.0, part="large")


def _combine(trends) -> str:
    if all(t == "divergent" for t in trends):
        return "divergent"
    if all(t == "bounded" for t in trends):
        return "bounded"
    return "inconclusive"


def dichotomy_experiment(triplet: LevyTriplet, d: int, config: Optional[DichotomyConfig] = None) -> DichotomyReport:
    """Compare the moment verdict for ``nu`` with the empirical growth trend.

    The trend is read off the large-jump process (the slice
    ``L_t = X^P_(1, ..., 1, t)`` for ``d >= 2``): the median over seeds of the
    growth profile at the long horizon divided by the median at the short one
    is ``divergent`` at factor ``>= 10``, ``bounded`` at ``<= 2`` and
    ``inconclusive`` in between. Without large jumps the martingale part is
    judged by its dyadic-block decay instead.
    """
    cfg = config or DichotomyConfig()
    if d < 1:
        raise ValueError("d must be >= 1")
    verdict = classify_pam(triplet.nu, cfg.eta_grid)
    pam = verdict.has_pam

    if triplet.nu.large_jump_mass() == 0:
        rep = dyadic_experiment(LevyTriplet(0.0, triplet.sigma, triplet.nu), d, seeds=cfg.seeds, seed=cfg.seed,
                                alpha=cfg.alpha)
        expo = rep.exponent
        trend = "bounded" if (math.isnan(expo) or expo > 0) else "divergent"
        consistent = pam is True and trend == "bounded"
        return DichotomyReport(verdict.label, verdict.witness_eta, trend, consistent, (rep.alpha,),
                               {rep.alpha: expo}, {rep.alpha: rep.means.tolist()}, method="dyadic-block",
                               message="" if consistent else "moment verdict and empirical trend disagree")

    if cfg.alpha is not None:
        alphas = (float(cfg.alpha),)
    elif pam:
        alphas = (max(1.0 / verdict.witness_eta, 1.0),)
    else:
        alphas = NO_PAM_ALPHAS
    h0, h1 = (float(h) for h in cfg.horizons)
    vals = {a: np.empty((cfg.seeds, 2)) for a in alphas}
    mz_p = min(verdict.witness_eta, 1.0) if pam else 0.5
    mz = np.empty((cfg.seeds, 2))
    for i in range(cfg.seeds):
        path = _large_slice(triplet, d, h1, cfg, replicate_seed(cfg.seed, i))
        for a in alphas:
            vals[a][i] = growth_profile(path, a, (h0, h1)).values
        times = np.asarray(path.jump_times)
        with np.errstate(invalid="ignore", over="ignore"):
            Z = np.cumsum(np.asarray(path.jump_sizes))
        for j, h in enumerate((h0, h1)):
            N = int(np.searchsorted(times, h, side="right"))
            mz[i, j] = mz_scaling(Z, mz_p, min(cfg.mz_n0, N), N).max if N else 0.0
    medians = {a: np.median(v, axis=0).tolist() for a, v in vals.items()}
    ratios = {a: _ratio(m[1], m[0]) for a, m in medians.items()}
    trend = _combine([classify_trend(r) for r in ratios.values()])
    if pam is None:
        consistent = False
    else:
        consistent = (pam and trend == "bounded") or (not pam and trend == "divergent")
    msg = ""
    if not consistent:
        msg = f"moment verdict {verdict.label} but empirical trend {trend}"
    mz_med = np.median(mz, axis=0)
    return DichotomyReport(verdict.label, verdict.witness_eta, trend, bool(consistent), alphas, ratios, medians,
                           {"p": mz_p, "median_max": mz_med.tolist(), "ratio": _ratio(mz_med[1], mz_med[0])},
                           message=msg)


# ---------------------------------------------------------------------------
# bump probe


@dataclass(frozen=True)
class BumpRow:
    n: int
    pairing: float
    value_at_S: float
    hit: bool
    S_n: float

    @property
    def error(self) -> float:
        return abs(self.pairing - self.value_at_S)


def _probe_1d(path: PathSkeleton1D, n_range, k):
    times = np.asarray(path.jump_times)
    rows = []
    for n in n_range:
        if n > len(times):
            break
        S = float(times[n - 1])
        w = S ** (-float(k))
        if S + w > path.horizon:
            break
        phi = bump_family_1d(S, k)
        nxt = times[n] if n < len(times) else math.inf
        hit = not (nxt < S + w)
        rows.append(BumpRow(int(n), pair_field(path, phi).value, float(path.evaluate(S)), bool(hit), S))
    return rows


def _probe_dd(sheet: Skeleton, n_range):
    d = sheet.dim
    L = sheet_slice(sheet, d - 1, 1.0, part="large")
    times = np.asarray(L.jump_times)
    theta = cutoff_theta_dd(d)
    pos = sheet.jump_pos
    rows = []
    for n in n_range:
        if n > len(times):
            break
        S = float(times[n - 1])
        h = S ** -3.0
        upper = np.array([1.0 + h] * (d - 1) + [S + h])
        lower = np.array([1.0] * (d - 1) + [S])
        if np.any(upper > np.asarray(sheet.T)):
            break
        inside = np.all(pos < upper, axis=1) & ~np.all(pos <= lower, axis=1)
        phi = bump_family_dd(S, d)
        value = pair_noise(sheet, tensor_product(theta, tail_integral_Phi(phi))).value
        rows.append(BumpRow(int(n), value, float(L.evaluate(S)[0]), not bool(np.any(inside)), S))
    return rows


def bump_probe(field, n_range, k: int = 2) -> list:
    """Pair the field with the bump family at its own jump times.

    For a path, ``<X, phi_n>`` with ``phi_n`` of width ``S_n^-k`` is compared
    with ``X_{S_n}``; for a sheet, ``<X', theta Phi_n>`` is compared with the
    large-jump slice value ``L_{S_n}``. ``hit`` is true when no other jump
    lands in the bump's support box, in which case the two agree.
    """
    if len(field.jump_size) == 0 and field.triplet.nu.large_jump_mass() == 0:
        raise ValueError("bump_probe needs a compound Poisson part")
    if field.dim == 1:
        return _probe_1d(field, n_range, k)
    return _probe_dd(field, n_range)
