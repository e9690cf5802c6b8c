"""Simulation of d-parameter Lévy fields on boxes ``[0, T_1] x ... x [0, T_d]``.

A :class:`Skeleton` stores the exact jump record of the compound Poisson part,
the exact event list of the banded small jumps, and the Brownian sheet on a
regular grid. Paths (``d = 1``) are the special case handled by
:mod:`levynoise.path_sim`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.interpolate import RegularGridInterpolator

from .levy_measure import LevyTriplet
from .seeding import BROWNIAN, LARGE_JUMPS, SMALL_JUMPS, derive_rng

MAX_GRID_NODES = 2 ** 20
DEFAULT_EPS = 2.0 ** -10
MAX_BANDS = 40
_EVAL_BLOCK = 2 ** 22


def _frozen(a, dtype=float):
    a = np.ascontiguousarray(a, dtype=dtype)
    a.setflags(write=False)
    return a


def band_count(eps: float) -> int:
    """Number of dyadic bands ``2^-(n+1) < |x| <= 2^-n`` needed to reach ``eps``."""
    if not 0 < eps <= 1:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    return int(math.ceil(math.log2(1.0 / eps) - 1e-12))


def neglected_variance(nu, n_bands: int) -> float:
    """``sum_{n >= n_bands}`` of band variances, summed until terms drop below ``1e-16`` relative."""
    total, n = 0.0, n_bands
    while n < n_bands + 400:
        v = nu.band_variance(n)
        total += v
        if v <= 1e-16 * total or (v == 0.0 and n > n_bands + 60):
            break
        n += 1
    return total


def check_bands(nu, eps: float, max_bands: int = MAX_BANDS) -> int:
    n_bands = band_count(eps)
    if n_bands > max_bands:
        raise ValueError(
            f"eps={eps:g} needs {n_bands} bands, above the cap of {max_bands}; "
            f"neglected variance at the cap would be {neglected_variance(nu, max_bands):.3e}")
    return n_bands


def default_grid(T: Sequence[float], dt=None, cap: int = MAX_GRID_NODES) -> tuple:
    """Per-axis spacing: ``1e-3 T_i`` by default, coarsened uniformly so the grid stays under ``cap`` nodes."""
    T = tuple(float(x) for x in T)
    auto = dt is None
    if dt is None:
        dt = tuple(1e-3 * x for x in T)
        nodes = math.prod(int(round(x / h)) + 1 for x, h in zip(T, dt))
        if nodes > cap:
            f = (nodes / cap) ** (1.0 / len(T))
            dt = tuple(h * f for h in dt)
    elif np.isscalar(dt):
        dt = tuple(float(dt) for _ in T)
    dt = tuple(float(h) for h in dt)
    if any(not h > 0 for h in dt):
        raise ValueError("grid_dt must be > 0")
    # snap so that each axis has an integer number of cells
    n = [max(1, int(math.ceil(x / h - 1e-9))) for x, h in zip(T, dt)]
    while auto and math.prod(k + 1 for k in n) > cap:
        i = max(range(len(n)), key=lambda j: n[j])
        n[i] -= 1
    return tuple(x / k for x, k in zip(T, n)), tuple(n)


@dataclass(frozen=True, eq=False)
class Skeleton:
    """Simulated field on ``[0, T]``; immutable.

    Attributes
    ----------
    jump_pos, jump_size
        Large jumps ``(tau_i, Y_i)`` with ``|Y_i| > 1``, exact positions.
    small_pos, small_size, small_band
        Small-jump events of the banded approximation, exact positions.
    comp_rate
        Compensator per unit volume, ``sum_n int_band x nu(dx)``.
    neglected_var
        Variance rate of the bands below ``eps`` that were not simulated.
    W
        Standard Brownian sheet on the grid nodes (None when ``sigma = 0``).
    """

    triplet: LevyTriplet
    T: tuple
    dt: tuple
    cells: tuple
    eps: float
    n_bands: int
    seed: int
    jump_pos: np.ndarray
    jump_size: np.ndarray
    small_pos: np.ndarray
    small_size: np.ndarray
    small_band: np.ndarray
    comp_rate: float
    neglected_var: float
    W: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    # -- geometry -------------------------------------------------------------
    @property
    def dim(self) -> int:
        return len(self.T)

    @property
    def volume(self) -> float:
        return math.prod(self.T)

    def axes(self):
        return [np.linspace(0.0, t, n + 1) for t, n in zip(self.T, self.cells)]

    def _check_pts(self, pts):
        pts = np.asarray(pts, dtype=float)
        if self.dim == 1 and (pts.ndim < 2 or pts.shape[-1] != 1):
            pts = pts[..., None]
        if pts.shape[-1] != self.dim:
            raise ValueError(f"points must have trailing dimension {self.dim}")
        tol = 1e-12 * np.asarray(self.T)
        if np.any(pts < -tol) or np.any(pts > np.asarray(self.T) + tol):
            raise ValueError("evaluation point outside the simulated box")
        return pts

    # -- components -----------------------------------------------------------
    @cached_property
    def _W_interp(self):
        if self.W is None:
            return None
        return RegularGridInterpolator(tuple(self.axes()), self.W, method="linear")

    @staticmethod
    def _event_sum(pos, size, pts):
        # sum of size_i over events with pos_i <= t componentwise
        flat = pts.reshape(-1, pts.shape[-1])
        out = np.zeros(len(flat))
        if len(size) == 0:
            return out.reshape(pts.shape[:-1])
        if pos.shape[1] == 1:
            order = np.argsort(pos[:, 0], kind="stable")
            times, cums = pos[order, 0], np.concatenate([[0.0], np.cumsum(size[order])])
            return cums[np.searchsorted(times, flat[:, 0], side="right")].reshape(pts.shape[:-1])
        step = max(1, _EVAL_BLOCK // len(size))
        for s in range(0, len(flat), step):
            blk = flat[s:s + step]
            mask = np.all(pos[None, :, :] <= blk[:, None, :], axis=-1)
            out[s:s + step] = mask @ size
        return out.reshape(pts.shape[:-1])

    def components(self, pts) -> dict:
        """Drift, Brownian, large-jump and small-jump parts at ``pts`` (shape ``(..., d)``)."""
        pts = self._check_pts(pts)
        vol = np.prod(pts, axis=-1)
        tr = self.triplet
        if self.W is None:
            bm = np.zeros(pts.shape[:-1])
        else:
            clipped = np.clip(pts, 0.0, np.asarray(self.T))
            bm = tr.sigma * self._W_interp(clipped.reshape(-1, self.dim)).reshape(pts.shape[:-1])
        return {
            "drift": tr.gamma * vol,
            "brownian": bm,
            "large": self._event_sum(self.jump_pos, self.jump_size, pts),
            "small": self._event_sum(self.small_pos, self.small_size, pts) - self.comp_rate * vol,
        }

    def evaluate(self, pts):
        """``X_t`` with the ``(<=, ..., <=)`` convention: a jump at ``tau`` counts for ``t >= tau``."""
        c = self.components(pts)
        with np.errstate(invalid="ignore"):
            return c["drift"] + c["brownian"] + c["large"] + c["small"]

    def increment(self, a, b) -> float:
        """``Delta_a^b X = sum_eps (-1)^|eps| X_{c_eps(a, b)}``; jump parts counted directly in ``]a, b]``."""
        a = np.atleast_1d(np.asarray(a, dtype=float))
        b = np.atleast_1d(np.asarray(b, dtype=float))
        if a.shape != (self.dim,) or b.shape != (self.dim,):
            raise ValueError(f"a and b must have length {self.dim}")
        if np.any(a > b):
            raise ValueError("increment needs a <= b componentwise")
        self._check_pts(np.stack([a, b]))
        eps = np.array(list(np.ndindex(*(2,) * self.dim)))
        corners = np.where(eps == 1, a, b)
        signs = (-1.0) ** eps.sum(axis=1)
        tr = self.triplet
        vol = float(np.prod(b - a))
        val = tr.gamma * vol - self.comp_rate * vol
        if self.W is not None:
            val += tr.sigma * float(signs @ self._W_interp(corners))
        for pos, size in ((self.jump_pos, self.jump_size), (self.small_pos, self.small_size)):
            if len(size):
                inside = np.all((pos > a) & (pos <= b), axis=1)
                val += float(size[inside].sum())
        return val

    # -- grid values ----------------------------------------------------------
    def brownian_nodes(self) -> Optional[np.ndarray]:
        return None if self.W is None else self.triplet.sigma * self.W

    def cell_increments(self) -> Optional[np.ndarray]:
        """Brownian box increments ``Delta W`` of every grid cell (unit sigma)."""
        if self.W is None:
            return None
        out = self.W
        for ax in range(self.dim):
            out = np.diff(out, axis=ax)
        return out

    def small_nodes(self) -> np.ndarray:
        """Compensated small-jump part ``X^M`` on the grid nodes."""
        axes = self.axes()
        shape = tuple(len(a) for a in axes)
        counts = np.zeros(shape)
        if len(self.small_size):
            # an event at s contributes to nodes t >= s, i.e. index >= ceil(s / dt)
            idx = [np.minimum(np.ceil(self.small_pos[:, i] / self.dt[i] - 1e-12).astype(int), shape[i] - 1)
                   for i in range(self.dim)]
            np.add.at(counts, tuple(idx), self.small_size)
            for ax in range(self.dim):
                counts = np.cumsum(counts, axis=ax)
        vol = axes[0]
        for a in axes[1:]:
            vol = np.multiply.outer(vol, a)
        return counts - self.comp_rate * vol

    def large_slice_jumps(self, axis: int, fixed) -> tuple:
        """Large jumps with all coordinates but ``axis`` below ``fixed``, sorted along ``axis``."""
        axis, fixed = _slice_args(self, axis, fixed)
        others = [i for i in range(self.dim) if i != axis]
        keep = np.all(self.jump_pos[:, others] <= fixed, axis=1) if others else np.ones(len(self.jump_size), bool)
        t = self.jump_pos[keep, axis]
        y = self.jump_size[keep]
        order = np.argsort(t, kind="stable")
        return t[order], y[order]


def _slice_args(sk, axis, fixed):
    if not 0 <= axis < sk.dim:
        raise ValueError(f"axis {axis} out of range for d={sk.dim}")
    fixed = np.atleast_1d(np.asarray(fixed, dtype=float))
    if fixed.size == 1 and sk.dim > 2:
        fixed = np.full(sk.dim - 1, float(fixed[0]))
    if fixed.shape != (sk.dim - 1,) and sk.dim > 1:
        raise ValueError(f"fixed must have {sk.dim - 1} coordinates")
    others = [i for i in range(sk.dim) if i != axis]
    for v, i in zip(fixed, others):
        if not 0 <= v <= sk.T[i]:
            raise ValueError("fixed coordinates must lie inside the box")
    return axis, fixed


@dataclass(frozen=True, eq=False)
class SliceView:
    """One-parameter process ``t -> X_(..., t, ...)`` through a sheet.

    With ``part="large"`` only the compound Poisson part is kept; this is the
    process ``L`` used by the bump probe and the dichotomy experiment.
    """

    sheet: Skeleton
    axis: int
    fixed: np.ndarray
    part: str = "all"

    @property
    def T(self) -> float:
        return self.sheet.T[self.axis]

    @cached_property
    def jumps(self):
        return self.sheet.large_slice_jumps(self.axis, self.fixed)

    @property
    def jump_times(self):
        return self.jumps[0]

    @property
    def jump_sizes(self):
        return self.jumps[1]

    def points(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pts = np.empty(t.shape + (self.sheet.dim,))
        others = [i for i in range(self.sheet.dim) if i != self.axis]
        for v, i in zip(self.fixed, others):
            pts[..., i] = v
        pts[..., self.axis] = t
        return pts

    def evaluate(self, t):
        if self.part == "large":
            times, sizes = self.jumps
            t = np.atleast_1d(np.asarray(t, dtype=float))
            if np.any(t < 0) or np.any(t > self.T):
                raise ValueError("t outside [0, T]")
            cums = np.concatenate([[0.0], np.cumsum(sizes)])
            return cums[np.searchsorted(times, t, side="right")]
        return self.sheet.evaluate(self.points(t))

    def jump_partial_sums(self):
        times, sizes = self.jumps
        return [(i + 1, float(s), float(z)) for i, (s, z) in enumerate(zip(times, np.cumsum(sizes)))]

    def grid_times(self):
        if self.part == "large":
            return np.array([0.0, self.T])
        return self.sheet.axes()[self.axis]

    @property
    def has_continuous_part(self) -> bool:
        tr = self.sheet.triplet
        return self.part != "large" and (tr.gamma != 0 or tr.sigma != 0 or len(self.sheet.small_size) > 0)


def slice(sheet: Skeleton, axis: int, fixed, part: str = "all") -> SliceView:  # noqa: A001
    """``t -> X`` along ``axis`` with the other coordinates held at ``fixed`` (0-based axis)."""
    if part not in ("all", "large"):
        raise ValueError("part must be 'all' or 'large'")
    axis, fixed = _slice_args(sheet, axis, fixed)
    return SliceView(sheet, axis, fixed, part)


# ---------------------------------------------------------------------------


def _simulate_small(nu, T, n_bands, seed):
    d = len(T)
    vol = math.prod(T)
    pos, size, band = [], [], []
    comp = 0.0
    for n in range(n_bands):
        mass = nu.band_mass(n)
        if mass <= 0:
            continue
        comp += nu.band_mean(n)
        rng = derive_rng(seed, SMALL_JUMPS, n)
        k = int(rng.poisson(mass * vol))
        pos.append(rng.random((k, d)) * np.asarray(T))
        size.append(nu.sample_band(n, rng, k) if k else np.zeros(0))
        band.append(np.full(k, n))
    if pos:
        return np.concatenate(pos), np.concatenate(size), np.concatenate(band), comp
    return np.zeros((0, d)), np.zeros(0), np.zeros(0, int), comp


def _simulate_brownian(T, cells, seed):
    rng = derive_rng(seed, BROWNIAN)
    dt = [t / n for t, n in zip(T, cells)]
    incr = rng.standard_normal(cells) * math.sqrt(math.prod(dt))
    for ax in range(len(T)):
        incr = np.cumsum(incr, axis=ax)
    return np.pad(incr, [(1, 0)] * len(T))


def simulate_sheet(triplet: LevyTriplet, T, grid_dt=None, eps: float = DEFAULT_EPS, seed: int = 0,
                   d: Optional[int] = None, max_bands: int = MAX_BANDS) -> Skeleton:
    """Simulate the field on ``[0, T]^d`` (``T`` scalar) or on a box with per-axis ``T``.

    Large jumps: ``Poisson(lambda Leb(box))`` points, uniform positions, sizes
    from the normalized restriction of ``nu`` to ``|x| > 1``. Small jumps:
    one compensated compound Poisson sheet per dyadic band down to ``eps``.
    Brownian sheet: cumulative sums of independent ``N(0, cell volume)``.
    """
    if np.isscalar(T):
        if d is None:
            d = 1
        T = (float(T),) * d
    T = tuple(float(t) for t in T)
    if d is not None and len(T) != d:
        raise ValueError("len(T) must equal d")
    if not T or any(not t > 0 for t in T):
        raise ValueError("T must be > 0 on every axis")
    nu = triplet.nu
    n_bands = check_bands(nu, eps, max_bands)
    dt, cells = default_grid(T, grid_dt)

    lam = nu.large_jump_mass()
    rng = derive_rng(seed, LARGE_JUMPS)
    k = int(rng.poisson(lam * math.prod(T))) if lam > 0 else 0
    jpos = rng.random((k, len(T))) * np.asarray(T)
    jsize = nu.sample_large(rng, k) if k else np.zeros(0)

    spos, ssize, sband, comp = _simulate_small(nu, T, n_bands, seed)
    W = _simulate_brownian(T, cells, seed) if triplet.sigma > 0 else None
    return Skeleton(triplet, T, dt, cells, float(eps), n_bands, int(seed),
                    _frozen(jpos), _frozen(jsize), _frozen(spos), _frozen(ssize), _frozen(sband, int),
                    float(comp), float(neglected_variance(nu, n_bands)), None if W is None else _frozen(W))


def _boxes_overlap(b1, b2) -> bool:
    (a1, c1), (a2, c2) = b1, b2
    return all(x1 < y2 and x2 < y1 for x1, y1, x2, y2 in zip(a1, c1, a2, c2))


def independence_check(sheets: Iterable[Skeleton], boxes) -> np.ndarray:
    """Empirical correlation matrix of increments over pairwise disjoint boxes ``[(a, b), ...]``."""
    boxes = [(np.atleast_1d(np.asarray(a, float)), np.atleast_1d(np.asarray(b, float))) for a, b in boxes]
    if len(boxes) < 2:
        raise ValueError("need at least two boxes")
    for i in range(len(boxes)):
        for j in range(i + 1, len(boxes)):
            if _boxes_overlap(boxes[i], boxes[j]):
                raise ValueError(f"boxes {i} and {j} overlap")
    rows = [[sk.increment(a, b) for a, b in boxes] for sk in sheets]
    return np.corrcoef(np.asarray(rows).T)
