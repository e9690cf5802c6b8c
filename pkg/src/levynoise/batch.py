"""Vectorized Monte-Carlo kernels for the large-replicate experiments.

Each kernel draws whole ``CHUNK``-sized blocks from the stream of its chunk
index and truncates at the end, so replicate ``j`` is a function of
``(seed, j)`` alone. The laws are the ones of the per-skeleton simulators;
only the bookkeeping is batched.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import CHUNK, chunk_rngs


@dataclass(frozen=True)
class McMean:
    mean: float
    stderr: float
    n: int

    def within(self, target: float, k: float = 3.0) -> bool:
        return abs(self.mean - target) <= k * self.stderr


def _mean(x: np.ndarray) -> McMean:
    return McMean(float(x.mean()), float(x.std(ddof=1) / math.sqrt(len(x))), len(x))


def gamma_arrival_times(seed: int, n_rep: int, n_max: int, lam: float = 1.0) -> np.ndarray:
    """``(n_rep, n_max)`` array of Poisson arrival times ``S_1 < ... < S_{n_max}`` with rate ``lam``."""
    if not lam > 0:
        raise ValueError("lam must be > 0")
    out = np.empty((n_rep, n_max))
    for start, stop, rng in chunk_rngs(seed, n_rep, 11, n_max):
        s = np.cumsum(rng.exponential(1.0 / lam, (CHUNK, n_max)), axis=1)
        out[start:stop] = s[: stop - start]
    return out


def gamma_inverse_moments(seed: int, n_rep: int, ns, lam: float = 1.0) -> dict:
    """MC estimates of ``E S_n^-2`` and ``E S_n^-3`` for each ``n`` in ``ns``."""
    ns = sorted(int(n) for n in ns)
    S = gamma_arrival_times(seed, n_rep, ns[-1], lam)
    return {n: {"inv2": _mean(S[:, n - 1] ** -2.0), "inv3": _mean(S[:, n - 1] ** -3.0)} for n in ns}


def bump_miss_1d(seed: int, n_rep: int, n_range, lam: float = 1.0, k: int = 2) -> dict:
    """Frequency of ``A_{n,k}^c``: another jump lands in ``]S_n, S_n + S_n^-k[``.

    With exponential gaps ``T_{n+1} = S_{n+1} - S_n`` the event is ``T_{n+1} < S_n^-k``.
    """
    ns = list(n_range)
    S = gamma_arrival_times(seed, n_rep, max(ns) + 1, lam)
    out = {}
    for n in ns:
        miss = (S[:, n] - S[:, n - 1]) < S[:, n - 1] ** (-float(k))
        out[n] = _mean(miss.astype(float))
    return out


def bump_miss_dd(seed: int, n_rep: int, n_range, d: int = 2, lam: float = 1.0, horizon: float = 80.0,
                 width: float = 2.0) -> tuple:
    """Frequency of ``A_{n,3}^c`` for a compound Poisson sheet on ``[0, width]^{d-1} x [0, horizon]``.

    ``S_n`` is the ``n``-th jump time of ``L_t = X^P_(1, ..., 1, t)``; a miss is
    a jump in ``[0, (1 + S_n^-3, ..., S_n + S_n^-3)) \\ [0, (1, ..., 1, S_n)]``.
    Returns ``(results, short)`` where ``short`` counts replicates whose slice
    had fewer than ``max(n_range)`` jumps (scored as misses).
    """
    if d < 2:
        raise ValueError("use bump_miss_1d for d = 1")
    ns = list(n_range)
    vol = width ** (d - 1) * horizon
    misses = {n: np.zeros(n_rep) for n in ns}
    short = 0
    for start, stop, rng in chunk_rngs(seed, n_rep, 12, d):
        counts = rng.poisson(lam * vol, CHUNK)
        kmax = int(counts.max())
        total = int(counts.sum())
        pos = rng.random((total, d))
        pos[:, : d - 1] *= width
        pos[:, d - 1] *= horizon
        # pad per replicate; padding sits at +inf
        tau = np.full((CHUNK, kmax, d), np.inf)
        row = np.repeat(np.arange(CHUNK), counts)
        col = np.arange(total) - np.repeat(np.cumsum(counts) - counts, counts)
        tau[row, col] = pos
        head = tau[:, :, : d - 1]
        last = tau[:, :, d - 1]
        in_slice = np.all(head <= 1.0, axis=-1)
        s_sorted = np.sort(np.where(in_slice, last, np.inf), axis=1)
        m = stop - start
        for n in ns:
            S = s_sorted[:, n - 1] if n <= kmax else np.full(CHUNK, np.inf)
            ok = np.isfinite(S)
            Sx = np.where(ok, S, 1.0)
            h = Sx ** -3.0
            inside_upper = np.all(head < (1.0 + h)[:, None, None], axis=-1) & (last < (Sx + h)[:, None])
            below_lower = in_slice & (last <= Sx[:, None])
            miss = np.any(inside_upper & ~below_lower, axis=1) | ~ok
            misses[n][start:stop] = miss[:m]
        if ns:
            n_top = max(ns)
            short += int(np.sum(~np.isfinite(s_sorted[:m, n_top - 1]))) if n_top <= kmax else m
    return {n: _mean(v) for n, v in misses.items()}, short


def miss_bound_1d(n: int, lam: float = 1.0) -> float:
    """``E(lam / S_n^2) = lam^3 / ((n-1)(n-2))``."""
    return lam ** 3 / ((n - 1) * (n - 2))


def miss_bound_dd(n: int, d: int = 2, lam: float = 1.0) -> float:
    """``2 lam^n/(n-1)! + lam^2 3^{d-1}/((n-1)(n-2)) + lam^3 2^{d-1}/((n-1)(n-2)(n-3))``."""
    return (2 * lam ** n / math.factorial(n - 1) + lam ** 2 * 3 ** (d - 1) / ((n - 1) * (n - 2))
            + lam ** 3 * 2 ** (d - 1) / ((n - 1) * (n - 2) * (n - 3)))


def compensated_small_sum(nu, n_bands: int, seed: int, n_rep: int, volume: float = 1.0) -> McMean:
    """MC mean of the compensated small-jump sum ``sum_n (sum_band x - volume * band_mean(n))``.

    Band ``n`` contributes ``Poisson(volume * band_mass(n))`` jumps drawn with
    :meth:`sample_band`; the exact mean of the result is zero.
    """
    out = np.zeros(n_rep)
    for start, stop, rng in chunk_rngs(seed, n_rep, 13, n_bands):
        acc = np.zeros(CHUNK)
        for n in range(n_bands):
            mass = nu.band_mass(n)
            if mass <= 0:
                continue
            counts = rng.poisson(volume * mass, CHUNK)
            sizes = nu.sample_band(n, rng, int(counts.sum()))
            acc += np.bincount(np.repeat(np.arange(CHUNK), counts), weights=sizes, minlength=CHUNK)
            acc -= volume * nu.band_mean(n)
        out[start:stop] = acc[: stop - start]
    return _mean(out)
