"""One-parameter Lévy processes through the Lévy–Itô decomposition.

``X_t = gamma t + sigma W_t + X^P_t + X^M_t``: the compound Poisson part is an
exact event list, the compensated small jumps are summed band by band, and the
Brownian motion lives on a regular grid with linear interpolation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .levy_measure import LevyTriplet
from .seeding import LARGE_JUMPS, derive_rng
from .sheet_sim import (DEFAULT_EPS, MAX_BANDS, Skeleton, _frozen, _simulate_brownian, _simulate_small,
                        check_bands, default_grid, neglected_variance)

BLOCK = 1024


@dataclass(frozen=True, eq=False)
class PathSkeleton1D(Skeleton):
    """A :class:`Skeleton` with ``d = 1`` whose jumps are sorted in time."""

    @property
    def horizon(self) -> float:
        return self.T[0]

    @property
    def jump_times(self) -> np.ndarray:
        return self.jump_pos[:, 0]

    @property
    def jump_sizes(self) -> np.ndarray:
        return self.jump_size

    @property
    def partial_sums(self) -> np.ndarray:
        return np.cumsum(self.jump_size)

    def evaluate(self, t):
        """``X_t`` for scalar or array ``t`` in ``[0, T]``; right-continuous at jump times."""
        arr = np.asarray(t, dtype=float)
        if np.any(arr < 0) or np.any(arr > self.horizon):
            raise ValueError(f"t must lie in [0, {self.horizon}]")
        out = super().evaluate(arr[..., None])
        return out.item() if np.ndim(t) == 0 else out

    def grid_times(self) -> np.ndarray:
        return self.axes()[0]

    @property
    def has_continuous_part(self) -> bool:
        tr = self.triplet
        return tr.gamma != 0 or tr.sigma != 0 or len(self.small_size) > 0


def _large_jumps(nu, T, seed):
    lam = nu.large_jump_mass()
    if lam <= 0:
        return np.zeros(0), np.zeros(0)
    # exponential gaps and sizes come in fixed blocks, so the jump record on
    # [0, T] is a prefix of the record on any longer horizon
    times, sizes, last, b = [], [], 0.0, 0
    while last <= T:
        gaps = derive_rng(seed, LARGE_JUMPS, 0, b).exponential(1.0 / lam, BLOCK)
        s = last + np.cumsum(gaps)
        times.append(s)
        sizes.append(nu.sample_large(derive_rng(seed, LARGE_JUMPS, 1, b), BLOCK))
        last = s[-1]
        b += 1
    times, sizes = np.concatenate(times), np.concatenate(sizes)
    keep = times <= T
    return times[keep], sizes[keep]


def simulate_path(triplet: LevyTriplet, T: float, grid_dt=None, eps: float = DEFAULT_EPS, seed: int = 0,
                  max_bands: int = MAX_BANDS) -> PathSkeleton1D:
    """Simulate ``X`` on ``[0, T]``; ``grid_dt`` defaults to ``1e-3 T``."""
    if not T > 0:
        raise ValueError(f"T must be > 0, got {T}")
    if seed < 0:
        raise ValueError("seed must be non-negative")
    nu = triplet.nu
    n_bands = check_bands(nu, eps, max_bands)
    dt, cells = default_grid((float(T),), grid_dt)
    jt, jy = _large_jumps(nu, float(T), seed)
    spos, ssize, sband, comp = _simulate_small(nu, (float(T),), n_bands, seed)
    order = np.argsort(spos[:, 0], kind="stable")
    W = _simulate_brownian((float(T),), cells, seed) if triplet.sigma > 0 else None
    return PathSkeleton1D(triplet, (float(T),), dt, cells, float(eps), n_bands, int(seed),
                          _frozen(jt[:, None]), _frozen(jy), _frozen(spos[order]), _frozen(ssize[order]),
                          _frozen(sband[order], int), float(comp), float(neglected_variance(nu, n_bands)),
                          None if W is None else _frozen(W))


def evaluate(path: PathSkeleton1D, t):
    return path.evaluate(t)


def jump_partial_sums(path) -> list:
    """``[(n, S_n, Z_n)]`` with ``Z_n = Y_1 + ... + Y_n``."""
    if hasattr(path, "jump_partial_sums"):
        return path.jump_partial_sums()
    z = np.cumsum(path.jump_size)
    return [(i + 1, float(s), float(v)) for i, (s, v) in enumerate(zip(path.jump_times, z))]


def path_from_jumps(times, sizes, T: float, gamma: float = 0.0) -> PathSkeleton1D:
    """Deterministic pure-jump path with the given record (used for examples and tests)."""
    from .levy_measure import FiniteAtomic
    times = np.asarray(times, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if np.any(np.diff(times) <= 0):
        raise ValueError("jump times must be strictly increasing")
    dt, cells = default_grid((float(T),))
    return PathSkeleton1D(LevyTriplet(gamma, 0.0, FiniteAtomic()), (float(T),), dt, cells, 1.0, 0, 0,
                          _frozen(times[:, None]), _frozen(sizes), _frozen(np.zeros((0, 1))),
                          _frozen(np.zeros(0)), _frozen(np.zeros(0), int), 0.0, 0.0, None)
