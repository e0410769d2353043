"""Stopping regions, Monte Carlo evaluation of stopping rules, exit-time tails."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from . import _rng
from .chain import TransitionKernel, _next_state
from .lattice import RegionGrid
from .payoff import Mode, PayoffSpec, discount_weights, exit_constrained, horizon_steps, stop_payoff
from .penalty_solver import ValueField

INFINITE_BETA = float("inf")


@dataclass(frozen=True)
class StoppingRegion:
    """Boolean stop mask over (time slice, state).

    In the exit-constrained modes the mask is true on every non-interior
    state, since stopping is forced at exit.
    """

    mask: np.ndarray
    epsilon: float
    source_beta: float = INFINITE_BETA

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.ndim != 2:
            raise ValueError("mask must be (slices, states)")
        object.__setattr__(self, "mask", m)

    def interior_stops(self, region: RegionGrid, slice_index: int = 0) -> np.ndarray:
        """Indices of interior states where the rule stops."""
        return np.flatnonzero(self.mask[slice_index] & region.interior)

    def to_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            w = csv.writer(fh)
            w.writerow(["slice", "state", "stop"])
            for k, row in enumerate(self.mask):
                for i, v in enumerate(row):
                    w.writerow([k, i, int(v)])


def _slice_times(w: ValueField, spec: PayoffSpec) -> np.ndarray:
    if spec.mode is Mode.FINITE:
        if w.times is None:
            raise ValueError("finite-horizon field carries no time stamps")
        return np.asarray(w.times)
    return np.zeros(w.values.shape[0])


def build_region_eps(w: ValueField, spec: PayoffSpec, region: RegionGrid, epsilon: float = 0.0) -> StoppingRegion:
    """Stop where w <= stop payoff + epsilon, or wherever exit forces it."""
    if epsilon < 0:
        raise ValueError("epsilon must be >= 0")
    if w.values.shape[1] != region.grid.size:
        raise ValueError("value field and region sizes differ")
    times = _slice_times(w, spec)
    mask = np.empty(w.values.shape, dtype=bool)
    forced = ~region.interior if exit_constrained(spec) else np.zeros(region.grid.size, dtype=bool)
    for k, t in enumerate(times):
        mask[k] = (w.values[k] <= stop_payoff(spec, region, t) + epsilon) | forced
    return StoppingRegion(mask, float(epsilon), float(w.beta))


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    n_paths: int

    def __iter__(self):
        yield self.mean
        yield self.se

    def within(self, target: float, n_se: float = 4.0, extra: float = 0.0) -> bool:
        return abs(self.mean - target) <= n_se * self.se + extra


def _summarize(samples: np.ndarray) -> Estimate:
    n = samples.size
    if np.all(samples == samples[0]):
        return Estimate(float(samples[0]), 0.0, n)
    mean = float(np.sum(samples) / n)  # numpy's pairwise summation, order fixed
    var = float(np.sum((samples - mean) ** 2) / (n - 1)) if n > 1 else 0.0
    return Estimate(mean, float(np.sqrt(var / n)), n)


@njit(cache=True, parallel=True)
def _policy_samples(indptr, indices, cum, f, S, mask, frozen, start, k0, n_steps, terminal, a, d, seed, n_paths):
    m = S.shape[0]
    out = np.empty(n_paths)
    for p in prange(n_paths):
        key = _rng.path_key(np.uint64(seed), np.uint64(p))
        i = start
        disc = 1.0
        total = 0.0
        done = False
        for k in range(n_steps):
            s = min(k0 + k, m - 1)
            if frozen[i] or mask[s, i]:
                total += disc * S[s, i]
                done = True
                break
            total += disc * a * f[s, i]
            disc *= d
            i = _next_state(indptr, indices, cum, i, _rng.uniform(key, k))
        if not done and terminal:
            total += disc * S[min(k0 + n_steps, m - 1), i]
        out[p] = total
    return out


def default_max_steps(spec: PayoffSpec, h: float, bound: float, tol: float = 1e-12) -> int:
    """Steps after which the discounted remainder is below `tol`."""
    if bound <= tol:
        return 1
    return int(np.ceil(np.log(bound / tol) / (spec.alpha * h)))


def evaluate_policy(kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec, stop_region: StoppingRegion,
                    start: int, s0: float = 0.0, n_paths: int = 10_000, seed: int = 0,
                    max_steps: int | None = None) -> Estimate:
    """Mean and standard error of the payoff collected by the stop-at-first-mask-entry rule.

    Each path draws its uniforms from (seed, path index, step), so the result
    does not depend on the thread count.  In the time-homogeneous modes the
    paths are cut after `max_steps` steps (by default, once the discount
    factor has pushed the remainder below 1e-12 of the payoff scale), and a
    mask with several slices is read as a rule that depends on the step
    count, its last slice applying from then on.
    """
    if n_paths < 100:
        raise ValueError("n_paths must be >= 100")
    if not 0 <= start < kernel.n_states:
        raise IndexError(f"start state {start} out of range")
    h = kernel.h
    a, d = discount_weights(spec.alpha, h)
    frozen = ~region.interior if exit_constrained(spec) else np.zeros(region.grid.size, dtype=bool)
    mask = stop_region.mask
    if spec.mode is Mode.FINITE:
        N = horizon_steps(spec, h)
        n_steps = horizon_steps(spec, h, s0)  # also checks s0 is on the time grid
        k0 = N - n_steps
        times = h * np.arange(N + 1)
        terminal = True
    else:
        k0 = 0
        # a multi-slice mask gives a time-dependent rule; its last slice applies thereafter
        times = np.zeros(mask.shape[0])
        if max_steps is None:
            nf, ns = spec.sup_norm(region)
            max_steps = default_max_steps(spec, h, nf / spec.alpha + ns + 1.0)
        n_steps = int(max_steps)
        terminal = False
    if mask.shape[0] not in (1, times.size):
        raise ValueError("stop mask has the wrong number of slices")
    if spec.mode is Mode.FINITE:
        f = np.stack([spec.arrays(region, t)[0] for t in times])
        S = np.stack([stop_payoff(spec, region, t) for t in times])
    else:
        f = np.repeat(spec.arrays(region, 0.0)[0][None, :], times.size, axis=0)
        S = np.repeat(stop_payoff(spec, region, 0.0)[None, :], times.size, axis=0)
    if mask.shape[0] == 1 and times.size > 1:
        mask = np.repeat(mask, times.size, axis=0)
    indptr, indices, cum = kernel.cdf_arrays()
    samples = _policy_samples(indptr, indices, cum, f, S, mask, frozen, np.int64(start), np.int64(k0),
                              np.int64(n_steps), terminal, a, d, np.uint64(seed), np.int64(n_paths))
    return _summarize(samples)


@njit(cache=True, parallel=True)
def _survival(indptr, indices, cum, inside, start, n_steps, seed, n_paths):
    out = np.empty(n_paths)
    for p in prange(n_paths):
        key = _rng.path_key(np.uint64(seed), np.uint64(p))
        i = start
        alive = inside[i]
        k = 0
        while alive and k < n_steps:
            i = _next_state(indptr, indices, cum, i, _rng.uniform(key, k))
            alive = inside[i]
            k += 1
        out[p] = 1.0 if alive else 0.0
    return out


def estimate_exit_tail(kernel: TransitionKernel, region: RegionGrid, start: int, eta: float,
                       n_paths: int = 10_000, seed: int = 0) -> Estimate:
    """Monte Carlo estimate of P(exit time > eta) from state index `start`.

    The chain exits at the first step that lands outside the interior.
    """
    n = eta / kernel.h
    n_steps = int(round(n))
    if eta < 0 or abs(n - n_steps) > 1e-9 * max(1.0, n):
        raise ValueError(f"eta = {eta} is not a non-negative multiple of h = {kernel.h}")
    if not 0 <= start < kernel.n_states:
        raise IndexError(f"start state {start} out of range")
    indptr, indices, cum = kernel.cdf_arrays()
    samples = _survival(indptr, indices, cum, region.interior, np.int64(start), np.int64(n_steps),
                        np.uint64(seed), np.int64(n_paths))
    return _summarize(samples)
