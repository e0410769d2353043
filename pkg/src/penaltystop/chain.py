"""One-step transition kernels approximating diffusions, with optional jumps.

Kernels are sparse row-stochastic matrices.  Diffusion chains follow the
explicit nearest-neighbour Kushner-Dupuis construction: central differences
for the drift where they give non-negative weights, upwind otherwise, and
reflection at both ends of the grid.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from numba import njit, prange

from . import _rng
from .lattice import StateGrid

ROW_SUM_TOL = 1e-12


class ConfigurationError(ValueError):
    """Raised when inputs violate a constructor's preconditions."""


@dataclass(frozen=True)
class TransitionKernel:
    probs: sp.csr_matrix
    h: float
    description: str = ""

    def __post_init__(self):
        P = sp.csr_matrix(self.probs, dtype=float)
        P.sum_duplicates()
        P.sort_indices()
        if P.shape[0] != P.shape[1]:
            raise ConfigurationError("transition table must be square")
        if not self.h > 0:
            raise ConfigurationError("time step h must be positive")
        if P.nnz and P.data.min() < 0:
            raise ConfigurationError("negative transition probability")
        rows = np.asarray(P.sum(axis=1)).ravel()
        bad = np.flatnonzero(np.abs(rows - 1.0) > ROW_SUM_TOL)
        if bad.size:
            raise ConfigurationError(
                f"row {bad[0]} sums to {rows[bad[0]]!r}, not 1"
            )
        object.__setattr__(self, "probs", P)

    @property
    def n_states(self) -> int:
        return self.probs.shape[0]

    def dense(self) -> np.ndarray:
        return self.probs.toarray()

    def moments(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Conditional mean and variance of the one-step displacement."""
        P = self.probs
        x = np.asarray(points, dtype=float)
        mean = P @ x - x
        second = P @ (x * x) - 2 * x * (P @ x) + x * x
        return mean, second - mean**2

    def cdf_arrays(self):
        """CSR pieces with cumulative row weights, for sampling."""
        P = self.probs
        cum = np.empty_like(P.data)
        for i in range(P.shape[0]):
            lo, hi = P.indptr[i], P.indptr[i + 1]
            cum[lo:hi] = np.cumsum(P.data[lo:hi])
        return P.indptr.astype(np.int64), P.indices.astype(np.int64), cum

    def to_csv(self, path) -> None:
        coo = self.probs.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(path, "w", newline="") as fh:
            fh.write(f"# kernel h={self.h!r} {self.description}\n")
            w = csv.writer(fh)
            w.writerow(["row", "col", "prob"])
            for k in order:
                w.writerow([int(coo.row[k]), int(coo.col[k]), format(coo.data[k], ".17g")])


def build_diffusion_chain(
    grid: StateGrid,
    drift: Callable[[np.ndarray], np.ndarray],
    vol: Callable[[np.ndarray], np.ndarray],
    h: float,
) -> TransitionKernel:
    """Nearest-neighbour chain for dX = drift(X) dt + vol(X) dW.

    The one-step mean is drift*h exactly at every point not touching an edge.
    The one-step variance is vol^2*h - (drift*h)^2 where central weights are
    admissible (vol^2 >= dx*|drift|), and picks up an extra h*dx*|drift|
    where the upwind fallback is used.

    Raises ConfigurationError naming the worst point when
    h*(vol^2/dx^2 + |drift|/dx) > 1 anywhere.
    """
    x = grid.points
    dx = grid.spacing
    mu = np.broadcast_to(np.asarray(drift(x), dtype=float), x.shape)
    sig = np.broadcast_to(np.asarray(vol(x), dtype=float), x.shape)
    if np.any(sig <= 0) or not np.all(np.isfinite(sig)):
        raise ConfigurationError("volatility must be positive and finite")
    cfl = h * (sig**2 / dx**2 + np.abs(mu) / dx)
    worst = int(np.argmax(cfl))
    if cfl[worst] > 1.0 + 1e-12:
        raise ConfigurationError(
            f"CFL condition violated: h*(vol^2/dx^2+|drift|/dx) = {cfl[worst]:.6g} > 1 "
            f"at x = {x[worst]:.6g} (index {worst})"
        )
    var = sig**2
    central = var >= dx * np.abs(mu)
    up = np.where(
        central,
        h * (var + dx * mu) / (2 * dx**2),
        h * (var / 2 + dx * np.maximum(mu, 0.0)) / dx**2,
    )
    down = np.where(
        central,
        h * (var - dx * mu) / (2 * dx**2),
        h * (var / 2 + dx * np.maximum(-mu, 0.0)) / dx**2,
    )
    n = x.size
    # reflect at the truncation edges: the outward move stays put
    # at CFL = 1 rounding can leave -1e-16 here
    stay = np.maximum(1.0 - up - down, 0.0)
    stay[0] += down[0]
    stay[-1] += up[-1]
    rows = np.concatenate([np.arange(n), np.arange(1, n), np.arange(n - 1)])
    cols = np.concatenate([np.arange(n), np.arange(n - 1), np.arange(1, n)])
    vals = np.concatenate([stay, down[1:], up[:-1]])
    P = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    P.eliminate_zeros()
    return TransitionKernel(P, h, f"diffusion dx={dx!r}")


def add_jumps(kernel: TransitionKernel, rate: float, jump_law) -> TransitionKernel:
    """Mix in a jump law: (1 - rate*h) * kernel + rate*h * jump_law."""
    if rate < 0:
        raise ConfigurationError("jump rate must be non-negative")
    w = rate * kernel.h
    if w > 1.0:
        raise ConfigurationError(f"rate*h = {w!r} exceeds 1")
    J = sp.csr_matrix(jump_law, dtype=float)
    if J.shape != kernel.probs.shape:
        raise ConfigurationError("jump law shape does not match kernel")
    TransitionKernel(J, kernel.h)  # validates stochasticity
    if w == 0.0:
        return kernel
    P = (1.0 - w) * kernel.probs + w * J
    return TransitionKernel(P, kernel.h, f"{kernel.description} + jumps(rate={rate!r})")


def uniform_jump_law(n_states: int, targets) -> sp.csr_matrix:
    """Every row jumps uniformly onto the given target indices."""
    targets = np.asarray(targets, dtype=int)
    if targets.size == 0:
        raise ConfigurationError("jump law needs at least one target")
    rows = np.repeat(np.arange(n_states), targets.size)
    cols = np.tile(targets, n_states)
    vals = np.full(rows.size, 1.0 / targets.size)
    return sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))


@njit(cache=True, inline="always")
def _next_state(indptr, indices, cum, i, u):
    lo = indptr[i]
    hi = indptr[i + 1]
    for j in range(lo, hi - 1):
        if u < cum[j]:
            return indices[j]
    return indices[hi - 1]


@njit(cache=True)
def _sample_path(indptr, indices, cum, start, steps, seed, path_index):
    out = np.empty(steps + 1, dtype=np.int64)
    key = _rng.path_key(np.uint64(seed), np.uint64(path_index))
    i = start
    out[0] = i
    for k in range(steps):
        i = _next_state(indptr, indices, cum, i, _rng.uniform(key, k))
        out[k + 1] = i
    return out


@njit(cache=True, parallel=True)
def _sample_paths(indptr, indices, cum, starts, steps, seed):
    n = starts.size
    out = np.empty((n, steps + 1), dtype=np.int64)
    for p in prange(n):
        key = _rng.path_key(np.uint64(seed), np.uint64(p))
        i = starts[p]
        out[p, 0] = i
        for k in range(steps):
            i = _next_state(indptr, indices, cum, i, _rng.uniform(key, k))
            out[p, k + 1] = i
    return out


def sample_path(kernel: TransitionKernel, start: int, steps: int, seed: int) -> np.ndarray:
    """State indices x_0..x_steps of one chain path; deterministic in `seed`.

    This is path 0 of the family drawn by `sample_paths` with the same seed.
    """
    if not 0 <= start < kernel.n_states:
        raise IndexError(f"start state {start} out of range")
    if steps < 0:
        raise ValueError("steps must be non-negative")
    indptr, indices, cum = kernel.cdf_arrays()
    return _sample_path(indptr, indices, cum, np.int64(start), np.int64(steps), np.uint64(seed), np.uint64(0))


def sample_paths(kernel: TransitionKernel, start, steps: int, n_paths: int, seed: int) -> np.ndarray:
    """Array of shape (n_paths, steps + 1); path p uses the key derived from (seed, p)."""
    starts = np.broadcast_to(np.asarray(start, dtype=np.int64), (n_paths,)).copy()
    if np.any((starts < 0) | (starts >= kernel.n_states)):
        raise IndexError("start state out of range")
    indptr, indices, cum = kernel.cdf_arrays()
    return _sample_paths(indptr, indices, cum, starts, np.int64(steps), np.uint64(seed))
