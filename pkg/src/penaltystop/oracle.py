"""Brute-force reference values on small chains.

`snell_backward` computes the discrete Snell envelope by backward induction,
with no penalty involved.  `control_enum` maximizes the controlled
(killed-at-rate-b) functional over every bang-bang Markov control, which is
an independent route to the penalized value.
"""

from __future__ import annotations

import hashlib
import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np
import scipy.sparse as sp
from numba import njit, prange

from .chain import TransitionKernel
from .lattice import Label, RegionGrid, StateGrid, build_region
from .payoff import (
    Mode,
    PayoffSpec,
    TabulatedPayoff,
    discount_weights,
    exit_constrained,
    horizon_steps as _horizon_steps,
    stop_payoff,
)

MAX_POLICIES = 2**20


class OracleMethod(Enum):
    SNELL_BACKWARD = "snell_backward"
    CONTROL_ENUM = "control_enum"


class OracleRefused(ValueError):
    """The requested enumeration is too large."""


@dataclass
class OracleResult:
    values: np.ndarray
    method: OracleMethod
    instance_hash: str
    tail_bound: float = 0.0
    best_policy: int | None = None

    @property
    def stationary(self) -> np.ndarray:
        return self.values[0]


def instance_hash(kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec, *extra) -> str:
    """sha256 over the chain, labels, tabulated payoffs and any extra parameters."""
    m = hashlib.sha256()
    P = kernel.probs
    for arr in (P.indptr, P.indices, P.data, region.labels, region.grid.points):
        m.update(np.ascontiguousarray(arr).tobytes())
    times = [0.0]
    if spec.mode is Mode.FINITE:
        times = kernel.h * np.arange(_horizon_steps(spec, kernel.h) + 1)
    for t in times:
        for arr in spec.arrays(region, t):
            m.update(arr.tobytes())
    m.update(repr((kernel.h, spec.alpha, spec.mode.value, spec.boundary_convention.value, spec.horizon, extra)).encode())
    return m.hexdigest()


def _frozen(spec: PayoffSpec, region: RegionGrid) -> np.ndarray:
    if exit_constrained(spec):
        return ~region.interior
    return np.zeros(region.grid.size, dtype=bool)


def _slice_payoffs(spec, region, h, n_slices):
    times = h * np.arange(n_slices)
    if spec.mode is not Mode.FINITE:
        times = np.zeros(n_slices)
    f = np.stack([spec.arrays(region, t)[0] for t in times])
    S = np.stack([stop_payoff(spec, region, t) for t in times])
    return f, S


def snell_backward(kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec,
                   horizon_steps: int | None = None) -> OracleResult:
    """Snell envelope over `horizon_steps` slices, stopping forced at the last one.

    In FINITE mode the horizon defaults to T/h, every slice is returned and
    the tail bound is 0.  In the time-homogeneous modes only the first slice
    is returned: it approximates the infinite-horizon value from below, and
    `tail_bound` = e^{-alpha N h} (|f|/alpha + 2 |payoff|) bounds the gap.
    """
    h = kernel.h
    if spec.mode is Mode.FINITE:
        N = _horizon_steps(spec, h) if horizon_steps is None else int(horizon_steps)
    else:
        if horizon_steps is None:
            raise ValueError("time-homogeneous modes need an explicit horizon_steps")
        N = int(horizon_steps)
    if N < 0:
        raise ValueError("horizon_steps must be >= 0")
    a, d = discount_weights(spec.alpha, h)
    frozen = _frozen(spec, region)
    f, S = _slice_payoffs(spec, region, h, N + 1 if spec.mode is Mode.FINITE else 1)
    P = kernel.probs
    if spec.mode is Mode.FINITE:
        out = np.empty((N + 1, kernel.n_states))
        out[N] = S[N]
        for k in range(N - 1, -1, -1):
            cont = a * f[k] + d * (P @ out[k + 1])
            out[k] = np.where(frozen, S[k], np.maximum(S[k], cont))
        tail = 0.0
    else:
        # payoffs do not depend on time, so only the running slice is kept
        v = S[0].copy()
        for _ in range(N):
            v = np.where(frozen, S[0], np.maximum(S[0], a * f[0] + d * (P @ v)))
        out = v[None, :]
        nf = float(np.max(np.abs(f[0])))
        ns = float(np.max(np.abs(S[0])))
        tail = d**N * (nf / spec.alpha + 2 * ns)
    return OracleResult(out, OracleMethod.SNELL_BACKWARD, instance_hash(kernel, region, spec, N), tail)


def steps_for_tail(spec: PayoffSpec, h: float, target: float, bound: float) -> int:
    """Smallest N with e^{-alpha N h} * bound <= target."""
    if bound <= target:
        return 0
    return int(np.ceil(np.log(bound / target) / (spec.alpha * h)))


def _levels(beta: float, n_levels: int) -> np.ndarray:
    if n_levels < 2:
        raise ValueError("need at least the two levels 0 and beta")
    return np.linspace(0.0, beta, n_levels)


def _stationary_policy_value(P, a, d, f, S, frozen, kill):
    """Value of the stationary control with killing rates `kill` (one per state).

    Solves w = A (f + b (S - w)) + d P w on controllable states with w = S
    frozen elsewhere, i.e. w = (1 - pi_b) (A f + d P w) + pi_b S.
    """
    pi = a * kill / (1.0 + a * kill)
    c = ~frozen
    Pcc = P[np.ix_(c, c)]
    Pcf = P[np.ix_(c, frozen)]
    rhs = (1 - pi[c]) * (a * f[c] + d * (Pcf @ S[frozen])) + pi[c] * S[c]
    M = np.eye(c.sum()) - ((1 - pi[c]) * d)[:, None] * Pcc
    w = S.copy()
    w[c] = np.linalg.solve(M, rhs)
    return w


@njit(cache=True)
def _digits(code, base, n):
    out = np.empty(n, dtype=np.int64)
    for j in range(n):
        out[j] = code % base
        code //= base
    return out


@njit(cache=True, parallel=True)
def _finite_policy_values(P, a, d, f, S, frozen, pis, n_levels, n_policies):
    n_slices, n = S.shape
    n_ctrl = 0
    for i in range(n):
        if not frozen[i]:
            n_ctrl += 1
    out = np.empty((n_policies, n))
    for p in prange(n_policies):
        v = S[n_slices - 1].copy()
        nxt = np.empty(n)
        digits = _digits(p, n_levels, n_ctrl * (n_slices - 1))
        pos = 0
        for k in range(n_slices - 2, -1, -1):
            for i in range(n):
                if frozen[i]:
                    nxt[i] = S[k, i]
                    continue
                lvl = digits[pos]
                pos += 1
                m = 0.0
                for j in range(n):
                    m += P[i, j] * v[j]
                c = a * f[k, i] + d * m
                nxt[i] = c + pis[lvl] * (S[k, i] - c)
            v[:] = nxt
        out[p] = v
    return out


def _best(values: np.ndarray) -> tuple[np.ndarray, int | None]:
    best = values.max(axis=0)
    # lowest policy id attaining the pointwise maximum everywhere, if one does
    hit = np.flatnonzero(np.all(values >= best - 1e-12 * (1 + np.abs(best)), axis=1))
    return best, (int(hit[0]) if hit.size else None)


def control_enum(kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec, beta: float,
                 steps: int | None = None, n_levels: int = 2) -> OracleResult:
    """Maximize the killed functional over Markov controls with values on a level grid.

    Time-homogeneous modes: every stationary control b: state -> level is
    evaluated by an exact linear solve (no truncation).  FINITE mode: every
    control b: (slice, state) -> level over `steps` slices (default T/h) is
    evaluated by backward recursion, and the slice-0 values are returned.
    """
    a, d = discount_weights(spec.alpha, kernel.h)
    frozen = _frozen(spec, region)
    n_ctrl = int((~frozen).sum())
    levels = _levels(float(beta), n_levels)
    pis = a * levels / (1.0 + a * levels)
    P = kernel.dense()
    if spec.mode is Mode.FINITE:
        N = _horizon_steps(spec, kernel.h) if steps is None else int(steps)
        if N != _horizon_steps(spec, kernel.h):
            raise ValueError("steps must equal T/h in finite-horizon mode")
        n_policies = n_levels ** (n_ctrl * N)
        if n_policies > MAX_POLICIES:
            raise OracleRefused(
                f"{n_ctrl} controllable states x {N} slices at {n_levels} levels = {n_policies} policies "
                f"(limit {MAX_POLICIES})"
            )
        f, S = _slice_payoffs(spec, region, kernel.h, N + 1)
        vals = _finite_policy_values(P, a, d, f, S, frozen, pis, n_levels, n_policies)
    else:
        n_policies = n_levels**n_ctrl
        if n_policies > MAX_POLICIES:
            raise OracleRefused(f"{n_ctrl} controllable states at {n_levels} levels = {n_policies} policies")
        f, _, _ = spec.arrays(region, 0.0)
        S = stop_payoff(spec, region, 0.0)
        ctrl_idx = np.flatnonzero(~frozen)
        vals = np.empty((n_policies, kernel.n_states))
        for p, combo in enumerate(itertools.product(range(n_levels), repeat=n_ctrl)):
            kill = np.zeros(kernel.n_states)
            # first controllable state is the fastest-varying digit
            kill[ctrl_idx] = levels[np.asarray(combo[::-1], dtype=int)]
            vals[p] = _stationary_policy_value(P, a, d, f, S, frozen, kill)
    best, pid = _best(vals)
    key = instance_hash(kernel, region, spec, float(beta), steps, n_levels)
    return OracleResult(best[None, :], OracleMethod.CONTROL_ENUM, key, 0.0, pid)


# ---------------------------------------------------------------------------
# random small instances


def random_instance(seed: int, n_states: int = 8, mode: Mode = Mode.EXIT, *, slices: int = 0,
                    jumps: bool = False, h: float | None = None, alpha: float | None = None,
                    density: float = 0.5):
    """Random (kernel, region, spec) with payoffs uniform in [-1, 1].

    States sit at x = 0..n-1.  The kernel rows are random probability vectors
    on a random support; `jumps=False` restricts moves to nearest neighbours.
    In FINITE mode payoffs vary over `slices` + 1 time points.
    """
    rng = np.random.default_rng(seed)
    n = int(n_states)
    if h is None:
        h = float(rng.uniform(0.05, 0.5))
    if alpha is None:
        alpha = float(rng.uniform(0.5, 2.0))
    P = np.zeros((n, n))
    for i in range(n):
        if jumps:
            support = rng.random(n) < density
            support[i] = True
        else:
            support = np.zeros(n, dtype=bool)
            support[max(i - 1, 0):i + 2] = True
        P[i, support] = rng.random(int(support.sum())) + 1e-3
        P[i] /= P[i].sum()
    # exact row sums: fold rounding into the diagonal
    P[np.arange(n), np.arange(n)] += 1.0 - P.sum(axis=1)
    kernel = TransitionKernel(sp.csr_matrix(P), h, f"random seed={seed}")

    grid = StateGrid(np.arange(n, dtype=float))
    if mode in (Mode.EXIT, Mode.GENERAL):
        lo = int(rng.integers(0, max(n // 3, 1)))
        hi = int(rng.integers(max(lo + 1, 2 * n // 3), n))
        inside = np.zeros(n, dtype=bool)
        inside[lo:hi] = True
        if inside.all():
            inside[-1] = False
        region = build_region(grid, lambda x: bool(inside[int(round(x))]))
    else:
        region = RegionGrid(grid, np.full(n, Label.INTERIOR))

    n_t = slices + 1 if mode is Mode.FINITE else 1
    times = h * np.arange(n_t)

    def table():
        vals = rng.uniform(-1.0, 1.0, size=(n_t, n))
        return TabulatedPayoff(np.repeat(times, n), np.tile(grid.points, n_t), vals.ravel())

    f, G, H = table(), table(), table()
    horizon = h * slices if mode is Mode.FINITE else None
    spec = PayoffSpec(alpha, f, G, H, mode=mode, horizon=horizon)
    return kernel, region, spec
