"""Penalized value functions on Markov-chain approximations.

Over one step of length h the chain sits at its current state, so the
penalized equation

    w(x) = int_0^h e^{-alpha u} [f(x) + beta (S(x) - w(x))^+] du + e^{-alpha h} E_x w(X_h)

holds pointwise, with S the stop payoff (G, or the spliced F).  Writing
C(x) = A f(x) + d E_x w(X_h) with A = (1 - d)/alpha, d = e^{-alpha h}, the
equation is solved for w(x) in closed form by checking both branches of the
positive part:

    w = C                       if C >= S
    w = (C + A beta S)/(1 + A beta)  otherwise,

i.e. w = C + pi (S - C)^+ with pi = A beta / (1 + A beta) in [0, 1).  The
resulting operator is monotone, its Lipschitz constant in the sup norm is d,
and pi grows with beta, so solutions increase with beta.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from numba import njit

from .chain import TransitionKernel
from .lattice import RegionGrid
from .payoff import Mode, PayoffSpec, discount_weights, exit_constrained, horizon_steps, stop_payoff

DEFAULT_SCHEDULE = tuple(2.0**k for k in range(13))


class NumericalFailure(RuntimeError):
    pass


class ConvergenceError(NumericalFailure):
    def __init__(self, residual: float, q_estimate: float, iters: int):
        super().__init__(
            f"fixed point not reached after {iters} iterations: "
            f"last residual {residual:.3e}, estimated contraction {q_estimate:.6f}"
        )
        self.residual = residual
        self.q_estimate = q_estimate
        self.iters = iters


class MonotonicityError(NumericalFailure):
    pass


@dataclass(frozen=True)
class PenaltyConfig:
    beta: float = 1.0
    tol: float = 1e-10
    max_iters: int = 10**6
    beta_schedule: tuple = DEFAULT_SCHEDULE

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError("beta must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        sched = tuple(float(b) for b in self.beta_schedule)
        if not sched:
            raise ValueError("beta_schedule must be non-empty")
        if any(b < 0 for b in sched) or any(b2 <= b1 for b1, b2 in zip(sched, sched[1:])):
            raise ValueError("beta_schedule must be non-negative and strictly increasing")
        object.__setattr__(self, "beta_schedule", sched)


@dataclass
class ValueField:
    """Value array of shape (slices, states) plus solver diagnostics.

    Time-homogeneous modes carry a single slice.  `error_bound` is the
    computable bound sup (S - w)^+ over the controllable states, which
    dominates the distance to the unpenalized value.
    """

    values: np.ndarray
    beta: float
    residual: float
    iters: int
    error_bound: float
    mode: Mode | None = None
    h: float | None = None
    times: np.ndarray | None = None
    residuals: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)
    distance_bound: float = 0.0

    @property
    def stationary(self) -> np.ndarray:
        return self.values[0]

    def at(self, slice_index: int = 0) -> np.ndarray:
        return self.values[slice_index]


def contraction_factor(alpha: float, h: float) -> float:
    """Sup-norm Lipschitz constant e^{-alpha h} of the penalized operators."""
    return float(np.exp(-alpha * h))


def contraction_bound(alpha: float, beta: float, h: float) -> float:
    """beta (1 - d)/(alpha + beta) + d with d = e^{-(alpha+beta) h}.

    This is the factor obtained from the (alpha+beta)-discounted form of the
    penalized equation; it is never below `contraction_factor`.
    """
    a, d = discount_weights(alpha + beta, h)
    return beta * a + d


def penalty_weight(alpha: float, beta: float, h: float) -> float:
    """Share pi of the gap (S - C)^+ recovered per step."""
    a, _ = discount_weights(alpha, h)
    return a * beta / (1.0 + a * beta)


def implicit_penalty_step(C, S, alpha: float, beta: float, h: float):
    """Solve w = C + A beta (S - w)^+ pointwise by testing both branches."""
    C = np.asarray(C, dtype=float)
    a, _ = discount_weights(alpha, h)
    ab = a * beta
    take_stop = C < S
    w = np.where(take_stop, (C + ab * S) / (1.0 + ab), C)
    # the chosen branch must be self-consistent: w <= S exactly when C < S
    assert np.all(w[take_stop] <= S[take_stop] * (1 + 1e-15) + 1e-300), "branch inconsistency"
    return w


@njit(cache=True)
def _sweep(indptr, indices, data, phi, frozen, frozen_vals, f, S, a, d, pi, out):
    n = phi.size
    r = 0.0
    for i in range(n):
        if frozen[i]:
            v = frozen_vals[i]
        else:
            m = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                y = indices[k]
                m += data[k] * (frozen_vals[y] if frozen[y] else phi[y])
            c = a * f[i] + d * m
            gap = S[i] - c
            v = c + pi * gap if gap > 0.0 else c
        diff = abs(v - phi[i])
        if diff > r:
            r = diff
        out[i] = v
    return r


@njit(cache=True)
def _iterate(indptr, indices, data, init, frozen, frozen_vals, f, S, a, d, pi, tol, max_iters, hist):
    cur = init.copy()
    nxt = np.empty_like(cur)
    for it in range(max_iters):
        r = _sweep(indptr, indices, data, cur, frozen, frozen_vals, f, S, a, d, pi, nxt)
        hist[it] = r
        cur, nxt = nxt, cur
        if r <= tol:
            return cur, it + 1
    return cur, max_iters


class PenaltyOperator:
    """Penalized one-step operator for a time-homogeneous problem.

    Calling the operator applies one Jacobi sweep; `iterate` runs the whole
    fixed-point loop in compiled code.
    """

    def __init__(self, kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec, beta: float):
        if spec.mode is Mode.FINITE:
            raise ValueError("finite-horizon problems are solved by backward recursion")
        if kernel.n_states != region.grid.size:
            raise ValueError("kernel and region sizes differ")
        if beta < 0:
            raise ValueError("beta must be >= 0")
        self.kernel, self.region, self.spec, self.beta = kernel, region, spec, float(beta)
        f, _, _ = spec.arrays(region, 0.0)
        self.f = f
        self.S = stop_payoff(spec, region, 0.0)
        if exit_constrained(spec):
            self.frozen = ~region.interior
        else:
            self.frozen = np.zeros(region.grid.size, dtype=bool)
        self.frozen_vals = np.where(self.frozen, self.S, 0.0)
        self.a, self.d = discount_weights(spec.alpha, kernel.h)
        self.pi = penalty_weight(spec.alpha, self.beta, kernel.h)
        P = kernel.probs
        self._csr = (P.indptr.astype(np.int64), P.indices.astype(np.int64), P.data)

    @property
    def q(self) -> float:
        return self.d

    @property
    def controllable(self) -> np.ndarray:
        return ~self.frozen

    def __call__(self, phi) -> np.ndarray:
        phi = np.asarray(phi, dtype=float).reshape(-1)
        out = np.empty_like(phi)
        _sweep(*self._csr, phi, self.frozen, self.frozen_vals, self.f, self.S, self.a, self.d, self.pi, out)
        return out

    def continuation(self, phi) -> np.ndarray:
        phi_bar = np.where(self.frozen, self.frozen_vals, np.asarray(phi, dtype=float).reshape(-1))
        return self.a * self.f + self.d * (self.kernel.probs @ phi_bar)

    def iterate(self, init, tol: float, max_iters: int):
        init = np.asarray(init, dtype=float).reshape(-1).copy()
        hist = np.empty(max_iters)
        values, iters = _iterate(
            *self._csr, init, self.frozen, self.frozen_vals, self.f, self.S,
            self.a, self.d, self.pi, tol, max_iters, hist,
        )
        return values, hist[:iters]

    def lower_start(self) -> np.ndarray:
        """Sub-solution: iterates started here increase monotonically."""
        low = -(np.max(np.abs(self.f)) / self.spec.alpha + np.max(np.abs(self.S)))
        return np.where(self.frozen, self.frozen_vals, low)

    def error_bound(self, values) -> float:
        v = np.asarray(values, dtype=float).reshape(-1)
        gap = np.maximum(self.S - v, 0.0)[self.controllable]
        return float(gap.max()) if gap.size else 0.0


def _apply(phi, op: PenaltyOperator):
    if isinstance(phi, ValueField):
        out = op(phi.values[0])
        return ValueField(out[None, :], op.beta, float(np.max(np.abs(out - phi.values[0]))), 1,
                          op.error_bound(out), op.spec.mode, op.kernel.h)
    return op(phi)


def apply_operator_exit(phi, kernel, region, spec, beta):
    """One sweep of the exit-constrained operator; H is frozen outside the interior."""
    if spec.mode is not Mode.EXIT:
        raise ValueError("apply_operator_exit needs an EXIT-mode payoff")
    return _apply(phi, PenaltyOperator(kernel, region, spec, beta))


def apply_operator_general_F(phi, kernel, region, spec, beta):
    if spec.mode is not Mode.GENERAL:
        raise ValueError("apply_operator_general_F needs a GENERAL-mode payoff")
    return _apply(phi, PenaltyOperator(kernel, region, spec, beta))


def apply_operator_infinite(phi, kernel, spec, beta, region=None):
    """One sweep with no exit: every state is controllable.

    Without a region the states are indexed 0..n-1 and all labelled interior.
    """
    if spec.mode is not Mode.INFINITE:
        raise ValueError("apply_operator_infinite needs an INFINITE-mode payoff")
    if region is None:
        region = _all_interior(kernel.n_states)
    return _apply(phi, PenaltyOperator(kernel, region, spec, beta))


def _all_interior(n: int) -> RegionGrid:
    from .lattice import Label, StateGrid

    return RegionGrid(StateGrid(np.arange(n, dtype=float)), np.full(n, Label.INTERIOR))


def _estimate_q(hist: np.ndarray) -> float:
    h = hist[hist > 0]
    if h.size < 2:
        return float("nan")
    return float(np.max(h[1:] / h[:-1]))


def solve_fixed_point(op: Callable, init, cfg: PenaltyConfig) -> ValueField:
    """Jacobi iteration phi <- op(phi) until the sup-norm update is <= cfg.tol."""
    if hasattr(op, "iterate"):
        values, hist = op.iterate(init, cfg.tol, cfg.max_iters)
    else:
        values = np.asarray(init, dtype=float).reshape(-1).copy()
        hist = []
        for _ in range(cfg.max_iters):
            nxt = np.asarray(op(values), dtype=float)
            r = float(np.max(np.abs(nxt - values)))
            hist.append(r)
            values = nxt
            if r <= cfg.tol:
                break
        hist = np.asarray(hist)
    residual = float(hist[-1])
    if residual > cfg.tol:
        raise ConvergenceError(residual, _estimate_q(hist), hist.size)
    q = getattr(op, "q", None)
    dist = cfg.tol * q / (1.0 - q) if q is not None and q < 1 else float("nan")
    bound = op.error_bound(values) if hasattr(op, "error_bound") else float("nan")
    spec = getattr(op, "spec", None)
    return ValueField(
        values=values[None, :],
        beta=getattr(op, "beta", float("nan")),
        residual=residual,
        iters=int(hist.size),
        error_bound=bound,
        mode=spec.mode if spec is not None else None,
        h=getattr(getattr(op, "kernel", None), "h", None),
        residuals=hist,
        distance_bound=dist,
    )


def solve_finite_horizon(kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec, cfg: PenaltyConfig,
                         beta: float | None = None) -> ValueField:
    """Backward recursion over the time slices s_k = k h, k = 0..N, N h = T.

    The last slice equals F(T, .); each earlier slice solves the implicit
    one-step equation in closed form, so there is no inner iteration.
    """
    if spec.mode is not Mode.FINITE:
        raise ValueError("solve_finite_horizon needs a FINITE-mode payoff")
    beta = cfg.beta if beta is None else float(beta)
    h = kernel.h
    N = horizon_steps(spec, h)
    times = h * np.arange(N + 1)
    a, d = discount_weights(spec.alpha, h)
    P = kernel.probs
    out = np.empty((N + 1, kernel.n_states))
    out[N] = stop_payoff(spec, region, times[N])
    bound = 0.0
    for k in range(N - 1, -1, -1):
        f, _, _ = spec.arrays(region, times[k])
        S = stop_payoff(spec, region, times[k])
        C = a * f + d * (P @ out[k + 1])
        out[k] = implicit_penalty_step(C, S, spec.alpha, beta, h)
        bound = max(bound, float(np.max(np.maximum(S - out[k], 0.0))))
    return ValueField(out, beta, 0.0, N, bound, Mode.FINITE, h, times)


class PenaltyProblem:
    """A chain, a region and payoff data; solves for any beta."""

    def __init__(self, kernel: TransitionKernel, region: RegionGrid, spec: PayoffSpec):
        if kernel.n_states != region.grid.size:
            raise ValueError("kernel and region sizes differ")
        self.kernel, self.region, self.spec = kernel, region, spec

    def operator(self, beta: float) -> PenaltyOperator:
        return PenaltyOperator(self.kernel, self.region, self.spec, beta)

    def solve(self, beta: float, cfg: PenaltyConfig | None = None, init=None) -> ValueField:
        cfg = cfg or PenaltyConfig()
        if self.spec.mode is Mode.FINITE:
            return solve_finite_horizon(self.kernel, self.region, self.spec, cfg, beta)
        op = self.operator(beta)
        if init is None:
            init = op.lower_start()
        else:
            init = np.asarray(init, dtype=float).reshape(-1)
        return solve_fixed_point(op, init, cfg)

    def sweep(self, cfg: PenaltyConfig | None = None, target_bound: float | None = None) -> "SweepResult":
        cfg = cfg or PenaltyConfig()
        return beta_sweep(lambda b, init: self.solve(b, cfg, init), cfg, target_bound)


@dataclass
class SweepResult:
    fields: list
    log: list  # rows (beta, iters, residual, error_bound, wall_time)
    target_beta: float | None = None

    @property
    def betas(self) -> list:
        return [fld.beta for fld in self.fields]

    @property
    def final(self) -> ValueField:
        return self.fields[-1]


def beta_sweep(solve: Callable, cfg: PenaltyConfig, target_bound: float | None = None) -> SweepResult:
    """Solve along cfg.beta_schedule, warm-starting each beta from the last.

    `solve(beta, init)` returns a ValueField; `init` is None for the first
    beta.  Raises MonotonicityError if some value drops by more than 2*tol
    between consecutive betas.
    """
    fields, log = [], []
    target = None
    prev = None
    for beta in cfg.beta_schedule:
        t0 = time.perf_counter()
        fld = solve(beta, None if prev is None else prev.values[0])
        wall = time.perf_counter() - t0
        if prev is not None:
            drop = float(np.max(prev.values - fld.values))
            if drop > 2 * cfg.tol:
                where = np.unravel_index(int(np.argmax(prev.values - fld.values)), fld.values.shape)
                raise MonotonicityError(
                    f"value fell by {drop:.3e} at (slice, state) {where} between beta={prev.beta} and beta={beta}"
                )
        fields.append(fld)
        log.append((beta, fld.iters, fld.residual, fld.error_bound, wall))
        if target is None and target_bound is not None and fld.error_bound <= target_bound:
            target = beta
        prev = fld
    return SweepResult(fields, log, target)
