"""Payoff data for the stopping functionals and their path-wise evaluation."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .lattice import Label, RegionGrid

# A payoff maps (time, array of states) to an array of values.
Payoff = Callable[[float, np.ndarray], np.ndarray]


class Mode(Enum):
    EXIT = "exit"  # stop before the exit time; G inside, H at exit
    GENERAL = "general"  # stop before the exit time; single payoff F
    INFINITE = "infinite"  # unconstrained stopping, no time limit
    FINITE = "finite"  # unconstrained stopping up to a horizon T


class BoundaryConvention(Enum):
    USE_G = "g"
    USE_H = "h"
    USE_MAX = "max"


def discount_weights(rate: float, h: float) -> tuple[float, float]:
    """(integral of exp(-rate*u) over [0, h], exp(-rate*h)); rate may be 0."""
    if rate == 0.0:
        return h, 1.0
    return float(-np.expm1(-rate * h) / rate), float(np.exp(-rate * h))


@dataclass(frozen=True)
class PayoffSpec:
    """Discount rate, running payoff `f`, stop payoff `G`, exit payoff `H`.

    In the GENERAL, INFINITE and FINITE modes the terminal payoff is the
    spliced function F = G on the interior, H on the exterior and the
    `boundary_convention` choice on boundary points.  Payoffs in the three
    time-homogeneous modes are evaluated at t = 0 only.
    """

    alpha: float
    f: Payoff
    G: Payoff
    H: Payoff
    mode: Mode = Mode.EXIT
    boundary_convention: BoundaryConvention = BoundaryConvention.USE_MAX
    horizon: float | None = None
    names: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        if self.mode is Mode.FINITE:
            if self.alpha < 0:
                raise ValueError("alpha must be >= 0 in finite-horizon mode")
            if self.horizon is None or not self.horizon > 0:
                raise ValueError("finite-horizon mode needs a positive horizon")
        elif not self.alpha > 0:
            raise ValueError("alpha must be > 0")

    @property
    def time_homogeneous(self) -> bool:
        return self.mode is not Mode.FINITE

    def arrays(self, region: RegionGrid, t: float = 0.0):
        """(f, G, H) evaluated on the grid at time t, checked finite."""
        x = region.grid.points
        out = []
        for name, fn in (("f", self.f), ("G", self.G), ("H", self.H)):
            v = np.broadcast_to(np.asarray(fn(t, x), dtype=float), x.shape).copy()
            if not np.all(np.isfinite(v)):
                raise ValueError(f"payoff {name} is not finite on the grid at t={t}")
            out.append(v)
        return tuple(out)

    def F(self, region: RegionGrid, t: float = 0.0) -> np.ndarray:
        _, G, H = self.arrays(region, t)
        return splice(G, H, region, self.boundary_convention)

    def sup_norm(self, region: RegionGrid, times=(0.0,)) -> tuple[float, float]:
        """(max |f|, max(|G|, |H|)) over the grid and the given times."""
        nf = ng = 0.0
        for t in times:
            f, G, H = self.arrays(region, t)
            nf = max(nf, float(np.max(np.abs(f))))
            ng = max(ng, float(np.max(np.abs(G))), float(np.max(np.abs(H))))
        return nf, ng


def splice(G: np.ndarray, H: np.ndarray, region: RegionGrid, convention: BoundaryConvention) -> np.ndarray:
    labels = region.labels
    F = np.where(labels == Label.INTERIOR, G, H)
    on_bd = labels == Label.BOUNDARY
    if convention is BoundaryConvention.USE_G:
        F[on_bd] = G[on_bd]
    elif convention is BoundaryConvention.USE_MAX:
        F[on_bd] = np.maximum(G, H)[on_bd]
    return F


def effective_F(spec: PayoffSpec, region: RegionGrid, t: float, i: int) -> float:
    """Terminal payoff F at state index i and time t."""
    if not -region.grid.size <= i < region.grid.size:
        raise IndexError(f"state index {i} out of range")
    return float(spec.F(region, t)[i])


def stop_payoff(spec: PayoffSpec, region: RegionGrid, t: float = 0.0) -> np.ndarray:
    """Payoff collected when the path stops (or is stopped by exit) at each state.

    EXIT mode pays G at interior states and H elsewhere, so the boundary
    convention never enters.  The other modes pay the spliced F.
    """
    _, G, H = spec.arrays(region, t)
    if spec.mode is Mode.EXIT:
        return np.where(region.interior, G, H)
    return splice(G, H, region, spec.boundary_convention)


def exit_constrained(spec: PayoffSpec) -> bool:
    return spec.mode in (Mode.EXIT, Mode.GENERAL)


def horizon_steps(spec: PayoffSpec, h: float, s0: float = 0.0) -> int:
    n = (spec.horizon - s0) / h
    k = int(round(n))
    if k < 0 or abs(n - k) > 1e-9 * max(1.0, abs(n)):
        raise ValueError(f"horizon - s0 = {spec.horizon - s0} is not a multiple of h = {h}")
    return k


def functional_value(spec: PayoffSpec, region: RegionGrid, kernel, path, stop_step, s0: float = 0.0) -> float:
    """Discounted payoff of one sampled path under a given stopping step.

    `stop_step=None` means "never stop".  The running payoff is frozen at the
    left end of each step and integrated against exp(-alpha*u) exactly.  The
    path stops at K = min(stop_step, first exit step[, horizon]) and collects
    the terminal payoff prescribed by the mode.  If K lies beyond the end of
    the path, only the running part is returned.
    """
    path = np.asarray(path, dtype=np.int64)
    h = kernel.h
    w, d = discount_weights(spec.alpha, h)
    last = path.size - 1
    K = last + 1 if stop_step is None else int(stop_step)
    if exit_constrained(spec):
        outside = np.flatnonzero(region.labels[path] != Label.INTERIOR)
        if outside.size:
            K = min(K, int(outside[0]))
    if spec.mode is Mode.FINITE:
        K = min(K, horizon_steps(spec, h, s0))
    # a path of `last` transitions covers `last` running steps
    n_run = K if K <= last else last
    total = 0.0
    disc = 1.0
    for k in range(n_run):
        f, _, _ = spec.arrays(region, s0 + k * h)
        total += disc * w * f[path[k]]
        disc *= d
    if K <= last:
        t = s0 + K * h
        total += d**K * stop_payoff(spec, region, t)[path[K]]
    return float(total)


# ---------------------------------------------------------------------------
# Built-in payoffs (serializable by name + parameters)


def constant(value: float = 0.0) -> Payoff:
    return lambda t, x: np.full(np.shape(x), float(value))


def zero() -> Payoff:
    return constant(0.0)


def capped_exp(cap: float = np.e, scale: float = 1.0, shift: float = 0.0) -> Payoff:
    """scale * min(exp(x - shift), cap)."""
    return lambda t, x: scale * np.minimum(np.exp(np.asarray(x) - shift), cap)


def linear(intercept: float = 0.0, slope: float = 0.0) -> Payoff:
    return lambda t, x: intercept + slope * np.asarray(x, dtype=float)


def gaussian(amplitude: float = 1.0, center: float = 0.0, width: float = 1.0) -> Payoff:
    return lambda t, x: amplitude * np.exp(-(((np.asarray(x) - center) / width) ** 2))


def cosine(amplitude: float = 1.0, frequency: float = 1.0, offset: float = 0.0) -> Payoff:
    return lambda t, x: offset + amplitude * np.cos(frequency * np.asarray(x))


class TabulatedPayoff:
    """Payoff given as rows (time, state, value).

    Lookups must hit a tabulated state exactly (up to 1e-9); a table with a
    single time is treated as time-independent, otherwise the latest
    tabulated time not after t is used.
    """

    def __init__(self, times, states, values):
        times = np.asarray(times, dtype=float)
        states = np.asarray(states, dtype=float)
        values = np.asarray(values, dtype=float)
        self._times = np.unique(times)
        self._tables = {}
        for t in self._times:
            sel = times == t
            order = np.argsort(states[sel])
            self._tables[t] = (states[sel][order], values[sel][order])

    @classmethod
    def from_csv(cls, path) -> "TabulatedPayoff":
        rows = []
        with open(path, newline="") as fh:
            reader = csv.DictReader(line for line in fh if not line.startswith("#"))
            missing = {"time", "state", "value"} - set(reader.fieldnames or ())
            if missing:
                raise ValueError(f"{path}: missing columns {sorted(missing)}")
            for r in reader:
                rows.append((float(r["time"]), float(r["state"]), float(r["value"])))
        if not rows:
            raise ValueError(f"{path}: no rows")
        t, s, v = map(np.array, zip(*rows))
        return cls(t, s, v)

    def __call__(self, t: float, x) -> np.ndarray:
        k = np.searchsorted(self._times, t + 1e-12, side="right") - 1
        key = self._times[max(k, 0)]
        states, values = self._tables[key]
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = np.clip(np.searchsorted(states, x), 0, states.size - 1)
        j_left = np.clip(j - 1, 0, states.size - 1)
        j = np.where(np.abs(states[j_left] - x) < np.abs(states[j] - x), j_left, j)
        if np.any(np.abs(states[j] - x) > 1e-9 * max(1.0, np.max(np.abs(x)))):
            raise ValueError("tabulated payoff queried at an untabulated state")
        return values[j]


BUILTINS = {
    "zero": zero,
    "constant": constant,
    "capped_exp": capped_exp,
    "linear": linear,
    "gaussian": gaussian,
    "cosine": cosine,
}
