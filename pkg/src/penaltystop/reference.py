"""Brownian benchmark with no optimal stopping time.

X is a standard Brownian motion, O = (-inf, 1), G = min(e^x, e), H = 0,
f = 0 and alpha < 1/2.  Stopping at the fixed time t (or at exit, which
pays 0) gives

    l(t, x) = E^x[e^{-alpha t} 1{tau_O > t} e^{X_t}]
            = e^{(1/2 - alpha) t + x} Phi((1 - x - t)/sqrt(t)),

and d/dt l(0+, x) > 0, so waiting always beats stopping inside O while the
value at the boundary drops to H = 0.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import ndtr

from .chain import build_diffusion_chain
from .lattice import StateGrid, build_region, below
from .payoff import Mode, PayoffSpec, capped_exp, zero
from .penalty_solver import PenaltyProblem, ValueField
from .policy import build_region_eps


@dataclass(frozen=True)
class BrownianExample:
    alpha: float = 0.25
    x_left: float = -8.0
    upper: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.alpha < 0.5:
            raise ValueError("alpha must lie strictly between 0 and 1/2")

    def G(self, t, x):
        return np.minimum(np.exp(np.asarray(x, dtype=float)), np.e)

    def spec(self) -> PayoffSpec:
        return PayoffSpec(self.alpha, zero(), capped_exp(), zero(), mode=Mode.EXIT,
                          names={"f": "zero", "G": "capped_exp", "H": "zero"})


def closed_form_l(t: float, x: float, alpha: float) -> float:
    """Value of stopping at time t (or at exit) from x; the t = 0 limit is e^x."""
    if x >= 1.0:
        raise ValueError("x must be < 1")
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return float(np.exp(x))
    return float(np.exp((0.5 - alpha) * t + x) * ndtr((1.0 - x - t) / np.sqrt(t)))


def sup_l(x: float, alpha: float, t_grid=None) -> tuple[float, float]:
    """(t*, l*) maximizing closed_form_l(., x) over t > 0.

    A scan over `t_grid` brackets the maximizer, which a bounded scalar
    search then refines.  The default grid covers (0, max(20, 3(1 - x))].
    """
    if t_grid is None:
        t_max = max(20.0, 3.0 * (1.0 - x))
        t_grid = np.concatenate([np.geomspace(1e-8, 1e-2, 60), np.linspace(1e-2, t_max, 4000)[1:]])
    t_grid = np.asarray(t_grid, dtype=float)
    vals = np.array([closed_form_l(t, x, alpha) for t in t_grid])
    k = int(np.argmax(vals))
    lo = t_grid[max(k - 1, 0)]
    hi = t_grid[min(k + 1, t_grid.size - 1)]
    best_t, best_v = float(t_grid[k]), float(vals[k])
    if hi > lo:
        res = minimize_scalar(lambda t: -closed_form_l(t, x, alpha), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if -res.fun > best_v:
            best_t, best_v = float(res.x), float(-res.fun)
    return best_t, best_v


def build_brownian_problem(example: BrownianExample, dx: float, h: float | None = None) -> PenaltyProblem:
    """Nearest-neighbour Brownian chain on [x_left, upper] with h = dx^2 by default."""
    grid = StateGrid.uniform(example.x_left, example.upper, dx)
    h = dx * dx if h is None else h
    kernel = build_diffusion_chain(grid, lambda x: 0.0 * x, lambda x: 1.0 + 0.0 * x, h)
    region = build_region(grid, below(example.upper))
    return PenaltyProblem(kernel, region, example.spec())


@dataclass
class ExampleReport:
    alpha: float
    dx: float
    beta: float
    x: np.ndarray
    G: np.ndarray
    sup_l: np.ndarray
    w_beta: np.ndarray
    interior_stop_x: np.ndarray
    slack: float
    failures: list = field(default_factory=list)

    @property
    def gap(self) -> np.ndarray:
        return self.w_beta - self.G

    @property
    def shortfall(self) -> float:
        """max over sampled x of (sup_l - w_beta)^+."""
        return float(np.max(np.maximum(self.sup_l - self.w_beta, 0.0)))

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_csv(self, path, provenance: str | None = None) -> None:
        with open(path, "w", newline="") as fh:
            if provenance:
                fh.write(f"# {provenance}\n")
            w = csv.writer(fh)
            w.writerow(["x", "G", "sup_l", "w_beta_max", "gap"])
            for row in zip(self.x, self.G, self.sup_l, self.w_beta, self.gap):
                w.writerow([format(v, ".17g") for v in row])


def sample_points(grid: StateGrid, n: int = 20, lower: float = -2.0, upper: float = 1.0) -> np.ndarray:
    """n interior grid indices spread over [lower, upper)."""
    x = grid.points
    idx = np.flatnonzero((x >= lower) & (x < upper - 1e-9))
    pick = np.unique(np.round(np.linspace(0, idx.size - 1, n)).astype(int))
    return idx[pick]


def verify_example(value_field: ValueField, problem: PenaltyProblem, example: BrownianExample,
                   slack: float = 0.0, sample=None) -> ExampleReport:
    """Compare a large-beta field with sup_t l(t, x) and inspect the eps=0 stop set.

    Records one failure per sampled x with w < sup_l - slack, and one if the
    stop set meets the interior.
    """
    region = problem.region
    grid = region.grid
    idx = sample_points(grid) if sample is None else np.asarray(sample, dtype=int)
    xs = grid.points[idx]
    w = value_field.values[0][idx]
    G = example.G(0.0, xs)
    sl = np.array([sup_l(x, example.alpha)[1] for x in xs])
    failures = []
    for x, wi, li in zip(xs, w, sl):
        if wi < li - slack:
            failures.append(f"x={x:.6g}: w_beta={wi:.10g} below sup_l={li:.10g} by {li - wi:.3e} (slack {slack:.3e})")
    stops = build_region_eps(value_field, problem.spec, region, 0.0).interior_stops(region)
    stop_x = grid.points[stops]
    if stops.size:
        margins = example.G(0.0, stop_x) - value_field.values[0][stops]
        failures.append(
            "stopping region meets the interior at x = "
            + ", ".join(f"{x:.6g} (G - w = {m:.3e})" for x, m in zip(stop_x, margins))
        )
    return ExampleReport(example.alpha, grid.spacing, value_field.beta, xs, G, sl, w, stop_x, slack, failures)
