"""Brownian motion on (-inf, 1) with G = min(e^x, e) and H = 0.

Waiting a short while always beats stopping immediately, so the optimal
value exceeds G everywhere inside.  This script compares the penalized value
at beta = 4096 with the closed-form payoff sup_t l(t, x) of the "stop at a
fixed time t" rules, and lists where the lattice solution still stops.
"""

import numpy as np

from penaltystop import PenaltyConfig
from penaltystop.policy import build_region_eps
from penaltystop.reference import BrownianExample, build_brownian_problem, sup_l

ex = BrownianExample(alpha=0.25)
for dx in (0.02, 0.01):
    problem = build_brownian_problem(ex, dx)
    w = problem.sweep(PenaltyConfig(tol=1e-10)).final
    grid = problem.region.grid
    print(f"dx = {dx}")
    for x in (-2.0, -1.0, 0.0, 0.5, 0.9):
        i = grid.index_of(x)
        _, best = sup_l(x, ex.alpha)
        print(f"  x = {x:+.1f}: w = {w.values[0, i]:.6f}  sup_t l = {best:.6f}  G = {ex.G(0, x):.6f}")
    stops = grid.points[build_region_eps(w, problem.spec, problem.region, 0.0).interior_stops(problem.region)]
    print(f"  interior points where the solution stops: {stops.min():.2f} .. {stops.max():.2f}"
          if stops.size else "  no interior stopping")
print("Next to x = 1 the penalized value dips below G over a layer about 1/sqrt(beta) wide,")
print("so a stop band remains at beta = 4096 whatever dx is.  The exact lattice problem")
print("stops only at the last point before the cap.")
