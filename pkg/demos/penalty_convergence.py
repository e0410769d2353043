"""How the penalized value approaches the optimal stopping value as beta grows.

A drifting random walk on (-1, 1) pays a small running reward, a bump G
for stopping inside and H = 1 on exit.  For each beta we print the value at
x = 0, the computable error bound sup (G - w)^+, and the distance to the
Snell envelope computed by plain backward induction.
"""

import numpy as np

from penaltystop import (
    PenaltyConfig,
    PenaltyProblem,
    PayoffSpec,
    StateGrid,
    build_diffusion_chain,
    build_region,
    interval,
)
from penaltystop.oracle import snell_backward, steps_for_tail
from penaltystop.payoff import constant, gaussian

grid = StateGrid.uniform(-1.2, 1.2, 0.05)
kernel = build_diffusion_chain(grid, lambda x: 0.1 + 0 * x, lambda x: 1 + 0 * x, 0.5 * 0.05**2)
region = build_region(grid, interval(-1.0, 1.0))
spec = PayoffSpec(0.5, constant(0.05), gaussian(0.8, 0.0, 0.7071), constant(1.0))
problem = PenaltyProblem(kernel, region, spec)

cfg = PenaltyConfig(tol=1e-11, beta_schedule=tuple(4.0**k for k in range(8)))
sweep = problem.sweep(cfg)

nf, ng = spec.sup_norm(region)
snell = snell_backward(kernel, region, spec, steps_for_tail(spec, kernel.h, 1e-11, nf / spec.alpha + 2 * ng))
mid = grid.index_of(0.0)

print(f"{'beta':>8} {'iters':>7} {'w(0)':>12} {'bound':>10} {'snell - w':>10}")
for fld in sweep.fields:
    gap = np.max(snell.values[0] - fld.values[0])
    print(f"{fld.beta:8g} {fld.iters:7d} {fld.values[0, mid]:12.8f} {fld.error_bound:10.3e} {gap:10.3e}")
print(f"Snell envelope at 0: {snell.values[0, mid]:.8f}")
print("The gap shrinks roughly like 1/beta and always stays below the bound.")
