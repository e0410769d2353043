"""Finite-horizon stopping by backward recursion.

A put-like payoff (1 - e^x)^+ on a driftless walk, horizon T = 1.  The
printed exercise boundary is the largest x where stopping is optimal at
each time slice; it rises towards 0 as maturity approaches.
"""

import numpy as np

from penaltystop import PenaltyProblem, PayoffSpec, StateGrid, build_diffusion_chain, build_region, everywhere
from penaltystop.payoff import Mode, zero
from penaltystop.policy import build_region_eps

import warnings

grid = StateGrid.uniform(-2.0, 2.0, 0.02)
h = 0.0004
kernel = build_diffusion_chain(grid, lambda x: -0.02 + 0 * x, lambda x: 0.2 + 0 * x, h)
with warnings.catch_warnings():
    warnings.simplefilter("ignore")  # no exterior is intended here
    region = build_region(grid, everywhere())
put = lambda t, x: np.maximum(1.0 - np.exp(np.asarray(x)), 0.0)
spec = PayoffSpec(0.05, zero(), put, zero(), mode=Mode.FINITE, horizon=1.0)

fld = PenaltyProblem(kernel, region, spec).solve(2.0**16)
mask = build_region_eps(fld, spec, region, 1e-6).mask
for t in (0.0, 0.25, 0.5, 0.75, 0.99):
    k = int(round(t / h))
    stops = grid.points[mask[k] & (grid.points < 0)]
    edge = stops.max() if stops.size else float("nan")
    print(f"t = {t:4.2f}: stop when x <= {edge:+.2f}, value at 0 = {fld.values[k, grid.index_of(0.0)]:.5f}")
