"""Exit-constrained stopping versus a general stopping payoff F.

In the exit-constrained problem the chain is stopped on leaving (-1, 1) and
collects H there.  The general problem instead pays F, which equals G
inside, H well outside, and on the discrete boundary whatever the chosen
convention says.  Here G exceeds H at the boundary, so taking F = max(G, H)
on the boundary lifts the value near the edge, and the lift fades with the
distance from it.
"""

import numpy as np

from penaltystop import PenaltyProblem, PayoffSpec, StateGrid, build_diffusion_chain, build_region, interval
from penaltystop.chain import add_jumps, uniform_jump_law
from penaltystop.payoff import BoundaryConvention, Mode, constant

grid = StateGrid.uniform(-2.0, 2.0, 0.05)
kernel = build_diffusion_chain(grid, lambda x: 0 * x, lambda x: 1 + 0 * x, 0.001)
# occasional jumps to the far ends, where H is large
kernel = add_jumps(kernel, 0.5, uniform_jump_law(grid.size, [grid.index_of(-2.0), grid.index_of(2.0)]))
region = build_region(grid, interval(-1.0, 1.0))

G = lambda t, x: 1.0 - np.asarray(x) ** 2 / 2
H = lambda t, x: np.where(np.abs(np.asarray(x)) > 1.5, 2.0, 0.2)

cases = [("exit-constrained", Mode.EXIT, BoundaryConvention.USE_MAX),
         ("general, F = H on boundary", Mode.GENERAL, BoundaryConvention.USE_H),
         ("general, F = max(G, H)", Mode.GENERAL, BoundaryConvention.USE_MAX)]
xs = (0.0, 0.5, 0.9, 0.95)
print(f"{'':28}" + "".join(f"{'x=' + str(x):>10}" for x in xs))
for label, mode, conv in cases:
    spec = PayoffSpec(1.0, constant(0.0), G, H, mode=mode, boundary_convention=conv)
    w = PenaltyProblem(kernel, region, spec).solve(4096.0).values[0]
    print(f"{label:28}" + "".join(f"{w[grid.index_of(x)]:10.5f}" for x in xs))
