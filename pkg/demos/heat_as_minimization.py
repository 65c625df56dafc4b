"""A heat flow computed as one minimization over whole paths.

There is no time stepping. Every path u_0..u_N is scored at once, and the
score is zero only at the discrete flow. Halving dt shows the interpolant
converging to the continuous flow at second order.
"""

import numpy as np

from asdvar.convex_core import Quadratic
from asdvar.evolution import (FlowProblem, TimeGrid, continuum_gap, flow_lagrangian, solve_gradient_flow,
                             time_boundary)

half = Quadratic(np.eye(1))
fp = FlowProblem(flow_lagrangian(half, None, None, 0.0, dim=1), time_boundary([1.0]))

prev = None
for N in (25, 50, 100, 200):
    path, rep = solve_gradient_flow(half, None, None, [1.0], TimeGrid(1.0, N))
    g = continuum_gap(path, fp)
    ratio = "" if prev is None else f"  ratio {prev / g:.2f}"
    print(f"N={N:4d}  discrete gap {rep.gap:+.1e}  |u(1)-e^-1| {abs(path.final[0] - np.exp(-1)):.1e}"
          f"  continuum gap {g:.2e}{ratio}")
    prev = g
