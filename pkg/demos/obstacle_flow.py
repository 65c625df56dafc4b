"""A decaying state that meets a floor and stays on it.

x' = -x with x(0) = 2, constrained to [1, 2]. The free solution 2 e^{-t}
reaches 1 at t = ln 2. After that the constraint holds it on the floor.
"""

import numpy as np

from asdvar.convex_core import Box
from asdvar.evolution import TimeGrid
from asdvar.pde_demos import demo_obstacle_flow

tg = TimeGrid(2.0, 40)
path, rep = demo_obstacle_flow(np.eye(1), Box(1.0, 2.0, 1), None, [2.0], tg)

for t, u in zip(tg.midpoints[::4], path.midpoints[::4, 0]):
    bar = "#" * int(round(40 * (u - 1.0)))
    print(f"t={t:5.2f}  u={u:.4f}  |{bar}")
print(f"certified {rep.certified}, in-K violation {rep.check_results['in_K']:.1e}, "
      f"VI slack {rep.check_results['vi_slack']:.1e}")
