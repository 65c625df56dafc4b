"""Self-dual variational calculus at desk scale: Legendre conjugates, ASD
Lagrangians, zero-gap stationary solves, boundary problems and flows."""

from .boundary import (BoundaryLagrangian, assemble_boundary_problem, dirichlet_boundary,
                       lower_bound_violation, quadratic_pair, selfdual_residual, solve_boundary_problem)
from .convex_core import (AbsSum, Ball, Box, Composed, ConjResult, ConvexFn, ConvexSet, Halfspace,
                          Indicator, MoreauEnvelope, NonnegMonotone, Power, Quadratic, QuadraticOnSet,
                          Scaled, SeparablePower, SeparableSum, SupportFn, Tilt, Translate, WholeSpace,
                          add, conjugate_eval, fenchel_young_gap, make_catalog_fn, make_set,
                          moreau_envelope, prox)
from .evolution import (FlowProblem, Path, TimeGrid, flow_diagnostics, flow_lagrangian,
                        implicit_euler_oracle, lift_to_path, solve_coupled_flow, solve_gradient_flow,
                        solve_semiconvex_flow, time_boundary)
from .lagrangian import (Lagrangian, antidual, asd_residual, basic, combine, fenchel_young_floor,
                         free_product, make_lagrangian, scaled, shift, twisted, yosida_regularize)
from .linops import BoundaryTriplet, LinOp, classify, decompose, triplet_residual
from .policy import DEFAULT_POLICY, NumericPolicy
from .stationary import (SolveReport, StationaryProblem, minimize_asd, solve_anti_hamiltonian,
                         solve_coupled_system, solve_fenchel_rockafellar, solve_inclusion,
                         solve_linear_nonsym, solve_twisted, solve_variational_inequality)

__version__ = "0.1.0"
