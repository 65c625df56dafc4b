import numpy as np
import pytest
from scipy.optimize import minimize

from asdvar.boundary import (BoundaryLagrangian, assemble_boundary_problem, boundary_psi,
                             dirichlet_boundary, lower_bound_violation, quadratic_pair,
                             selfdual_residual, solve_boundary_problem)
from asdvar.convex_core import Quadratic
from asdvar.lagrangian import basic
from asdvar.linops import BoundaryTriplet, LinOp


def test_dirichlet_values():
    ell = dirichlet_boundary([1.0], 1)
    assert ell([1.0], [1.0]) == pytest.approx(0.0, abs=1e-15)
    assert ell([0.0], [0.0]) == pytest.approx(1.0)
    assert dirichlet_boundary([0.0], 1)([0.0], [0.0]) == 0.0


@pytest.mark.parametrize("a", [[1.0], [0.0], [2.0, -1.0]])
def test_dirichlet_selfdual(a):
    ell = dirichlet_boundary(a, 2)
    assert selfdual_residual(ell, samples=50) <= 1e-8
    assert lower_bound_violation(ell, samples=1000) <= 1e-12


def test_quadratic_pair_selfdual_and_wrong_coefficient():
    assert selfdual_residual(quadratic_pair(1.0, 1.0, 1, 1)) <= 1e-8
    bad = quadratic_pair(2.0, 1.0, 1, 1)  # |r|^2 + 1/2|s|^2
    assert selfdual_residual(bad, samples=20) > 0.1


def test_dimension_mismatch_rejected():
    with pytest.raises(ValueError):
        BoundaryLagrangian(Quadratic(np.eye(3)), 1, 1)


def test_boundary_psi_positivity():
    # forward-difference pairing on 3 nodes, b1 = first node, b2 = last node
    b1, b2 = np.array([[1.0, 0.0, 0.0]]), np.array([[0.0, 0.0, 1.0]])
    t = BoundaryTriplet(LinOp(np.zeros((3, 3))), LinOp(b1), LinOp(b2))
    psi = boundary_psi(None, np.eye(3), t)
    assert psi(np.ones(3)) == pytest.approx(1.5 - 0.5 * (1.0 - 1.0))
    with pytest.raises(ValueError):
        boundary_psi(None, np.zeros((3, 3)), t)


def test_degenerate_boundary_free():
    # zero boundary maps: reduces to the basic problem inf psi + psi* = 0
    psi = Quadratic(np.diag([2.0, 1.0]), [-2.0, 1.0])
    z = LinOp(np.zeros((1, 2)))
    t = BoundaryTriplet(LinOp(np.zeros((2, 2))), z, z)
    rep = solve_boundary_problem(basic(psi), t, quadratic_pair(1.0, 1.0, 1, 1))
    assert rep.certified
    assert abs(rep.gap) <= 1e-10
    assert np.allclose(rep.minimizer, [1.0, -1.0], atol=1e-8)


def test_non_skew_triplet_rejected():
    z = LinOp(np.zeros((1, 2)))
    t = BoundaryTriplet(LinOp(np.eye(2)), z, z)
    with pytest.raises(ValueError):
        assemble_boundary_problem(basic(Quadratic(np.eye(2))), t, quadratic_pair(1.0, 1.0, 1, 1))


def test_objective_bounded_below_by_dirichlet_defect():
    # two-node central pairing: Lam + Lam' = e2e2' - e1e1'
    Lam = np.array([[-0.5, 0.5], [-0.5, 0.5]])
    t = BoundaryTriplet(LinOp(Lam), LinOp([[1.0, 0.0]]), LinOp([[0.0, 1.0]]))
    prob = assemble_boundary_problem(basic(Quadratic(np.eye(2))), t, dirichlet_boundary([1.0], 1))
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = 2 * rng.standard_normal(2)
        assert prob.program.value(x) >= -1e-8
    # collocated nodal pairing is overdetermined: the infimum is positive, not zero
    rep = solve_boundary_problem(basic(Quadratic(np.eye(2))), t, dirichlet_boundary([1.0], 1))
    ref = minimize(prob.program.value, [0.5, 0.5], method="BFGS", options={"gtol": 1e-12})
    assert rep.gap == pytest.approx(ref.fun, abs=1e-9)
    assert rep.gap > 0.1 and not rep.certified
