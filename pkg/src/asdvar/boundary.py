"""Self-dual boundary Lagrangians and assembly of boundary-value problems."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .convex_core import ConvexFn, Quadratic, _vec, add, conjugate_eval
from .engine import Program, Term
from .lagrangian import Lagrangian
from .linops import BoundaryTriplet, LinOp, as_linop, classify, triplet_residual
from .policy import DEFAULT_POLICY, NumericPolicy
from .stationary import SolveReport, StationaryProblem, solve_problem


@dataclass
class BoundaryLagrangian:
    """l(r, s) on H1 x H2 stored as one convex function of (r, s)."""

    fn: ConvexFn
    dim_h1: int
    dim_h2: int
    tag: str = "custom"
    a: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.fn.dim != self.dim_h1 + self.dim_h2:
            raise ValueError("boundary function dimension must be dim_h1 + dim_h2")

    def __call__(self, r, s) -> float:
        return self.fn(np.concatenate([_vec(r)[: self.dim_h1], _vec(s)[: self.dim_h2]]))

    def conjugate(self, a, b, mode: str = "numeric") -> float:
        return conjugate_eval(self.fn, np.concatenate([_vec(a), _vec(b)]), mode=mode).value


def dirichlet_boundary(a, dim_h2: int) -> BoundaryLagrangian:
    """l(r, s) = 1/2|r|^2 - 2<a, r> + |a|^2 + 1/2|s|^2."""
    a = _vec(a)
    n1 = a.size
    fn = Quadratic(np.eye(n1 + dim_h2), np.concatenate([-2.0 * a, np.zeros(dim_h2)]), float(a @ a))
    return BoundaryLagrangian(fn, n1, dim_h2, "dirichlet", a)


def quadratic_pair(alpha: float, beta: float, dim_h1: int, dim_h2: int) -> BoundaryLagrangian:
    """l(r, s) = alpha/2 |r|^2 + beta/2 |s|^2."""
    Q = np.diag(np.concatenate([np.full(dim_h1, alpha), np.full(dim_h2, beta)]))
    return BoundaryLagrangian(Quadratic(Q), dim_h1, dim_h2, "quadratic_pair")


def selfdual_residual(ell: BoundaryLagrangian, samples: int = 100, seed: int = 0,
                      radius: float = 1.0, mode: str = "numeric") -> float:
    """max |l*(-h1, h2) - l(h1, h2)| with l* computed by numeric conjugation."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        h1 = radius * rng.standard_normal(ell.dim_h1)
        h2 = radius * rng.standard_normal(ell.dim_h2)
        a = ell.conjugate(-h1, h2, mode)
        b = ell(h1, h2)
        if np.isfinite(a) and np.isfinite(b):
            worst = max(worst, abs(a - b))
    return float(worst)


def lower_bound_violation(ell: BoundaryLagrangian, samples: int = 1000, seed: int = 0,
                          radius: float = 1.0) -> float:
    """max of 1/2(|s|^2 - |r|^2) - l(r, s) over samples (<= 0 for self-dual l)."""
    rng = np.random.default_rng(seed)
    worst = -np.inf
    for _ in range(samples):
        r = radius * rng.standard_normal(ell.dim_h1)
        s = radius * rng.standard_normal(ell.dim_h2)
        worst = max(worst, 0.5 * (s @ s - r @ r) - ell(r, s))
    return float(worst)


def _pairing(t: BoundaryTriplet) -> np.ndarray:
    # Lambda in the identity pairing on X: <Lambda x, y> = y' Lam_id x
    L = t.lambda_op
    return L.A if L.metric_out is None else L.metric_out @ L.A


def boundary_psi(phi: Optional[ConvexFn], A, t: BoundaryTriplet, f=None) -> ConvexFn:
    """psi = phi + 1/2<Ax,x> - 1/4(|b2 x|^2 - |b1 x|^2) + <f, x>, with its quadratic part
    checked for convexity (positivity of A modulo the boundary)."""
    Am = as_linop(A)
    Ab = Am.A if Am.metric is None else Am.metric @ Am.A
    B1, B2 = t.b1.A, t.b2.A
    Q = 0.5 * (Ab + Ab.T) - 0.5 * (B2.T @ B2 - B1.T @ B1)
    if not classify(Q).positive:
        raise ValueError("A is not positive modulo the boundary operator")
    n = Q.shape[0]
    q = Quadratic(Q, np.zeros(n) if f is None else _vec(f))
    return q if phi is None else add(phi, q)


def assemble_boundary_problem(L: Lagrangian, t: BoundaryTriplet, ell: BoundaryLagrangian,
                              check_tol: float = 1e-8) -> StationaryProblem:
    """I(x) = L(x, Lambda x) + l(b1 x, b2 x) with post-solve checks."""
    if triplet_residual(t) > check_tol:
        raise ValueError("triplet is not skew modulo the boundary")
    d = L.dim
    Lam = _pairing(t)
    B1, B2 = t.b1.A, t.b2.A
    if B1.shape[0] != ell.dim_h1 or B2.shape[0] != ell.dim_h2:
        raise ValueError("boundary operator ranges do not match the boundary Lagrangian")
    n = d + L.n_aux
    Z = np.zeros((L.nz, n))
    Z[:d, :d] = np.eye(d)
    Z[d:2 * d, :d] = Lam
    Z[2 * d:, d:] = np.eye(L.n_aux)
    prog = L.program(Z)
    Bz = np.zeros((ell.fn.dim, n))
    Bz[: ell.dim_h1, :d] = B1
    Bz[ell.dim_h1:, :d] = B2
    prog.terms.append(Term(ell.fn, Bz, None))
    bulk = L.program(Z)

    def fy(z):
        x = z[:d]
        return abs(bulk.value(z) + float(x @ (Lam @ x)))

    def ell_identity(z):
        x = z[:d]
        b1, b2 = B1 @ x, B2 @ x
        return abs(ell(b1, b2) - 0.5 * (b2 @ b2 - b1 @ b1))

    checks = {"pointwise_identity": fy, "boundary_identity": ell_identity}
    if ell.tag == "dirichlet":
        checks["dirichlet_datum"] = lambda z: float(np.max(np.abs(B1 @ z[:d] - ell.a)))
    return StationaryProblem(prog, d, checks, fy, {"kind": "boundary", "lagrangian": L.tag})


def solve_boundary_problem(L: Lagrangian, t: BoundaryTriplet, ell: BoundaryLagrangian,
                           policy: NumericPolicy = DEFAULT_POLICY, z0=None) -> SolveReport:
    return solve_problem(assemble_boundary_problem(L, t, ell), policy, z0)
