"""Zero-gap minimization of I(x) = L(x, Lambda x) and the stationary
applications built on it (non-symmetric linear systems, inclusions,
variational inequalities, anti-Hamiltonian systems, primal-dual pairs)."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .convex_core import (INF, ConvexFn, ConvexSet, Indicator, Quadratic, WholeSpace, Box,
                          _vec, add, fenchel_young_gap)
from .engine import EngineResult, Program, Term, minimize
from .lagrangian import Lagrangian, basic, shift, twisted
from .linops import LinOp, as_linop, classify, decompose
from .policy import DEFAULT_POLICY, NumericPolicy


class NotSkewError(ValueError):
    pass


class CoercivityError(ValueError):
    pass


@dataclass
class SolveReport:
    minimizer: np.ndarray
    gap: float
    fy_residual: float
    iterations: int
    converged: bool
    certified: bool = False
    tol_gap: float = 0.0
    diverged: bool = False
    method: str = ""
    check_results: Dict[str, float] = field(default_factory=dict)
    extras: Dict[str, object] = field(default_factory=dict)

    def as_dict(self) -> dict:
        d = {
            "minimizer": np.asarray(self.minimizer).tolist(),
            "gap": self.gap,
            "fy_residual": self.fy_residual,
            "iterations": self.iterations,
            "converged": self.converged,
            "certified": self.certified,
            "tol_gap": self.tol_gap,
            "diverged": self.diverged,
            "method": self.method,
            "check_results": dict(self.check_results),
        }
        for k, v in self.extras.items():
            d[k] = np.asarray(v).tolist() if isinstance(v, np.ndarray) else v
        return d


@dataclass
class StationaryProblem:
    """Objective over z = [x; aux] given as a term program."""

    program: Program
    dim: int
    post_checks: Dict[str, Callable] = field(default_factory=dict)
    fy: Optional[Callable] = None
    metadata: Dict[str, object] = field(default_factory=dict)
    project: Optional[Callable] = None

    def objective(self, x) -> float:
        """I(x) with hidden variables minimized out."""
        x = _vec(x)
        n_aux = self.program.n - self.dim
        if n_aux == 0:
            return self.program.value(x)
        Z = np.zeros((self.program.n, n_aux))
        Z[self.dim:, :] = np.eye(n_aux)
        s = np.concatenate([x, np.zeros(n_aux)])
        terms = [Term(t.fn, t.M @ Z, t.M @ s + t.c, t.weight) for t in self.program.terms]
        sub = Program(n_aux, terms, Z.T @ self.program.lin, self.program.const + self.program.lin @ s)
        return float(minimize(sub).value)


def coercivity_probe(f: Callable, dim: int, seed: int = 0, radii=(10.0, 100.0, 1000.0)) -> bool:
    """Superlinear growth along 2*dim random rays."""
    rng = np.random.default_rng(seed)
    f0 = f(np.zeros(dim))
    base = f0 if np.isfinite(f0) else 0.0
    for _ in range(2 * dim):
        u = rng.standard_normal(dim)
        u /= np.linalg.norm(u)
        g = []
        for r in radii:
            v = f(r * u)
            g.append(INF if not np.isfinite(v) else (v - base) / r)
        if np.isinf(g[-1]):
            continue
        if not (g[-1] > g[-2] > g[0] - 1e-12 and g[-1] > 0):
            return False
    return True


def solve_problem(prob: StationaryProblem, policy: NumericPolicy = DEFAULT_POLICY, z0=None,
                  method: str = "auto") -> SolveReport:
    n = prob.program.n
    z0 = np.zeros(n) if z0 is None else _vec(z0)
    i0 = prob.program.value(z0)
    tol = policy.tol_gap(i0 if np.isfinite(i0) else 0.0)
    r: EngineResult = minimize(prob.program, z0, policy, method=method, project=prob.project)
    z = r.z
    x = z[: prob.dim]
    gap = float(r.value)
    checks = {name: float(fn(z)) for name, fn in prob.post_checks.items()} if not r.diverged else {}
    fy = float(prob.fy(z)) if (prob.fy is not None and not r.diverged) else abs(gap)
    certified = bool(r.converged and not r.diverged and -1e-8 <= gap <= tol)
    return SolveReport(x, gap, fy, r.iterations, r.converged, certified, tol, r.diverged, r.method,
                       checks, {"z": z} if n > prob.dim else {})


# ---------------------------------------------------------------------------


def _mat(A) -> np.ndarray:
    return as_linop(A).A


def _check_skew(M: np.ndarray, what: str, tol: float = 1e-10):
    if np.abs(M + M.T).max() > tol * max(1.0, np.abs(M).max()):
        raise NotSkewError(f"{what} is not skew-adjoint")


def asd_problem(L: Lagrangian, Lam=None, R=None) -> StationaryProblem:
    """I(x) = L(x, Lam x) as a term program over [x; hidden variables]."""
    d = L.dim
    Lm = np.zeros((d, d)) if Lam is None else _mat(Lam)
    Rm = np.eye(d) if R is None else _mat(R)
    if abs(np.linalg.det(Rm)) < 1e-14:
        raise ValueError("automorphism must be invertible")
    _check_skew(Lm @ Rm, "Lambda o R")
    n = d + L.n_aux
    Z = np.zeros((L.nz, n))
    Z[:d, :d] = np.eye(d)
    Z[d:2 * d, :d] = Lm
    Z[2 * d:, d:] = np.eye(L.n_aux)
    prog = L.program(Z)
    Rinv = np.linalg.inv(Rm)

    def fy(z):
        x = z[:d]
        return abs(prog.value(z) + float((Rinv @ x) @ (Lm @ x)))

    return StationaryProblem(prog, d, fy=fy, metadata={"kind": "asd", "lagrangian": L.tag})


def minimize_asd(L: Lagrangian, Lam=None, R=None, policy: NumericPolicy = DEFAULT_POLICY,
                 x0=None, check_coercive: bool = False) -> SolveReport:
    prob = asd_problem(L, Lam, R)
    if check_coercive and not coercivity_probe(prob.objective, L.dim):
        raise CoercivityError("I(x) = L(x, Lambda x) failed the coercivity probe")
    z0 = None
    if x0 is not None:
        z0 = np.concatenate([_vec(x0), np.zeros(prob.program.n - L.dim)])
    return solve_problem(prob, policy, z0)


# ---------------------------------------------------------------------------
# applications
# ---------------------------------------------------------------------------


def solve_linear_nonsym(A, y, policy: NumericPolicy = DEFAULT_POLICY) -> SolveReport:
    """Solve Ax = y by minimizing 1/2<Ax,x> + 1/2<A_s^{-1}(y - A_a x), y - A_a x> - <y,x>."""
    A = as_linop(A)
    y = _vec(y)
    c = classify(A)
    if c.coercive_constant <= 0:
        raise ValueError("A must be coercive")
    As, Aa = decompose(A)
    psi = Quadratic(As.A, -y)
    rep = minimize_asd(basic(psi), Aa.A, policy=policy)
    rep.check_results["residual_Ax_minus_y"] = float(np.linalg.norm(A.A @ rep.minimizer - y))
    return rep


def pair_lagrangian(phi: ConvexFn, A) -> tuple[Lagrangian, np.ndarray]:
    """ASD Lagrangian of the pair (phi, A): basic(phi + 1/2<A_s x, x>) shifted by A_a,
    returned as (basic Lagrangian, A_a) for use with minimize_asd."""
    As, Aa = decompose(as_linop(A))
    psi = add(phi, Quadratic(As.A)) if np.any(As.A) else phi
    return basic(psi), Aa.A


def project_pair(phi: ConvexFn, A) -> tuple[ConvexFn, LinOp]:
    """The projection (phi, A) -> (phi + 1/2<A_s x, x>, A_a)."""
    As, Aa = decompose(as_linop(A))
    return (add(phi, Quadratic(As.A)) if np.any(As.A) else phi), Aa


def solve_inclusion(A, phi: ConvexFn, f, policy: NumericPolicy = DEFAULT_POLICY,
                    check_coercive: bool = True) -> SolveReport:
    """-Ax + f in d phi(x) by minimizing psi(x) + psi*(-A_a x), psi = 1/2<Ax,x> + phi - <f,x>."""
    A = as_linop(A)
    f = _vec(f)
    if not classify(A).positive:
        raise ValueError("A must be positive")
    As, Aa = decompose(A)
    psi = add(phi, Quadratic(As.A, -f))
    L = basic(psi)
    prob = asd_problem(L, Aa.A)
    if check_coercive and not coercivity_probe(psi, A.rows):
        raise CoercivityError("psi failed the coercivity probe")
    rep = solve_problem(prob, policy)
    x = rep.minimizer
    v = -A.A @ x + f
    rep.check_results["inclusion_fenchel"] = fenchel_young_gap(phi, x, v)
    return rep


def _sample_in(K: ConvexSet, m: int, rng, scale: float = 1.0):
    if isinstance(K, Box):
        lo = np.where(np.isfinite(K.lo), K.lo, -scale)
        hi = np.where(np.isfinite(K.hi), K.hi, lo + 2 * scale)
        return lo + (hi - lo) * rng.random((m, K.dim))
    return np.array([K.project(scale * rng.standard_normal(K.dim)) for _ in range(m)])


def vi_slack(A, f, K: ConvexSet, x, samples: int = 1000, seed: int = 0) -> float:
    """max over sampled z in K of a(x, x - z) - <x - z, f>."""
    Am = _mat(A)
    x, f = _vec(x), _vec(f)
    zs = _sample_in(K, samples, np.random.default_rng(seed), scale=1.0 + np.abs(x).max())
    zs = np.vstack([zs, K.project(x)[None, :]])
    d = x[None, :] - zs
    return float(np.max(d @ (Am @ x) - d @ f))


def solve_variational_inequality(a_form, K: ConvexSet, f, policy: NumericPolicy = DEFAULT_POLICY,
                                 samples: int = 1000, seed: int = 0) -> SolveReport:
    """a(x, x - z) <= <x - z, f> for all z in K, by minimizing
    (phi + psi_K)(x) + (phi + psi_K)*(-A_a x) with phi = 1/2<A_s u,u> - <f,u>."""
    A = as_linop(a_form)
    f = _vec(f)
    if classify(A).coercive_constant <= 0:
        raise ValueError("bilinear form must be coercive")
    As, Aa = decompose(A)
    psi = add(Quadratic(As.A, -f), Indicator(K))
    prob = asd_problem(basic(psi), Aa.A)
    rep = solve_problem(prob, policy, z0=K.project(np.zeros(A.rows)))
    x = rep.minimizer
    rep.check_results["vi_slack"] = vi_slack(A.A, f, K, x, samples, seed)
    rep.check_results["distance_to_K"] = float(np.linalg.norm(K.project(x) - x))
    return rep


def anti_hamiltonian_operator(A, B1, B2) -> np.ndarray:
    """Lambda(x, y) = (A' y - B1 x, -A x - B2 y), skew when B1, B2 are."""
    Am, B1m, B2m = _mat(A), _mat(B1), _mat(B2)
    return np.block([[-B1m, Am.T], [-Am, -B2m]])


def solve_anti_hamiltonian(phi: ConvexFn, A, B1, B2, policy: NumericPolicy = DEFAULT_POLICY) -> SolveReport:
    """(-A' y + B1 x, A x + B2 y) in d phi(x, y) via phi(x,y) + phi*(-A'y + B1 x, Ax + B2 y)."""
    B1m, B2m = _mat(B1), _mat(B2)
    _check_skew(B1m, "B1")
    _check_skew(B2m, "B2")
    Lam = anti_hamiltonian_operator(A, B1m, B2m)
    rep = minimize_asd(basic(phi), Lam, policy=policy)
    z = rep.minimizer
    rep.check_results["inclusion_fenchel"] = fenchel_young_gap(phi, z, -Lam @ z)
    dx = B1m.shape[0]
    rep.extras["x"], rep.extras["y"] = z[:dx], z[dx:]
    return rep


class _Separable(ConvexFn):
    """chi_1(x) + w chi_2(y)."""

    def __init__(self, f1: ConvexFn, f2: ConvexFn, w2: float = 1.0):
        super().__init__(f1.dim + f2.dim)
        self.f1, self.f2, self.w2 = f1, f2, float(w2)
        self.smooth = f1.smooth and f2.smooth
        self.has_hess = f1.has_hess and f2.has_hess
        self.strictly_convex = f1.strictly_convex and f2.strictly_convex
        self.strongly_convex = f1.strongly_convex and f2.strongly_convex

    def _s(self, z):
        z = _vec(z)
        return z[: self.f1.dim], z[self.f1.dim:]

    def __call__(self, z):
        x, y = self._s(z)
        a, b = self.f1(x), self.f2(y)
        return a + self.w2 * b if np.isfinite(a) and np.isfinite(b) else INF

    def subgrad(self, z):
        x, y = self._s(z)
        return np.concatenate([self.f1.subgrad(x), self.w2 * self.f2.subgrad(y)])

    def hess(self, z):
        x, y = self._s(z)
        n1 = self.f1.dim
        H = np.zeros((self.dim, self.dim))
        H[:n1, :n1] = self.f1.hess(x)
        H[n1:, n1:] = self.w2 * self.f2.hess(y)
        return H

    def prox(self, z, lam):
        x, y = self._s(z)
        return np.concatenate([self.f1.prox(x, lam), self.f2.prox(y, lam * self.w2)])

    def conjugate(self):
        from .convex_core import Scaled
        return _Separable(self.f1.conjugate(), Scaled(self.w2, self.f2.conjugate(), self.w2))


def separable(f1: ConvexFn, f2: ConvexFn) -> ConvexFn:
    return _Separable(f1, f2)


def solve_coupled_system(phi1: ConvexFn, phi2: ConvexFn, A, B1, B2, f, g, c: float = 1.0,
                         policy: NumericPolicy = DEFAULT_POLICY) -> SolveReport:
    """-A'y - B1 x + f in d phi1(x),  c^2 A x - B2 y + g in d phi2(y), with B1, B2 positive.

    The scaled pairing <x,p> + c^-2 <y,q> is realized by weighting the second
    block by c^-2, which turns (x, y) -> (-A'y, c^2 A x) into a skew operator.
    """
    Am, B1m, B2m = _mat(A), _mat(B1), _mat(B2)
    if not (classify(B1m).positive and classify(B2m).positive):
        raise ValueError("B1 and B2 must be positive")
    S1, K1 = decompose(B1m)
    S2, K2 = decompose(B2m)
    chi1 = add(phi1, Quadratic(S1.A, -_vec(f)))
    chi2 = add(phi2, Quadratic(S2.A, -_vec(g)))
    Phi = _Separable(chi1, chi2, c ** -2)
    dx, dy = B1m.shape[0], B2m.shape[0]
    # Lambda z = (-A'y - K1 x, A x - c^-2 K2 y); inclusion Lambda z in d Phi(z), i.e. Phi(z) + Phi*(Lambda z)
    Lam = np.block([[-K1.A, -Am.T], [Am, -(c ** -2) * K2.A]])
    rep = minimize_asd(basic(Phi), -Lam, policy=policy)
    z = rep.minimizer
    x, y = z[:dx], z[dx:]
    rep.extras["x"], rep.extras["y"] = x, y
    rep.check_results["eq1_fenchel"] = fenchel_young_gap(phi1, x, -Am.T @ y - B1m @ x + _vec(f))
    rep.check_results["eq2_fenchel"] = fenchel_young_gap(phi2, y, c * c * Am @ x - B2m @ y + _vec(g))
    return rep


def solve_fenchel_rockafellar(phi: ConvexFn, psi: ConvexFn, A, policy: NumericPolicy = DEFAULT_POLICY,
                              check_coercive: bool = True) -> SolveReport:
    """min phi(x) + psi(Ax) through the zero-gap functional
    phi(x) + psi*(y) + phi*(-A'y) + psi(Ax) on X x Y."""
    Am = _mat(A)
    m, n = Am.shape
    phis, psis = phi.conjugate(), psi.conjugate()
    Ix = np.hstack([np.eye(n), np.zeros((n, m))])
    Iy = np.hstack([np.zeros((m, n)), np.eye(m)])
    prog = Program(n + m, [
        Term(phi, Ix, None),
        Term(psis, Iy, None),
        Term(phis, -Am.T @ Iy, None),
        Term(psi, Am @ Ix, None),
    ])
    prob = StationaryProblem(prog, n + m, metadata={"kind": "fenchel_rockafellar"})
    if check_coercive and not coercivity_probe(prog.value, n + m):
        raise CoercivityError("joint functional failed the coercivity probe")
    rep = solve_problem(prob, policy)
    z = rep.minimizer
    x, y = z[:n], z[n:]
    rep.extras["x"], rep.extras["y"] = x, y
    primal = phi(x) + psi(Am @ x)
    dual = -psis(y) - phis(-Am.T @ y)
    rep.extras["primal_value"], rep.extras["dual_value"] = float(primal), float(dual)
    rep.check_results["duality_gap"] = float(primal - dual)
    rep.check_results["fy_phi"] = fenchel_young_gap(phi, x, -Am.T @ y, phis)
    rep.check_results["fy_psi"] = fenchel_young_gap(psi, Am @ x, y, psis)
    return rep


def solve_twisted(L: Lagrangian, M: Lagrangian, A, policy: NumericPolicy = DEFAULT_POLICY) -> SolveReport:
    """Minimize L(x, A'y) + M(y, -Ax); both pieces vanish against their pairings at the optimum."""
    Am = _mat(A)
    T = twisted(L, M, Am)
    rep = minimize_asd(T, None, policy=policy)
    z = rep.minimizer
    x, y = z[:L.dim], z[L.dim:]
    rep.extras["x"], rep.extras["y"] = x, y
    rep.check_results["L_identity"] = abs(L(x, Am.T @ y) + float(x @ (Am.T @ y)))
    rep.check_results["M_identity"] = abs(M(y, -Am @ x) - float(y @ (Am @ x)))
    return rep


__all__ = [
    "SolveReport", "StationaryProblem", "NotSkewError", "CoercivityError", "coercivity_probe",
    "solve_problem", "asd_problem", "minimize_asd", "solve_linear_nonsym", "pair_lagrangian",
    "project_pair", "solve_inclusion", "vi_slack", "solve_variational_inequality",
    "anti_hamiltonian_operator", "solve_anti_hamiltonian", "separable", "solve_coupled_system",
    "solve_fenchel_rockafellar", "solve_twisted",
]
