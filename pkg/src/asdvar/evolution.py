"""Path-space lifting of ASD Lagrangians and the flow solvers built on it.

A path u_0..u_N on a uniform grid is scored by

    I(u) = sum_i dt e^{2 w th_i} L(th_i, ut_i, q_i) + l(u_0, e^{wT} u_N)

where, with v = e^{wt} u,

    ut_i = e^{-w th_i} (v_i + v_{i+1}) / 2,     q_i = e^{-w th_i} (v_{i+1} - v_i)/dt - w ut_i.

For w = 0 this is the midpoint state with the forward-difference velocity.
The weighted pairing sum_i dt <vh_i, Dv_i> telescopes exactly, so the
discrete infimum is 0 at the discrete solution for every w.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict, Optional, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .boundary import BoundaryLagrangian
from .convex_core import ConvexFn, Quadratic, _vec, add, newton_minimize
from .engine import Program, Term, minimize
from .lagrangian import Lagrangian, basic, substitute, yosida_regularize
from .linops import LinOp, as_linop, classify
from .policy import DEFAULT_POLICY, NumericPolicy
from .stationary import CoercivityError, SolveReport, StationaryProblem, coercivity_probe, solve_problem


@dataclass(frozen=True)
class TimeGrid:
    T: float
    N: int
    t0: float = 0.0

    def __post_init__(self):
        if not (self.T > 0 and np.isfinite(self.T)):
            raise ValueError("T must be positive and finite")
        if int(self.N) != self.N or self.N < 1:
            raise ValueError("N must be a positive integer")

    @property
    def dt(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(self.N + 1)

    @property
    def midpoints(self) -> np.ndarray:
        return self.t0 + self.dt * (np.arange(self.N) + 0.5)

    def halved(self) -> "TimeGrid":
        return TimeGrid(self.T, 2 * self.N, self.t0)


@dataclass
class Path:
    grid: TimeGrid
    values: np.ndarray  # (N+1, d)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.shape[0] != self.grid.N + 1:
            raise ValueError("path needs N+1 nodes")
        if not np.all(np.isfinite(v)):
            raise ValueError("path has non-finite entries")
        self.values = v

    @property
    def dim(self) -> int:
        return self.values.shape[1]

    @property
    def t(self) -> np.ndarray:
        return self.grid.nodes

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.values[1:] + self.values[:-1])

    @property
    def velocities(self) -> np.ndarray:
        return np.diff(self.values, axis=0) / self.grid.dt

    @property
    def final(self) -> np.ndarray:
        return self.values[-1]


LagrangianOfT = Union[Lagrangian, Callable[[float], Lagrangian]]


@dataclass
class FlowProblem:
    """Time Lagrangian (fixed or t -> L_t), boundary l on H x H, weight w and
    an optional metric G on H (all pairings <x, y>_G = x' G y)."""

    lagrangian: LagrangianOfT
    boundary: BoundaryLagrangian
    omega: float = 0.0
    metric: Optional[np.ndarray] = None

    def at(self, t: float) -> Lagrangian:
        L = self.lagrangian
        return L if isinstance(L, Lagrangian) else L(float(t))

    @property
    def autonomous(self) -> bool:
        return isinstance(self.lagrangian, Lagrangian)

    @property
    def dim(self) -> int:
        return self.at(0.0).dim

    def gram(self) -> np.ndarray:
        d = self.dim
        return np.eye(d) if self.metric is None else np.asarray(self.metric, dtype=float)

    def validate(self, times: Sequence[float] = (0.0,), samples: int = 20, seed: int = 0) -> float:
        """max |L_t*_G(p, x) - L_t(-x, -p)| over sampled t and (x, p)."""
        G = self.gram()
        rng = np.random.default_rng(seed)
        worst = 0.0
        for t in times:
            L = self.at(t)
            for _ in range(samples):
                x, p = rng.standard_normal(L.dim), rng.standard_normal(L.dim)
                a = L.conjugate(G @ p, G @ x, mode="numeric").value
                b = L(-x, -p)
                if np.isfinite(a) and np.isfinite(b):
                    worst = max(worst, abs(a - b))
        return worst


def time_boundary(u0, metric=None) -> BoundaryLagrangian:
    """l(r, s) = 1/2|r|^2 - 2<r, u0> + |u0|^2 + 1/2|s|^2 in the metric G."""
    u0 = _vec(u0)
    d = u0.size
    G = np.eye(d) if metric is None else np.asarray(metric, dtype=float)
    Q = np.zeros((2 * d, 2 * d))
    Q[:d, :d] = G
    Q[d:, d:] = G
    b = np.concatenate([-2.0 * (G @ u0), np.zeros(d)])
    return BoundaryLagrangian(Quadratic(Q, b, float(u0 @ G @ u0)), d, d, "dirichlet", u0)


def flow_lagrangian(phi: Optional[ConvexFn], A=None, f=None, omega: float = 0.0, metric=None,
                    dim: Optional[int] = None) -> Lagrangian:
    """L(x, p) = psi(x) + psi*(-B_a x - w G x - G p) with B = G A and
    psi = phi + 1/2<B_s x, x> - <G f, x>."""
    d = dim or (phi.dim if phi is not None else as_linop(A).cols)
    G = np.eye(d) if metric is None else np.asarray(metric, dtype=float)
    Am = np.zeros((d, d)) if A is None else as_linop(A).A
    B = G @ Am
    Bs = 0.5 * (B + B.T)
    Ba = B - Bs
    if not classify(Bs).positive:
        raise ValueError("A must be positive in the metric")
    fv = np.zeros(d) if f is None else _vec(f)
    q = Quadratic(Bs, -(G @ fv))
    psi = q if phi is None else add(phi, q)
    T = np.zeros((2 * d, 2 * d))
    T[:d, :d] = np.eye(d)
    T[d:, :d] = Ba + omega * G
    T[d:, d:] = G
    return substitute(basic(psi), T, node=("flow", psi), asd_guaranteed=True)


# ---------------------------------------------------------------------------
# lifting
# ---------------------------------------------------------------------------


@dataclass
class _Lift:
    n: int
    d: int
    n_aux: int
    cells: list  # (Z_i sparse, weight_i, th_i)
    bnd: object  # sparse map to (u_0, e^{wT} u_N)


def _lift_maps(fp: FlowProblem, grid: TimeGrid) -> _Lift:
    d = fp.dim
    N, dt, w = grid.N, grid.dt, fp.omega
    L0 = fp.at(grid.t0)
    na = L0.n_aux
    nu = (N + 1) * d
    n = nu + N * na
    t = grid.nodes
    th = grid.midpoints
    I = sp.identity(d, format="csr")
    cells = []
    for i in range(N):
        em = np.exp(-w * th[i])
        a, b = em * np.exp(w * t[i]), em * np.exp(w * t[i + 1])
        rows_x = sp.hstack([0.5 * a * I, 0.5 * b * I])
        rows_p = sp.hstack([(-a / dt - 0.5 * w * a) * I, (b / dt - 0.5 * w * b) * I])
        Z = sp.lil_matrix((2 * d + na, n))
        Z[:d, i * d:(i + 2) * d] = rows_x
        Z[d:2 * d, i * d:(i + 2) * d] = rows_p
        if na:
            Z[2 * d:, nu + i * na: nu + (i + 1) * na] = sp.identity(na)
        cells.append((Z.tocsr(), dt * np.exp(2.0 * w * th[i]), th[i]))
    Bm = sp.lil_matrix((2 * d, n))
    Bm[:d, :d] = I
    Bm[d:, N * d:(N + 1) * d] = np.exp(w * grid.T) * I
    return _Lift(n, d, na, cells, Bm.tocsr())


def _cell_states(lift: _Lift, z):
    d = lift.d
    out = []
    for Z, wt, th in lift.cells:
        y = Z @ z
        out.append((y[:d], y[d:2 * d], wt, th))
    return out


def lift_to_path(fp: FlowProblem, grid: TimeGrid) -> StationaryProblem:
    """Discrete path functional as a term program over [u_0..u_N; hidden]."""
    lift = _lift_maps(fp, grid)
    terms, lin, const = [], np.zeros(lift.n), 0.0
    for Z, wt, th in lift.cells:
        L = fp.at(th)
        if L.n_aux != lift.n_aux:
            raise ValueError("time Lagrangians must share their hidden-variable count")
        tk, lk, ck = L.lifted(Z, weight=wt)
        terms += tk
        lin = lin + lk
        const += ck
    terms.append(Term(fp.boundary.fn, lift.bnd, None))
    prog = Program(lift.n, terms, lin, const)
    return StationaryProblem(prog, (grid.N + 1) * lift.d,
                             metadata={"kind": "path", "N": grid.N, "T": grid.T, "omega": fp.omega})


def path_from(z, grid: TimeGrid, d: int) -> Path:
    return Path(grid, np.asarray(z[: (grid.N + 1) * d]).reshape(grid.N + 1, d))


def path_objective(fp: FlowProblem, path: Path) -> float:
    """I(u) with hidden variables (if any) minimized out."""
    prob = lift_to_path(fp, path.grid)
    return prob.objective(path.values.ravel())


def solve_flow(fp: FlowProblem, grid: TimeGrid, policy: NumericPolicy = DEFAULT_POLICY,
               u_start=None) -> tuple[Path, SolveReport]:
    prob = lift_to_path(fp, grid)
    d = fp.dim
    start = _vec(fp.boundary.a) if (u_start is None and fp.boundary.a is not None) else (
        np.zeros(d) if u_start is None else _vec(u_start))
    z0 = np.concatenate([np.tile(start, grid.N + 1), np.zeros(prob.program.n - prob.dim)])
    rep = solve_problem(prob, policy, z0)
    path = path_from(rep.minimizer, grid, d)
    rep.extras["z"] = rep.extras.get("z", np.asarray(rep.minimizer))
    return path, rep


# ---------------------------------------------------------------------------
# solvers
# ---------------------------------------------------------------------------


def _flow_checks(path: Path, fp: FlowProblem, rep: SolveReport, oracle: Optional[Path]):
    checks = {}
    if fp.boundary.a is not None:
        checks["initial_condition"] = float(np.max(np.abs(path.values[0] - fp.boundary.a)))
    checks["inclusion_fenchel"] = inclusion_residual(path, fp)
    checks["energy_residual"] = energy_residual(path, fp)
    if oracle is not None:
        checks["oracle_distance"] = float(np.max(np.abs(path.values - oracle.values)))
    rep.check_results.update(checks)
    rep.extras.pop("z", None)
    rep.extras["t"] = path.t
    rep.extras["final"] = path.final
    return rep


def _coercive_check(fp: FlowProblem, grid: TimeGrid, probe: bool):
    if not probe:
        return
    # growth of x -> L_t(x, 0), sampled at every cell midpoint when L depends on t
    times = [grid.t0] if fp.autonomous else grid.midpoints
    for t in times:
        L = fp.at(t)
        if L.n_aux:
            continue
        d = L.dim
        if not coercivity_probe(lambda x: L(x, np.zeros(d)) + 0.0, d):
            raise CoercivityError(f"x -> L(x, 0) failed the coercivity probe at t={t:g}")


def solve_semiconvex_flow(phi: Optional[ConvexFn], A, omega: float, u0, grid: TimeGrid, f=None,
                          metric=None, policy: NumericPolicy = DEFAULT_POLICY,
                          with_oracle: bool = True, probe: bool = False) -> tuple[Path, SolveReport]:
    """Solve -A u - w u - u' + f in d_G phi(u), u(0) = u0, through the weighted lift."""
    u0 = _vec(u0)
    d = u0.size
    L = flow_lagrangian(phi, A, f, omega, metric, dim=d)
    fp = FlowProblem(L, time_boundary(u0, metric), omega, metric)
    _coercive_check(fp, grid, probe)
    path, rep = solve_flow(fp, grid, policy)
    oracle = None
    if with_oracle:
        oracle = implicit_euler_oracle(phi, A, omega, u0, grid, f=f, metric=metric, dim=d)
    rep.extras["omega"] = float(omega)
    return path, _flow_checks(path, fp, rep, oracle)


def solve_gradient_flow(phi: Optional[ConvexFn], A, f, u0, grid: TimeGrid, metric=None,
                        policy: NumericPolicy = DEFAULT_POLICY, with_oracle: bool = True,
                        probe: bool = False) -> tuple[Path, SolveReport]:
    """Solve -A u - u' + f in d phi(u), u(0) = u0."""
    return solve_semiconvex_flow(phi, A, 0.0, u0, grid, f, metric, policy, with_oracle, probe)


def coupled_operator(A, B1, B2) -> np.ndarray:
    """[[B1, A'], [-A, B2]] on X x Y (A: X -> Y)."""
    Am = as_linop(A).A
    B1m, B2m = as_linop(B1).A, as_linop(B2).A
    return np.block([[B1m, Am.T], [-Am, B2m]])


def solve_coupled_flow(phi: ConvexFn, A, B1, B2, f, g, x0, y0, grid: TimeGrid,
                       policy: NumericPolicy = DEFAULT_POLICY) -> tuple[Path, SolveReport]:
    """Solve -x' - A'y - B1 x + f in d_1 phi(x, y) and -y' + A x - B2 y + g in d_2 phi(x, y)."""
    x0, y0 = _vec(x0), _vec(y0)
    dx = x0.size
    for B in (B1, B2):
        if not classify(B).positive:
            raise ValueError("B1 and B2 must be positive")
    Op = coupled_operator(A, B1, B2)
    F = np.concatenate([_vec(f), _vec(g)])
    path, rep = solve_semiconvex_flow(phi, Op, 0.0, np.concatenate([x0, y0]), grid, F, policy=policy)
    u = path.values
    rep.check_results["initial_x"] = float(np.max(np.abs(u[0, :dx] - x0)))
    rep.check_results["initial_y"] = float(np.max(np.abs(u[0, dx:] - y0)))
    rep.check_results.pop("initial_condition", None)
    return path, rep


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def _prox_metric(phi: ConvexFn, y, lam: float, G: Optional[np.ndarray]):
    """argmin phi(z) + 1/(2 lam) |z - y|_G^2."""
    if G is None:
        return phi.prox(y, lam)
    dg = np.diag(G)
    if np.allclose(G, np.diag(dg), atol=0) and np.allclose(dg, dg[0], rtol=1e-14, atol=0):
        return phi.prox(y, lam / dg[0])
    if phi.has_hess and phi.smooth:
        def vgh(z):
            r = z - y
            v = phi(z) + 0.5 / lam * float(r @ G @ r)
            return v, phi.subgrad(z) + (G @ r) / lam, phi.hess(z) + G / lam
        z, ok = newton_minimize(vgh, y.copy())
        if ok:
            return z
    d = y.size
    prog = Program(d, [Term(phi, np.eye(d), None), Term(Quadratic(G / lam, -(G @ y) / lam), np.eye(d), None)])
    return minimize(prog, y.copy()).z


def implicit_euler_oracle(phi: Optional[ConvexFn], A, omega: float, u0, grid: TimeGrid, f=None,
                          metric=None, dim: Optional[int] = None) -> Path:
    """Resolvent stepping: y = (I + dt(A + w I))^{-1}(u_i + dt f), u_{i+1} = prox_G(phi, y, dt)."""
    u = _vec(u0)
    d = dim or u.size
    Am = np.zeros((d, d)) if A is None else as_linop(A).A
    fv = np.zeros(d) if f is None else _vec(f)
    G = None if metric is None else np.asarray(metric, dtype=float)
    dt = grid.dt
    M = np.eye(d) + dt * (Am + omega * np.eye(d))
    out = [u.copy()]
    for _ in range(grid.N):
        y = np.linalg.solve(M, u + dt * fv)
        u = y if phi is None else _vec(_prox_metric(phi, y, dt, G))
        out.append(u.copy())
    return Path(grid, np.array(out))


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def _cell_data(path: Path, fp: FlowProblem):
    lift = _lift_maps(fp, path.grid)
    z = np.concatenate([path.values.ravel(), np.zeros(lift.n - (path.grid.N + 1) * lift.d)])
    return _cell_states(lift, z)


def inclusion_residual(path: Path, fp: FlowProblem) -> float:
    """max_i L(ut_i, q_i) + <ut_i, w ut_i + q_i>_G, the per-step Fenchel residual."""
    G = fp.gram()
    worst = 0.0
    for x, p, _, th in _cell_data(path, fp):
        v = fp.at(th)(x, p) + float(x @ G @ (fp.omega * x + p))
        worst = max(worst, v if np.isfinite(v) else np.inf)
    return float(worst)


def energy_profile(path: Path, fp: FlowProblem) -> np.ndarray:
    """r_k = |v_k|_G^2 - |v_0|_G^2 + 2 sum_{i<k} dt e^{2 w th_i} L(ut_i, q_i)."""
    G = fp.gram()
    v = path.values * np.exp(fp.omega * path.t)[:, None]
    nrm = np.einsum("ki,ij,kj->k", v, G, v)
    acc = [0.0]
    for x, p, wt, th in _cell_data(path, fp):
        acc.append(acc[-1] + wt * fp.at(th)(x, p))
    return nrm - nrm[0] + 2.0 * np.array(acc)


def energy_residual(path: Path, fp: FlowProblem) -> float:
    return float(np.max(np.abs(energy_profile(path, fp))))


def pairing_telescoping_residual(path: Path, metric=None) -> float:
    """|sum_i dt <uh_i, Du_i>_G - 1/2(|u_N|_G^2 - |u_0|_G^2)|."""
    G = np.eye(path.dim) if metric is None else np.asarray(metric, dtype=float)
    uh, Du = path.midpoints, path.velocities
    lhs = path.grid.dt * float(np.einsum("ki,ij,kj->", uh, G, Du))
    u0, uN = path.values[0], path.values[-1]
    return abs(lhs - 0.5 * (uN @ G @ uN - u0 @ G @ u0))


def continuum_gap(path: Path, fp: FlowProblem, order: int = 3) -> float:
    """Continuum functional at the piecewise-linear interpolant (Gauss rule per cell)."""
    xg, wg = np.polynomial.legendre.leggauss(order)
    dt = path.grid.dt
    tot = 0.0
    for i in range(path.grid.N):
        a, b = path.values[i], path.values[i + 1]
        du = (b - a) / dt
        for xk, wk in zip(xg, wg):
            s = 0.5 * (1.0 + xk)
            t = path.t[i] + s * dt
            u = (1.0 - s) * a + s * b
            tot += 0.5 * dt * wk * np.exp(2.0 * fp.omega * t) * fp.at(t)(u, du)
    uN = np.exp(fp.omega * path.grid.T) * path.values[-1]
    return float(tot + fp.boundary(path.values[0], uN))


def node_distances(x: Path, y: Path, metric=None) -> np.ndarray:
    G = np.eye(x.dim) if metric is None else np.asarray(metric, dtype=float)
    e = x.values - y.values
    return np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", e, G, e), 0.0))


def contraction_violation(x: Path, y: Path, metric=None) -> float:
    """max_k (|x_k - y_k| - |x_{k-1} - y_{k-1}|)_+."""
    dist = node_distances(x, y, metric)
    return float(max(0.0, np.max(np.diff(dist)))) if dist.size > 1 else 0.0


def envelope_violation(x: Path, y: Path, omega: float, metric=None) -> float:
    """max_k (|x_k - y_k| - e^{-w t_k} |x_0 - y_0|)_+."""
    dist = node_distances(x, y, metric)
    return float(max(0.0, np.max(dist - np.exp(-omega * x.t) * dist[0])))


def speed_decay_violation(path: Path, metric=None) -> float:
    """max_i (|Du_i| - |Du_{i-1}|)_+ for autonomous flows."""
    G = np.eye(path.dim) if metric is None else np.asarray(metric, dtype=float)
    V = path.velocities
    s = np.sqrt(np.maximum(np.einsum("ki,ij,kj->k", V, G, V), 0.0))
    return float(max(0.0, np.max(np.diff(s)))) if s.size > 1 else 0.0


def flow_diagnostics(path: Path, fp: FlowProblem, other: Optional[Path] = None) -> Dict[str, float]:
    out = {
        "energy_residual": energy_residual(path, fp),
        "telescoping": pairing_telescoping_residual(path, fp.metric),
        "inclusion_fenchel": inclusion_residual(path, fp),
    }
    if fp.autonomous and fp.omega == 0.0:
        out["speed_decay"] = speed_decay_violation(path, fp.metric)
    if other is not None:
        out["contraction"] = contraction_violation(path, other, fp.metric)
        if fp.omega != 0.0:
            out["envelope"] = envelope_violation(path, other, fp.omega, fp.metric)
    return out


def yosida_flow_study(phi: ConvexFn, u0, grid: TimeGrid, lams=(1e-1, 1e-2, 1e-3),
                      policy: NumericPolicy = DEFAULT_POLICY) -> Dict[float, float]:
    """Max-node distance between the flow of the Yosida-regularized basic
    Lagrangian and the unregularized discrete flow, per lambda."""
    u0 = _vec(u0)
    ref, _ = solve_gradient_flow(phi, None, None, u0, grid, policy=policy, with_oracle=False)
    out = {}
    for lam in lams:
        fp = FlowProblem(yosida_regularize(basic(phi), lam), time_boundary(u0))
        p, _ = solve_flow(fp, grid, policy)
        out[float(lam)] = float(np.max(np.abs(p.values - ref.values)))
    return out
