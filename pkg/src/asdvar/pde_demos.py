"""One-dimensional discretizations: stationary transport, an implicit transport
equation, p-Laplacian heat flow, porous media in H^{-1} and obstacle flow."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .boundary import assemble_boundary_problem, boundary_psi, dirichlet_boundary
from .convex_core import (Box, Composed, ConvexFn, ConvexSet, Indicator, Quadratic, QuadraticOnSet,
                          SeparablePower, SeparableSum, WholeSpace, _vec, add, box_qp)
from .engine import Term
from .evolution import (FlowProblem, Path, TimeGrid, flow_lagrangian, implicit_euler_oracle,
                        lift_to_path, path_from, solve_flow, solve_semiconvex_flow, time_boundary,
                        _flow_checks)
from .lagrangian import basic
from .linops import BoundaryTriplet, LinOp, as_linop
from .policy import DEFAULT_POLICY, NumericPolicy
from .stationary import SolveReport, solve_problem


@dataclass(frozen=True)
class Grid1D:
    """n uniform nodes on [0, 1] with trapezoid weights."""

    n: int

    def __post_init__(self):
        if self.n < 2:
            raise ValueError("need at least two nodes")

    @property
    def h(self) -> float:
        return 1.0 / (self.n - 1)

    @property
    def x(self) -> np.ndarray:
        return np.linspace(0.0, 1.0, self.n)

    @property
    def weights(self) -> np.ndarray:
        w = np.full(self.n, self.h)
        w[0] = w[-1] = 0.5 * self.h
        return w

    @property
    def interior(self) -> np.ndarray:
        return self.x[1:-1]


@dataclass(frozen=True)
class SbpDerivative:
    D: LinOp
    H: LinOp
    E: np.ndarray

    def sbp_residual(self) -> float:
        H, D = self.H.A, self.D.A
        return float(np.abs(H @ D + D.T @ H - self.E).max())

    def triplet(self) -> BoundaryTriplet:
        n = self.E.shape[0]
        b1 = np.zeros((1, n))
        b2 = np.zeros((1, n))
        b1[0, 0] = b2[0, -1] = 1.0
        return BoundaryTriplet(LinOp(self.D.A, self.H.A), LinOp(b1), LinOp(b2))


def build_sbp_derivative(grid: Grid1D) -> SbpDerivative:
    """Central interior rows, one-sided boundary rows, trapezoid norm."""
    n = grid.n
    if n < 3:
        raise ValueError("SBP derivative needs n >= 3")
    h = grid.h
    D = np.zeros((n, n))
    D[0, :2] = [-1.0, 1.0]
    D[-1, -2:] = [-1.0, 1.0]
    for i in range(1, n - 1):
        D[i, i - 1], D[i, i + 1] = -0.5, 0.5
    D /= h
    E = np.zeros((n, n))
    E[0, 0], E[-1, -1] = -1.0, 1.0
    return SbpDerivative(LinOp(D), LinOp(np.diag(grid.weights)), E)


def _grid_fn(f, grid: Grid1D) -> np.ndarray:
    if f is None:
        return np.zeros(grid.n)
    if callable(f):
        return np.array([f(x) for x in grid.x], dtype=float)
    v = _vec(f)
    return np.full(grid.n, v[0]) if v.size == 1 else v


# ---------------------------------------------------------------------------
# stationary transport
# ---------------------------------------------------------------------------


def upwind_operators(grid: Grid1D):
    """(Lam, A, D) with D the forward difference on cells, Lam = P_mid' H D the
    skew-modulo-boundary pairing and A = P_r' H D the upwind transport form."""
    n, h = grid.n, grid.h
    N = n - 1
    D = np.zeros((N, n))
    Pm = np.zeros((N, n))
    Pr = np.zeros((N, n))
    for i in range(N):
        D[i, i], D[i, i + 1] = -1.0 / h, 1.0 / h
        Pm[i, i] = Pm[i, i + 1] = 0.5
        Pr[i, i + 1] = 1.0
    Lam = h * Pm.T @ D
    A = h * Pr.T @ D
    return Lam, A, D


def transport_triplet(grid: Grid1D) -> BoundaryTriplet:
    Lam, _, _ = upwind_operators(grid)
    n = grid.n
    b1 = np.zeros((1, n))
    b2 = np.zeros((1, n))
    b1[0, 0] = b2[0, -1] = 1.0
    return BoundaryTriplet(LinOp(Lam), LinOp(b1), LinOp(b2))


def transport_residual(grid: Grid1D, u, a0: float, j: Optional[ConvexFn], f) -> float:
    """max over interior nodes of |-u' - a0 u - beta(u) - f| with the SBP
    central derivative (shares no code with the assembled objective)."""
    u = _vec(u)
    Du = build_sbp_derivative(grid).D.A @ u
    fv = _grid_fn(f, grid)
    beta = np.zeros_like(u) if j is None else np.array([j.subgrad(np.array([v]))[0] for v in u])
    r = -Du - a0 * u - beta - fv
    return float(np.max(np.abs(r[1:-1])))


def _pointwise(j: Optional[ConvexFn], f, a0: float, h_weight: float):
    # density j(v) + f v + a0/2 v^2 on R, times h_weight
    q = Quadratic([[a0 * h_weight]], [f * h_weight])
    return q if j is None else add(SeparableSum(j, [h_weight]), q)


def demo_transport_stationary(grid: Grid1D, a0: float = 1.0, j: Optional[ConvexFn] = None, f=0.0,
                              u0: float = 1.0, scheme: str = "upwind",
                              policy: NumericPolicy = DEFAULT_POLICY) -> SolveReport:
    """-u' - a0 u = beta(u) + f on (0, 1), u(0) = u0, with beta = j'.

    ``scheme="upwind"`` minimizes psi(u) + psi*(-Lam u) + l(u_0, u_N) over nodal
    values; ``scheme="midpoint"`` scores midpoint states against forward
    differences (second order)."""
    if a0 <= 0:
        raise ValueError("a0 must be positive")
    fv = _grid_fn(f, grid)
    n, h = grid.n, grid.h
    if scheme == "upwind":
        Lam, A, _ = upwind_operators(grid)
        t = transport_triplet(grid)
        P = np.zeros((n - 1, n))
        P[np.arange(n - 1), np.arange(1, n)] = 1.0
        if j is None:
            phi = Quadratic(a0 * h * P.T @ P)
        else:
            phi = add(Composed(SeparableSum(j, np.full(n - 1, h)), P), Quadratic(a0 * h * P.T @ P))
        fw = np.zeros(n)
        fw[1:] = h * fv[1:]
        psi = boundary_psi(phi, A, t, fw)
        prob = assemble_boundary_problem(basic(psi), t, dirichlet_boundary([u0], 1))
        z0 = np.full(prob.program.n, float(u0))
        rep = solve_problem(prob, policy, z0)
        u = rep.minimizer
    elif scheme == "midpoint":
        tg = TimeGrid(1.0, n - 1)
        fm = 0.5 * (fv[1:] + fv[:-1])

        def L_of_x(x):
            i = min(int(x / h), n - 2)
            return basic(_pointwise(j, fm[i], a0, 1.0))

        Lc = basic(_pointwise(j, fm[0], a0, 1.0)) if np.all(fm == fm[0]) else L_of_x
        fp = FlowProblem(Lc, time_boundary([u0]))
        path, rep = solve_flow(fp, tg, policy)
        rep.extras.pop("z", None)
        u = path.values[:, 0]
        rep.minimizer = u
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    rep.check_results["dirichlet_datum"] = abs(float(u[0]) - u0)
    rep.check_results["equation_residual"] = transport_residual(grid, u, a0, j, fv)
    rep.extras["x"] = grid.x
    return rep


def demo_implicit_transport(grid: Grid1D, policy: NumericPolicy = DEFAULT_POLICY) -> SolveReport:
    """-u' = u + 1 on (0, 1), u(0) = 0, through
    I(u) = sum h [1/2 uh^2 + uh + 1/2(-Du - 1)^2] + 1/2 u_0^2 + 1/2 u_N^2."""
    n = grid.n
    psi = Quadratic([[1.0]], [1.0])  # 1/2 v^2 + v, conjugate 1/2 (w - 1)^2
    fp = FlowProblem(basic(psi), time_boundary([0.0]))
    path, rep = solve_flow(fp, TimeGrid(1.0, n - 1), policy)
    rep.extras.pop("z", None)
    u = path.values[:, 0]
    rep.minimizer = u
    uh, Du = path.midpoints[:, 0], path.velocities[:, 0]
    dens = 0.5 * uh ** 2 + uh + 0.5 * (-Du - 1.0) ** 2 + Du * uh
    rep.check_results["boundary_gap"] = float(u[0] ** 2)
    rep.check_results["fenchel_density"] = float(np.max(np.abs(dens)))
    rep.check_results["nodal_error"] = float(np.max(np.abs(u - (np.exp(-grid.x) - 1.0))))
    rep.extras["x"] = grid.x
    return rep


# ---------------------------------------------------------------------------
# flows on a spatial grid
# ---------------------------------------------------------------------------


def dirichlet_difference(grid: Grid1D) -> np.ndarray:
    """Backward differences (u_i - u_{i-1})/h, i = 1..n-1, of interior values
    extended by zero at both ends."""
    n, h = grid.n, grid.h
    m = n - 2
    Dm = np.zeros((n - 1, m))
    for i in range(n - 1):
        if i < m:
            Dm[i, i] = 1.0 / h
        if i >= 1:
            Dm[i, i - 1] = -1.0 / h
    return Dm


def dirichlet_laplacian(grid: Grid1D) -> np.ndarray:
    """-Laplacian on interior nodes: tridiag(-1, 2, -1) / h^2."""
    Dm = dirichlet_difference(grid)
    return Dm.T @ Dm


def heat_energy(grid: Grid1D, p: float) -> ConvexFn:
    """1/(p+1) sum h |D^- u|^{p+1} on interior values."""
    h = grid.h
    Dm = dirichlet_difference(grid)
    if p == 1:
        return Quadratic(h * Dm.T @ Dm)
    return Composed(SeparablePower(p + 1.0, np.full(grid.n - 1, h)), Dm)


def _interior(u0, grid: Grid1D) -> np.ndarray:
    v = _grid_fn(u0, grid)
    return v[1:-1] if v.size == grid.n else v


def demo_heat_flow(grid: Grid1D, p: float, omega: float, u0, tgrid: TimeGrid, f=None,
                   policy: NumericPolicy = DEFAULT_POLICY) -> tuple[Path, SolveReport]:
    """u_t = Delta_p u + omega u + f with zero Dirichlet sides (metric h I)."""
    if p < 1:
        raise ValueError("need p >= 1")
    m = grid.n - 2
    G = grid.h * np.eye(m)
    fv = None if f is None else _interior(f, grid)
    return solve_semiconvex_flow(heat_energy(grid, p), None, -omega, _interior(u0, grid), tgrid, fv,
                                 metric=G, policy=policy)


def hminus1_metric(grid: Grid1D) -> np.ndarray:
    """<u, v> = sum h u (-Delta_h)^{-1} v on interior nodes."""
    return grid.h * np.linalg.inv(dirichlet_laplacian(grid))


def demo_porous_media(grid: Grid1D, m: float, omega: float, u0, tgrid: TimeGrid,
                      policy: NumericPolicy = DEFAULT_POLICY) -> tuple[Path, SolveReport]:
    """u_t = Delta(u^m) + omega u as a gradient flow of 1/(m+1) sum h |u|^{m+1} in H^{-1}."""
    if m < 1:
        raise ValueError("need m >= 1")
    k = grid.n - 2
    h = grid.h
    phi = Quadratic(h * np.eye(k)) if m == 1 else SeparablePower(m + 1.0, np.full(k, h))
    return solve_semiconvex_flow(phi, None, -omega, _interior(u0, grid), tgrid,
                                 metric=hminus1_metric(grid), policy=policy)


def spectral_heat(grid: Grid1D, u0, tgrid: TimeGrid) -> Path:
    """exp(t Delta_h) u0 by eigendecomposition of the discrete Laplacian."""
    lam, V = np.linalg.eigh(dirichlet_laplacian(grid))
    c = V.T @ _interior(u0, grid)
    return Path(tgrid, np.array([V @ (np.exp(-lam * t) * c) for t in tgrid.nodes]))


# ---------------------------------------------------------------------------
# obstacle flow
# ---------------------------------------------------------------------------


def _midpoint_to_nodes(N: int, d: int) -> np.ndarray:
    """T with u = T w for w = (u_0, uh_0..uh_{N-1}), from u_{k+1} = 2 uh_k - u_k."""
    T1 = np.zeros((N + 1, N + 1))
    T1[0, 0] = 1.0
    for k in range(N):
        T1[k + 1] = -T1[k]
        T1[k + 1, k + 1] += 2.0
    return np.kron(T1, np.eye(d))


def _box_path_newton(prog, N: int, d: int, lo, hi, z0, max_iter: int = 200):
    """min F(u) subject to lo <= uh_i <= hi for all cells, F smooth piecewise
    quadratic: projected Newton steps in midpoint coordinates."""
    T = _midpoint_to_nodes(N, d)
    Ti = np.linalg.inv(T)
    w = Ti @ z0
    lo_w = np.concatenate([np.full(d, -np.inf), np.tile(lo, N)])
    hi_w = np.concatenate([np.full(d, np.inf), np.tile(hi, N)])
    w = np.clip(w, lo_w, hi_w)
    scratch = prog.new_scratch()
    f, g = prog.value_grad(T @ w, scratch)
    it, ok = 0, False
    for it in range(1, max_iter + 1):
        H = T.T @ prog.hessian(T @ w, scratch) @ T
        H = 0.5 * (H + H.T) + 1e-12 * np.eye(H.shape[0])
        gw = T.T @ g
        step = box_qp(H, gw, lo_w - w, hi_w - w)
        slope = float(gw @ step)
        if np.linalg.norm(step) <= 1e-13 * (1.0 + np.linalg.norm(w)) or slope >= -1e-30:
            ok = True
            break
        t = 1.0
        while t > 1e-12:
            wn = np.clip(w + t * step, lo_w, hi_w)
            fn_ = prog.value(T @ wn, scratch)
            if fn_ <= f + 1e-4 * t * slope + 1e-15 * (1 + abs(f)):
                break
            t *= 0.5
        w = wn
        f, g = prog.value_grad(T @ w, scratch)
    return T @ w, f, it, ok


def obstacle_vi_slack(path: Path, a_form, f, K: ConvexSet, samples: int = 1000, seed: int = 0) -> float:
    """max over cells and sampled z in K of <Du, uh - z> + a(uh, uh - z) - <uh - z, f>."""
    A = as_linop(a_form).A
    fv = np.zeros(path.dim) if f is None else _vec(f)
    rng = np.random.default_rng(seed)
    from .stationary import _sample_in
    Zs = _sample_in(K, samples, rng, 2.0 * (1.0 + np.abs(path.values).max()))
    worst = -np.inf
    for uh, du in zip(path.midpoints, path.velocities):
        r = du + A @ uh - fv  # residual form r'(uh - z)
        worst = max(worst, float(np.max((uh[None, :] - Zs) @ r)))
    return worst


def demo_obstacle_flow(a_form, K: ConvexSet, f, x0, tgrid: TimeGrid,
                       policy: NumericPolicy = DEFAULT_POLICY) -> tuple[Path, SolveReport]:
    """x' + A x - f in -N_K(x), x(0) = x0 in K: flow of phi = indicator(K)
    with the quadratic form a and source f folded into psi."""
    x0 = _vec(x0)
    d = x0.size
    A = as_linop(a_form).A
    fv = np.zeros(d) if f is None else _vec(f)
    if not K.contains(x0):
        raise ValueError("x0 must lie in K")
    if isinstance(K, WholeSpace):
        return solve_semiconvex_flow(None, A, 0.0, x0, tgrid, fv, policy=policy)
    if not isinstance(K, Box):
        raise ValueError("obstacle flow supports box constraints")
    L = flow_lagrangian(Indicator(K), A, fv, dim=d)
    fp = FlowProblem(L, time_boundary(x0))
    prob = lift_to_path(fp, tgrid)
    prog = prob.program
    # split psi = q + indicator(K): q stays in the objective, K becomes a bound on uh_i
    for k, t in enumerate(prog.terms):
        if isinstance(t.fn, QuadraticOnSet):
            prog.terms[k] = Term(t.fn.q, t.M, t.c, t.weight)
    N = tgrid.N
    z0 = np.tile(x0, N + 1)
    i0 = prog.value(z0)
    z, val, it, ok = _box_path_newton(prog, N, d, K.lo, K.hi, z0)
    path = path_from(z, tgrid, d)
    gap = float(val)
    tol = policy.tol_gap(i0)
    rep = SolveReport(z, gap, abs(gap), it, ok, bool(ok and -1e-8 <= gap <= tol), tol, False, "box-newton")
    oracle = implicit_euler_oracle(Indicator(K), A, 0.0, x0, tgrid, f=fv)
    rep = _flow_checks(path, fp, rep, oracle)
    mids = path.midpoints
    rep.check_results["in_K"] = float(max(np.max(np.abs(m - K.project(m))) for m in mids))
    # nodes interpolate the cell states and may overshoot K by O(dt) where the path meets the obstacle
    rep.check_results["node_excursion"] = float(max(np.max(np.abs(u - K.project(u))) for u in path.values))
    rep.check_results["vi_slack"] = obstacle_vi_slack(path, A, fv, K)
    return path, rep
