"""Composite convex minimizer for objectives of the form

    F(z) = const + <lin, z> + sum_k w_k g_k(M_k z + c_k)

with each g_k a :class:`~asdvar.convex_core.ConvexFn`.  Three paths:

* damped Newton / Levenberg-Marquardt when every term carries a Hessian
  (generalized Hessians of piecewise-quadratic conjugates included);
* FISTA with backtracking and adaptive restart when the nonsmooth terms act
  on disjoint signed coordinate selections (so their prox is separable);
* a subgradient method with diminishing steps otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .convex_core import ConvexFn, INF, _finite_hess
from .policy import DEFAULT_POLICY, NumericPolicy


@dataclass
class Term:
    fn: ConvexFn
    M: object  # dense ndarray or scipy sparse, shape (fn.dim, n)
    c: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        if not sp.issparse(self.M):
            self.M = np.atleast_2d(np.asarray(self.M, dtype=float))
        self.c = np.zeros(self.M.shape[0]) if self.c is None else np.asarray(self.c, dtype=float).ravel()
        if self.M.shape[0] != self.fn.dim:
            raise ValueError(f"term matrix has {self.M.shape[0]} rows, function dim is {self.fn.dim}")

    def arg(self, z):
        return self.M @ z + self.c


@dataclass
class Program:
    n: int
    terms: List[Term] = field(default_factory=list)
    lin: Optional[np.ndarray] = None
    const: float = 0.0

    def __post_init__(self):
        self.lin = np.zeros(self.n) if self.lin is None else np.asarray(self.lin, dtype=float).ravel()
        for t in self.terms:
            if t.M.shape[1] != self.n:
                raise ValueError("term matrix width does not match program size")

    def value(self, z, scratch: Optional[list] = None) -> float:
        tot = self.const + float(self.lin @ z)
        for k, t in enumerate(self.terms):
            s = None if scratch is None else scratch[k]
            v = t.fn.value_grad(t.arg(z), s)[0] if s is not None else t.fn(t.arg(z))
            if not np.isfinite(v):
                return INF
            tot += t.weight * v
        return tot

    def value_grad(self, z, scratch: Optional[list] = None, which=None):
        tot = self.const + float(self.lin @ z)
        g = self.lin.copy()
        for k, t in enumerate(self.terms):
            if which is not None and not which[k]:
                continue
            v, gk = t.fn.value_grad(t.arg(z), None if scratch is None else scratch[k])
            if not np.isfinite(v):
                return INF, g
            tot += t.weight * v
            g = g + t.weight * (t.M.T @ gk)
        return tot, g

    def hessian(self, z, scratch: Optional[list] = None, sparse: bool = False):
        if sparse:
            H = sp.csr_matrix((self.n, self.n))
        else:
            H = np.zeros((self.n, self.n))
        for k, t in enumerate(self.terms):
            hk = _finite_hess(t.fn.hess_at(t.arg(z), None if scratch is None else scratch[k]))
            if sparse:
                Ms = sp.csr_matrix(t.M)
                H = H + t.weight * (Ms.T @ sp.csr_matrix(hk) @ Ms)
            else:
                Md = t.M.toarray() if sp.issparse(t.M) else t.M
                H += t.weight * (Md.T @ hk @ Md)
        return H

    def new_scratch(self) -> list:
        return [dict() for _ in self.terms]

    def extend(self, other: "Program") -> "Program":
        if other.n != self.n:
            raise ValueError("program size mismatch")
        return Program(self.n, self.terms + other.terms, self.lin + other.lin, self.const + other.const)


@dataclass
class EngineResult:
    z: np.ndarray
    value: float
    iterations: int
    converged: bool
    diverged: bool
    method: str
    residual: float


# --------------------------------------------------------------------------


def _selection(M) -> Optional[tuple]:
    """If M = alpha * (signed column selection) return (cols, signs, alpha)."""
    Md = M.toarray() if sp.issparse(M) else M
    nz = Md != 0
    if np.any(nz.sum(axis=1) != 1):
        return None
    cols = np.argmax(nz, axis=1)
    if len(set(cols.tolist())) != cols.size:
        return None
    vals = Md[np.arange(Md.shape[0]), cols]
    a = np.abs(vals)
    if not np.allclose(a, a[0], rtol=1e-14, atol=0):
        return None
    return cols, np.sign(vals), float(a[0])


def _depends(M) -> bool:
    return bool(M.nnz and np.any(M.data)) if sp.issparse(M) else bool(np.any(M))


def _plan(prog: Program):
    smooth = [t.fn.smooth for t in prog.terms]
    rough = [k for k, s in enumerate(smooth) if not s]
    sels = {}
    used = set()
    for k in rough:
        s = _selection(prog.terms[k].M)
        if s is None or used.intersection(s[0].tolist()):
            return smooth, None
        used.update(s[0].tolist())
        sels[k] = s
    return smooth, sels


def minimize(prog: Program, z0=None, policy: NumericPolicy = DEFAULT_POLICY,
             method: str = "auto", scratch: Optional[list] = None,
             project: Optional[Callable] = None) -> EngineResult:
    """Minimize a term program.  ``project`` (optional) is an extra hard
    constraint handled by projection inside the proximal-gradient path."""
    z = np.zeros(prog.n) if z0 is None else np.array(z0, dtype=float).ravel()
    if scratch is None:
        scratch = prog.new_scratch()
    if prog.n == 0:
        return EngineResult(z, prog.value(z, scratch), 0, True, False, "none", 0.0)
    live = [t for t in prog.terms if _depends(t.M)]
    if len(live) < len(prog.terms):
        # terms with a zero matrix are constants; fold them so they do not block the planner
        const = prog.const
        for t in prog.terms:
            if not _depends(t.M):
                const += t.weight * t.fn(t.c)
        if not np.isfinite(const):
            return EngineResult(z, INF, 0, True, False, "none", 0.0)
        prog = Program(prog.n, live, prog.lin, const)
        scratch = prog.new_scratch()
    smooth, sels = _plan(prog)
    if method == "auto":
        if project is None and all(smooth) and all(t.fn.has_hess for t in prog.terms):
            method = "newton"
        elif project is None and _affine_ready(prog):
            method = "newton_affine"
        elif sels is not None:
            method = "fista"
        else:
            method = "subgradient"
    if method == "newton":
        return _newton(prog, z, policy, scratch)
    if method == "newton_affine":
        return _newton_affine(prog, z, policy)
    if method == "fista":
        if sels is None:
            raise ValueError("nonsmooth terms are not prox-friendly")
        return _fista(prog, z, policy, scratch, smooth, sels, project)
    return _subgradient(prog, z, policy, scratch, project)


def _newton(prog: Program, z, policy: NumericPolicy, scratch) -> EngineResult:
    n = prog.n
    use_sparse = n > 300 or any(sp.issparse(t.M) for t in prog.terms)
    eye = sp.identity(n, format="csr") if use_sparse else np.eye(n)
    f, g = prog.value_grad(z, scratch)
    if not np.isfinite(f):
        # find a feasible start by a few gradient-free shrink steps toward 0
        for s in (0.5, 0.1, 0.0):
            z = z * s
            f, g = prog.value_grad(z, scratch)
            if np.isfinite(f):
                break
    if not np.isfinite(f):
        return EngineResult(z, INF, 0, False, False, "newton", INF)
    mu = 0.0
    it = 0
    gtol = 1e-12
    for it in range(1, min(policy.max_iter, 500) + 1):
        gn = float(np.linalg.norm(g))
        if gn <= gtol * (1.0 + abs(f)):
            return EngineResult(z, f, it, True, False, "newton", gn)
        H = prog.hessian(z, scratch, sparse=use_sparse)
        d = None
        for _ in range(30):
            try:
                if use_sparse:
                    d = spla.spsolve((H + mu * eye).tocsc(), -g)
                else:
                    d = np.linalg.solve(H + mu * eye, -g)
                if np.all(np.isfinite(d)):
                    break
            except (np.linalg.LinAlgError, RuntimeError):
                pass
            d = None
            diag = H.diagonal() if use_sparse else np.diag(H)
            mu = max(10.0 * mu, 1e-10 * (1.0 + float(np.abs(diag).max())))
        if d is None:
            d = -g
        slope = float(g @ d)
        if slope >= 0:
            d, slope = -g, -gn * gn
        t = 1.0
        accepted = False
        for _ in range(60):
            zn = z + t * d
            fn_ = prog.value(zn, scratch)
            if np.isfinite(fn_) and fn_ <= f + 1e-4 * t * slope + 4e-16 * (1 + abs(f)) * 8:
                accepted = True
                break
            t *= 0.5
        if not accepted:
            # numerical floor reached
            return EngineResult(z, f, it, gn <= 1e-7 * (1.0 + abs(f)), False, "newton", gn)
        zn_norm = float(np.linalg.norm(zn))
        if zn_norm > policy.div_radius:
            return EngineResult(zn, -INF, it, False, True, "newton", gn)
        step = float(np.linalg.norm(zn - z))
        z = zn
        f, g = prog.value_grad(z, scratch)
        mu = 0.0 if t == 1.0 else max(mu, 1e-12)
        if step <= 1e-15 * (1.0 + zn_norm):
            gn = float(np.linalg.norm(g))
            return EngineResult(z, f, it, gn <= 1e-7 * (1.0 + abs(f)), False, "newton", gn)
    gn = float(np.linalg.norm(g))
    return EngineResult(z, f, it, gn <= 1e-7 * (1.0 + abs(f)), False, "newton", gn)


def _is_affine(fn) -> bool:
    return hasattr(fn, "affine_split")


def _affine_ready(prog: Program) -> bool:
    # smooth terms plus quadratics restricted to affine subspaces
    return any(_is_affine(t.fn) for t in prog.terms) and all(
        _is_affine(t.fn) or (t.fn.smooth and t.fn.has_hess) for t in prog.terms)


def _newton_affine(prog: Program, z, policy: NumericPolicy) -> EngineResult:
    """Equality-constrained Newton: smooth extensions of the affine-restricted
    terms plus the constraints E z = e, solved through KKT systems."""
    n = prog.n
    use_sparse = n > 300 or any(sp.issparse(t.M) for t in prog.terms)
    terms, rows, rhs = [], [], []
    for t in prog.terms:
        if _is_affine(t.fn):
            ext, N, b = t.fn.affine_split()
            terms.append(Term(ext, t.M, t.c, t.weight))
            if N.shape[1]:
                rows.append(sp.csr_matrix(N.T) @ sp.csr_matrix(t.M) if use_sparse else N.T @ _dense(t.M))
                rhs.append(N.T @ (b - t.c))
        else:
            terms.append(t)
    sm = Program(n, terms, prog.lin, prog.const)
    if not rows:
        r = _newton(sm, z, policy, sm.new_scratch())
        return EngineResult(r.z, prog.value(r.z), r.iterations, r.converged, r.diverged, "newton_affine", r.residual)
    E = sp.vstack(rows).tocsr() if use_sparse else np.vstack(rows)
    e = np.concatenate(rhs)
    m = e.size
    scr = sm.new_scratch()

    def kkt(H, g, r):
        # [[H, E'], [E, -eps I]] [d; y] = [-g; r]
        reg = 1e-14 * (1.0 + (abs(H).max() if use_sparse else np.abs(H).max()))
        if use_sparse:
            K = sp.bmat([[H + reg * sp.identity(n), E.T], [E, -reg * sp.identity(m)]], format="csc")
            sol = spla.spsolve(K, np.concatenate([-g, r]))
        else:
            K = np.block([[H + reg * np.eye(n), E.T], [E, -reg * np.eye(m)]])
            sol = np.linalg.lstsq(K, np.concatenate([-g, r]), rcond=None)[0]
        return sol[:n]

    # feasible start
    f, g = sm.value_grad(z, scr)
    z = z + kkt(sp.identity(n, format="csr") if use_sparse else np.eye(n), np.zeros(n), e - E @ z)
    it = 0
    for it in range(1, min(policy.max_iter, 500) + 1):
        f, g = sm.value_grad(z, scr)
        if not np.isfinite(f):
            return EngineResult(z, INF, it, False, False, "newton_affine", INF)
        H = sm.hessian(z, scr, sparse=use_sparse)
        d = kkt(H, g, e - E @ z)
        if not np.all(np.isfinite(d)):
            break
        slope = float(g @ d)
        t = 1.0
        ok = False
        for _ in range(60):
            zn = z + t * d
            fn_ = sm.value(zn, scr)
            if np.isfinite(fn_) and fn_ <= f + 1e-4 * t * min(slope, 0.0) + 4e-15 * (1 + abs(f)):
                ok = True
                break
            t *= 0.5
        if not ok:
            break
        step = float(np.linalg.norm(zn - z))
        z = zn
        if np.linalg.norm(z) > policy.div_radius:
            return EngineResult(z, -INF, it, False, True, "newton_affine", INF)
        if step <= 1e-14 * (1.0 + np.linalg.norm(z)):
            break
    f, g = sm.value_grad(z, scr)
    # optimality: g lies in range(E') up to the multiplier fit
    y = (spla.lsqr(E.T, -g, atol=1e-15, btol=1e-15)[0] if use_sparse
         else np.linalg.lstsq(E.T, -g, rcond=None)[0])
    res = float(np.linalg.norm(g + E.T @ y))
    feas = float(np.abs(E @ z - e).max())
    val = prog.value(z)
    conv = res <= 1e-7 * (1.0 + abs(f)) and feas <= 1e-10 * (1.0 + np.abs(e).max())
    return EngineResult(z, val if np.isfinite(val) else f, it, conv, False, "newton_affine", res)


def _dense(M):
    return M.toarray() if sp.issparse(M) else M


def _rough_prox(prog, sels, z, step, project):
    out = z.copy()
    for k, (cols, signs, alpha) in sels.items():
        t = prog.terms[k]
        w = t.weight
        v = alpha * signs * z[cols] + t.c
        # prox of z_S -> w g(alpha D z_S + c)
        u = t.fn.prox(v, step * w * alpha * alpha)
        out[cols] = signs * (u - t.c) / alpha
    if project is not None:
        out = project(out)
    return out


def _fista(prog, z, policy, scratch, smooth, sels, project) -> EngineResult:
    which = smooth
    rough_terms = [k for k in range(len(prog.terms)) if not smooth[k]]

    def fs(x):
        tot = prog.const + float(prog.lin @ x)
        for k, t in enumerate(prog.terms):
            if smooth[k]:
                v = t.fn.value_grad(t.arg(x), scratch[k])[0]
                if not np.isfinite(v):
                    return INF
                tot += t.weight * v
        return tot

    def full(x):
        v = fs(x)
        for k in rough_terms:
            t = prog.terms[k]
            v += t.weight * t.fn(t.arg(x))
        return v

    z = _rough_prox(prog, sels, z, 1.0, project)
    y = z.copy()
    tk = 1.0
    Lk = 1.0
    fz = full(z)
    res = INF
    it = 0
    for it in range(1, policy.max_iter + 1):
        fy, gy = prog.value_grad(y, scratch, which)
        if not np.isfinite(fy):
            y = z.copy()
            tk = 1.0
            fy, gy = prog.value_grad(y, scratch, which)
        while True:
            zn = _rough_prox(prog, sels, y - gy / Lk, 1.0 / Lk, project)
            d = zn - y
            fzn = fs(zn)
            if np.isfinite(fzn) and fzn <= fy + gy @ d + 0.5 * Lk * (d @ d) + 1e-14 * (1 + abs(fy)):
                break
            Lk *= 2.0
            if Lk > 1e30:
                break
        res = float(Lk * np.linalg.norm(d))
        fnew = full(zn)
        tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        if fnew > fz:
            # adaptive restart on function increase
            y, tk = zn.copy(), 1.0
        else:
            y = zn + ((tk - 1.0) / tn) * (zn - z)
            tk = tn
        if np.linalg.norm(zn) > policy.div_radius:
            return EngineResult(zn, -INF, it, False, True, "fista", res)
        dz = float(np.linalg.norm(zn - z))
        z, fz = zn, fnew
        if res <= 1e-11 * (1.0 + abs(fz)) or (dz <= 1e-16 * (1 + np.linalg.norm(z)) and it > 5):
            return EngineResult(z, fz, it, True, False, "fista", res)
        Lk *= 0.7
    return EngineResult(z, fz, it, res <= policy.rel_tol * (1 + abs(fz)), False, "fista", res)


def _subgradient(prog, z, policy, scratch, project) -> EngineResult:
    best, fbest = z.copy(), prog.value(z, scratch)
    it = 0
    for it in range(1, policy.max_iter + 1):
        g = prog.lin.copy()
        for k, t in enumerate(prog.terms):
            g = g + t.weight * (t.M.T @ t.fn.subgrad(t.arg(z)))
        gn = np.linalg.norm(g)
        if gn == 0.0:
            return EngineResult(z, prog.value(z, scratch), it, True, False, "subgradient", 0.0)
        z = z - (1.0 / np.sqrt(it)) * g / gn
        if project is not None:
            z = project(z)
        f = prog.value(z, scratch)
        if f < fbest:
            best, fbest = z.copy(), f
        if np.linalg.norm(z) > policy.div_radius:
            return EngineResult(z, -INF, it, False, True, "subgradient", gn)
    return EngineResult(best, fbest, it, False, False, "subgradient", INF)
