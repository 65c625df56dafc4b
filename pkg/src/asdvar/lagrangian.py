"""Anti-selfdual Lagrangians as lifted term programs.

A Lagrangian on X x X is stored as

    L(x, p) = min_w  const + <lin, z> + sum_k w_k g_k(M_k z + c_k),   z = [x; p; w]

so infima hidden in sums and inf-convolutions become extra decision
variables of whichever outer minimization is running.  Structure nodes that
are affine substitutions of simpler ones carry exact conjugates through

    (L o T)*(zeta) = L*(T^{-T} zeta)     (T invertible).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .convex_core import ConjResult, ConvexFn, INF, Quadratic, _vec
from .engine import Program, Term, minimize
from .linops import LinOp, as_linop, classify, decompose
from .policy import DEFAULT_POLICY, NumericPolicy


def _mat(A) -> np.ndarray:
    if isinstance(A, LinOp):
        return A.A
    return np.atleast_2d(np.asarray(A, dtype=float))


class Lagrangian:
    def __init__(self, dim: int, n_aux: int, terms: List[Term], lin=None, const: float = 0.0,
                 node: tuple = ("custom",), exact_conj: Optional[Callable] = None,
                 asd_guaranteed: bool = False, config: Optional[dict] = None):
        self.dim = int(dim)
        self.n_aux = int(n_aux)
        self.nz = 2 * self.dim + self.n_aux
        self.terms = list(terms)
        self.lin = np.zeros(self.nz) if lin is None else _vec(lin)
        self.const = float(const)
        self.node = node
        self._exact_conj = exact_conj
        self.asd_guaranteed = asd_guaranteed
        self.config = config
        for t in self.terms:
            if t.M.shape[1] != self.nz:
                raise ValueError("term width does not match Lagrangian variables")

    # -- structure ---------------------------------------------------------
    @property
    def tag(self) -> str:
        return self.node[0]

    @property
    def has_exact_conjugate(self) -> bool:
        return self._exact_conj is not None

    def lifted(self, Z, s=None, weight: float = 1.0):
        """Terms, linear part and constant after the affine map z = Z u + s."""
        s = np.zeros(self.nz) if s is None else _vec(s)
        out = []
        sparse = sp.issparse(Z)
        for t in self.terms:
            M = (sp.csr_matrix(t.M) @ Z) if sparse else t.M @ Z
            out.append(Term(t.fn, M, t.M @ s + t.c, t.weight * weight))
        lin = (Z.T @ self.lin) * weight
        const = (self.const + float(self.lin @ s)) * weight
        return out, np.asarray(lin).ravel(), const

    def program(self, Z, s=None, weight: float = 1.0) -> Program:
        terms, lin, const = self.lifted(Z, s, weight)
        return Program(Z.shape[1], terms, lin, const)

    # -- evaluation ----------------------------------------------------------
    def __call__(self, x, p, policy: NumericPolicy = DEFAULT_POLICY) -> float:
        x, p = _vec(x), _vec(p)
        d = self.dim
        if self.n_aux == 0:
            z = np.concatenate([x, p])
            return Program(self.nz, self.terms, self.lin, self.const).value(z)
        Z = np.zeros((self.nz, self.n_aux))
        Z[2 * d:, :] = np.eye(self.n_aux)
        s = np.concatenate([x, p, np.zeros(self.n_aux)])
        r = minimize(self.program(Z, s), policy=policy)
        if r.diverged:
            return -INF
        return float(r.value)

    def conjugate(self, q, y, mode: str = "auto", policy: NumericPolicy = DEFAULT_POLICY) -> ConjResult:
        """L*(q, y) = sup <q,x> + <y,p> - L(x,p)."""
        q, y = _vec(q), _vec(y)
        if mode != "numeric" and self._exact_conj is not None:
            return ConjResult(float(self._exact_conj(q, y)), "exact", True, 0.0, None)
        if mode == "exact":
            raise ValueError(f"no exact conjugate for node {self.tag!r}")
        lin = self.lin.copy()
        lin[: self.dim] -= q
        lin[self.dim: 2 * self.dim] -= y
        prog = Program(self.nz, self.terms, lin, self.const)
        r = minimize(prog, policy=policy)
        if r.diverged or not np.isfinite(r.value):
            return ConjResult(INF, "numeric", True, 0.0, None)
        return ConjResult(-float(r.value), "numeric", r.converged, r.residual, r.z[: 2 * self.dim])

    def __repr__(self):
        return f"Lagrangian({self.tag}, dim={self.dim}, aux={self.n_aux})"


# ---------------------------------------------------------------------------
# constructors
# ---------------------------------------------------------------------------


def basic(phi: ConvexFn) -> Lagrangian:
    """L(x, p) = phi(x) + phi*(-p)."""
    d = phi.dim
    phis = phi.conjugate()
    I, O = np.eye(d), np.zeros((d, d))
    terms = [Term(phi, np.hstack([I, O]), None), Term(phis, np.hstack([O, -I]), None)]

    def ex(q, y):
        return phis(q) + phi(-y)

    cfg = None
    try:
        cfg = {"kind": "basic", "phi": phi.to_config()}
    except NotImplementedError:
        pass
    return Lagrangian(d, 0, terms, node=("basic", phi), exact_conj=ex, asd_guaranteed=True, config=cfg)


def from_terms(dim: int, terms: Sequence[Term], exact_conj=None, tag: str = "custom") -> Lagrangian:
    """Custom Lagrangian sum_k g_k(M_k [x;p] + c_k) (no hidden variables)."""
    return Lagrangian(dim, 0, list(terms), node=(tag,), exact_conj=exact_conj)


def _block(d: int, n_aux: int, T: np.ndarray) -> np.ndarray:
    Z = np.zeros((2 * d + n_aux, 2 * d + n_aux))
    Z[: 2 * d, : 2 * d] = T
    Z[2 * d:, 2 * d:] = np.eye(n_aux)
    return Z


def substitute(L: Lagrangian, T, scale: float = 1.0, node: tuple = ("substitute",),
               asd_guaranteed: Optional[bool] = None, config=None) -> Lagrangian:
    """(x, p) -> scale * L(T [x; p]) for an invertible 2d x 2d matrix T."""
    d = L.dim
    T = np.asarray(T, dtype=float)
    if T.shape != (2 * d, 2 * d):
        raise ValueError("substitution matrix has the wrong shape")
    terms, lin, const = L.lifted(_block(d, L.n_aux, T), weight=scale)
    ex = None
    if L._exact_conj is not None:
        TinvT = np.linalg.inv(T).T

        def ex(q, y):
            zeta = TinvT @ np.concatenate([q, y]) / scale
            return scale * L._exact_conj(zeta[:d], zeta[d:])
    g = L.asd_guaranteed if asd_guaranteed is None else asd_guaranteed
    return Lagrangian(d, L.n_aux, terms, lin, const, node=node, exact_conj=ex, asd_guaranteed=g, config=config)


def _cfg(kind, **kw):
    if any(v is None for v in kw.values()):
        return None
    return {"kind": kind, **kw}


def shift(L: Lagrangian, Lam, side: str = "right") -> Lagrangian:
    """Right: L(x, Lam x + p).  Left: L(x + Lam^{-1} p, Lam x)."""
    Lm = _mat(Lam)
    d = L.dim
    if Lm.shape != (d, d):
        raise ValueError("shift operator must be square of the Lagrangian's dimension")
    I, O = np.eye(d), np.zeros((d, d))
    skew = classify(Lm).skew
    cfg = _cfg("shift", side=side, L=L.config, Lambda=Lm.tolist())
    if side == "right":
        T = np.block([[I, O], [Lm, I]])
        return substitute(L, T, node=("right_shift", L, Lm), asd_guaranteed=L.asd_guaranteed and skew, config=cfg)
    if side == "left":
        if np.linalg.matrix_rank(Lm) < d:
            raise ValueError("left shift needs an invertible operator")
        T = np.block([[I, np.linalg.inv(Lm)], [Lm, O]])
        return substitute(L, T, node=("left_shift", L, Lm), asd_guaranteed=L.asd_guaranteed and skew, config=cfg)
    raise ValueError("side must be 'right' or 'left'")


def scaled(L: Lagrangian, lam: float) -> Lagrangian:
    """(lam . L)(x, p) = lam^2 L(x/lam, p/lam)."""
    if lam <= 0:
        raise ValueError("scale must be positive")
    T = np.eye(2 * L.dim) / lam
    return substitute(L, T, scale=lam * lam, node=("scaled", L, lam),
                      config=_cfg("scaled", lam=float(lam), L=L.config))


def _embed(L: Lagrangian, rows_x, rows_p, rows_w, n_new: int, s_x=None) -> np.ndarray:
    """Matrix Z (L.nz x n_new) selecting L's variables out of a bigger vector."""
    Z = np.zeros((L.nz, n_new))
    d = L.dim
    for blk, rows in ((slice(0, d), rows_x), (slice(d, 2 * d), rows_p), (slice(2 * d, L.nz), rows_w)):
        if rows is None:
            continue
        Z[blk, :] = rows
    return Z


def free_product(Ls: Sequence[Lagrangian]) -> Lagrangian:
    """(x_1..x_m, p_1..p_m) -> sum_i L_i(x_i, p_i)."""
    Ls = list(Ls)
    dims = [L.dim for L in Ls]
    d = sum(dims)
    n_aux = sum(L.n_aux for L in Ls)
    nz = 2 * d + n_aux
    terms, lin, const = [], np.zeros(nz), 0.0
    ox, oa = 0, 2 * d
    for L in Ls:
        di = L.dim
        Z = np.zeros((L.nz, nz))
        Z[:di, ox:ox + di] = np.eye(di)
        Z[di:2 * di, d + ox:d + ox + di] = np.eye(di)
        Z[2 * di:, oa:oa + L.n_aux] = np.eye(L.n_aux)
        t, l, c = L.lifted(Z)
        terms += t
        lin += l
        const += c
        ox += di
        oa += L.n_aux
    ex = None
    if all(L._exact_conj is not None for L in Ls):
        def ex(q, y):
            tot, o = 0.0, 0
            for L in Ls:
                tot += L._exact_conj(q[o:o + L.dim], y[o:o + L.dim])
                o += L.dim
            return tot
    cfgs = [L.config for L in Ls]
    cfg = None if any(c is None for c in cfgs) else {"kind": "free_product", "parts": cfgs}
    return Lagrangian(d, n_aux, terms, lin, const, node=("free_product", Ls), exact_conj=ex,
                      asd_guaranteed=all(L.asd_guaranteed for L in Ls), config=cfg)


def _skew_pair(A, dx: int, dy: int) -> np.ndarray:
    A = _mat(A)
    if A.shape != (dy, dx):
        raise ValueError("twisting operator must map X to Y")
    return np.block([[np.zeros((dx, dx)), A.T], [-A, np.zeros((dy, dy))]])


def twisted(L: Lagrangian, M: Lagrangian, A) -> Lagrangian:
    """((x,y),(p,q)) -> L(x, A* y + p) + M(y, -A x + q)."""
    P = free_product([L, M])
    out = shift(P, _skew_pair(A, L.dim, M.dim), "right")
    out.node = ("twisted", L, M, _mat(A))
    out.config = _cfg("twisted", L=L.config, M=M.config, A=_mat(A).tolist())
    return out


def antidual(phi: ConvexFn, A, dim_x: int) -> Lagrangian:
    """phi(x, y) + phi*(-A* y - p, A x - q) on X x Y, dim_x = dim X."""
    dy = phi.dim - dim_x
    out = shift(basic(phi), _skew_pair(A, dim_x, dy), "right")
    out.node = ("antidual", phi, _mat(A))
    pc = basic(phi).config
    out.config = None if pc is None else {"kind": "antidual", "phi": pc["phi"], "A": _mat(A).tolist(), "dim_x": dim_x}
    return out


def _binary(L: Lagrangian, M: Lagrangian, kind: str) -> Lagrangian:
    if L.dim != M.dim:
        raise ValueError("dimension mismatch")
    d = L.dim
    n_aux = d + L.n_aux + M.n_aux
    nz = 2 * d + n_aux
    I = np.eye(d)
    # hidden variable h occupies columns [2d, 3d)
    ZL = np.zeros((L.nz, nz))
    ZM = np.zeros((M.nz, nz))
    oL, oM = 3 * d, 3 * d + L.n_aux
    ZL[2 * d:, oL:oL + L.n_aux] = np.eye(L.n_aux)
    ZM[2 * d:, oM:oM + M.n_aux] = np.eye(M.n_aux)
    if kind == "sum":
        # inf_r L(x, r) + M(x, p - r)
        ZL[:d, :d] = I
        ZL[d:2 * d, 2 * d:3 * d] = I
        ZM[:d, :d] = I
        ZM[d:2 * d, d:2 * d] = I
        ZM[d:2 * d, 2 * d:3 * d] = -I
    else:
        # inf_z L(z, p) + M(x - z, p)
        ZL[:d, 2 * d:3 * d] = I
        ZL[d:2 * d, d:2 * d] = I
        ZM[:d, :d] = I
        ZM[:d, 2 * d:3 * d] = -I
        ZM[d:2 * d, d:2 * d] = I
    tL, lL, cL = L.lifted(ZL)
    tM, lM, cM = M.lifted(ZM)
    g = (L.tag == "basic" or M.tag == "basic") and L.asd_guaranteed and M.asd_guaranteed
    cfg = None if L.config is None or M.config is None else {"kind": kind, "L": L.config, "M": M.config}
    return Lagrangian(d, n_aux, tL + tM, lL + lM, cL + cM, node=(kind, L, M), asd_guaranteed=g, config=cfg)


def combine(mode: str, *args, **kw) -> Lagrangian:
    """Lagrangian algebra: scaled, sum, convolution, free_product, twisted, antidual."""
    if mode == "scaled":
        return scaled(args[0], kw.get("lam", args[1] if len(args) > 1 else None))
    if mode == "sum":
        return _binary(args[0], args[1], "sum")
    if mode == "convolution":
        return _binary(args[0], args[1], "convolution")
    if mode == "free_product":
        return free_product(args[0] if len(args) == 1 else args)
    if mode == "twisted":
        return twisted(args[0], args[1], kw.get("A", args[2] if len(args) > 2 else None))
    if mode == "antidual":
        return antidual(args[0], kw.get("A", args[1] if len(args) > 1 else None),
                        kw.get("dim_x", args[2] if len(args) > 2 else None))
    raise ValueError(f"unknown combination {mode!r}")


def yosida_quadratic(dim: int, lam: float) -> Lagrangian:
    """M_lam(x, p) = |x|^2/(2 lam^2) + lam^2 |p|^2 / 2, the basic Lagrangian of |x|^2/(2 lam^2)."""
    return basic(Quadratic(np.eye(dim) / lam**2))


def yosida_regularize(L: Lagrangian, lam: float) -> Lagrangian:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    out = _binary(L, yosida_quadratic(L.dim, lam), "convolution")
    out.node = ("yosida", L, lam)
    out.asd_guaranteed = L.asd_guaranteed
    out.config = None if L.config is None else {"kind": "yosida", "lam": float(lam), "L": L.config}
    return out


# ---------------------------------------------------------------------------
# residual checks
# ---------------------------------------------------------------------------


@dataclass
class ResidualReport:
    value: float
    skipped: int
    samples: int
    kind: str

    def __float__(self):
        return float(self.value)


def conjugate_eval_L(L: Lagrangian, q, y, mode: str = "auto",
                     policy: NumericPolicy = DEFAULT_POLICY) -> ConjResult:
    return L.conjugate(q, y, mode, policy)


def _R(R, d):
    if R is None:
        return np.eye(d)
    return _mat(R)


def asd_residual(L: Lagrangian, samples: int = 100, R=None, radius: float = 1.0, seed: int = 0,
                 mode: str = "numeric", policy: NumericPolicy = DEFAULT_POLICY) -> ResidualReport:
    """max |L*(p, x) - L(-R x, -R' p)| over Gaussian samples, skipping infinite pairs.

    ``mode="numeric"`` (default) evaluates L* by joint maximization so the
    check never relies on the structure tree's own conjugate formula.
    """
    d = L.dim
    Rm = _R(R, d)
    if abs(np.linalg.det(Rm)) < 1e-12:
        raise ValueError("automorphism must be invertible")
    rng = np.random.default_rng(seed)
    worst, skipped = 0.0, 0
    kind = "exact"
    for _ in range(samples):
        x = radius * rng.standard_normal(d)
        p = radius * rng.standard_normal(d)
        c = L.conjugate(p, x, mode, policy)
        kind = c.kind if kind == "exact" else kind
        rhs = L(-Rm @ x, -Rm.T @ p, policy)
        if not (np.isfinite(c.value) and np.isfinite(rhs)):
            if np.isinf(c.value) and np.isinf(rhs):
                continue
            skipped += 1
            continue
        worst = max(worst, abs(c.value - rhs))
    return ResidualReport(worst, skipped, samples, kind)


def sub_asd_residual(L: Lagrangian, samples: int = 100, radius: float = 1.0, seed: int = 0,
                     mode: str = "numeric") -> ResidualReport:
    """One-sided check max(L(-x,-p) - L*(p,x), 0) for the sub-ASD cone."""
    rng = np.random.default_rng(seed)
    worst, skipped = 0.0, 0
    for _ in range(samples):
        x = radius * rng.standard_normal(L.dim)
        p = radius * rng.standard_normal(L.dim)
        a, b = L(-x, -p), L.conjugate(p, x, mode).value
        if not (np.isfinite(a) and np.isfinite(b)):
            skipped += 1
            continue
        worst = max(worst, a - b)
    return ResidualReport(max(worst, 0.0), skipped, samples, mode)


def partial_asd_residual(L: Lagrangian, samples: int = 50, radius: float = 1.0, seed: int = 0,
                         mode: str = "numeric") -> ResidualReport:
    """max |L*(0, x) - L(-x, 0)|."""
    rng = np.random.default_rng(seed)
    worst, skipped = 0.0, 0
    z = np.zeros(L.dim)
    for _ in range(samples):
        x = radius * rng.standard_normal(L.dim)
        a, b = L.conjugate(z, x, mode).value, L(-x, z)
        if not (np.isfinite(a) and np.isfinite(b)):
            skipped += 1
            continue
        worst = max(worst, abs(a - b))
    return ResidualReport(worst, skipped, samples, mode)


def fenchel_young_floor(L: Lagrangian, samples: int = 1000, radius: float = 1.0, seed: int = 0) -> float:
    """min over samples of L(x, p) + <x, p> (nonnegative for ASD L)."""
    rng = np.random.default_rng(seed)
    lo = INF
    for _ in range(samples):
        x = radius * rng.standard_normal(L.dim)
        p = radius * rng.standard_normal(L.dim)
        v = L(x, p)
        if np.isfinite(v):
            lo = min(lo, v + float(x @ p))
    return float(lo)


# ---------------------------------------------------------------------------
# config round trip
# ---------------------------------------------------------------------------


_L_KEYS = {
    "basic": {"phi"},
    "shift": {"L", "Lambda", "side"},
    "scaled": {"L", "lam"},
    "sum": {"L", "M"},
    "convolution": {"L", "M"},
    "free_product": {"parts"},
    "twisted": {"L", "M", "A"},
    "antidual": {"phi", "A", "dim_x"},
    "yosida": {"L", "lam"},
}


def make_lagrangian(cfg: dict) -> Lagrangian:
    from .convex_core import check_keys, make_catalog_fn

    check_keys(cfg, _L_KEYS, "Lagrangian")
    k = cfg["kind"]
    if k == "basic":
        return basic(make_catalog_fn(cfg["phi"]))
    if k == "shift":
        return shift(make_lagrangian(cfg["L"]), cfg["Lambda"], cfg.get("side", "right"))
    if k == "scaled":
        return scaled(make_lagrangian(cfg["L"]), cfg["lam"])
    if k in ("sum", "convolution"):
        return _binary(make_lagrangian(cfg["L"]), make_lagrangian(cfg["M"]), k)
    if k == "free_product":
        return free_product([make_lagrangian(c) for c in cfg["parts"]])
    if k == "twisted":
        return twisted(make_lagrangian(cfg["L"]), make_lagrangian(cfg["M"]), cfg["A"])
    if k == "antidual":
        return antidual(make_catalog_fn(cfg["phi"]), cfg["A"], cfg["dim_x"])
    if k == "yosida":
        return yosida_regularize(make_lagrangian(cfg["L"]), cfg["lam"])
    raise ValueError(f"unknown Lagrangian kind {k!r}")


__all__ = [
    "Lagrangian", "basic", "from_terms", "substitute", "shift", "scaled", "free_product", "twisted",
    "antidual", "combine", "yosida_regularize", "yosida_quadratic", "conjugate_eval_L", "asd_residual",
    "sub_asd_residual", "partial_asd_residual", "fenchel_young_floor", "make_lagrangian", "ResidualReport",
]
