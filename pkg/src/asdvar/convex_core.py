"""Convex functions with exact Fenchel conjugates, proximal maps and a numeric
conjugation fallback.

Every function is a small immutable object.  Values outside the effective
domain are ``+inf`` (never an exception).  Subgradients are the minimum-norm
element of the subdifferential for catalog entries.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import linalg as sla
from scipy.optimize import lsq_linear

from .policy import DEFAULT_POLICY, NumericPolicy

INF = np.inf


def _vec(x) -> np.ndarray:
    return np.atleast_1d(np.asarray(x, dtype=float)).ravel()


def _bcast(w, n: int) -> np.ndarray:
    w = _vec(w)
    return np.full(n, w[0]) if w.size == 1 else w.copy()


# ---------------------------------------------------------------------------
# convex sets
# ---------------------------------------------------------------------------


class ConvexSet:
    kind = "set"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def project(self, x) -> np.ndarray:
        raise NotImplementedError

    def contains(self, x, tol: float = 1e-10) -> bool:
        x = _vec(x)
        return bool(np.linalg.norm(self.project(x) - x) <= tol * (1.0 + np.linalg.norm(x)))

    def support(self, v) -> float:
        raise NotImplementedError

    def support_argmax(self, v) -> np.ndarray:
        """Minimum-norm maximizer of <v, x> over the set (a subgradient of the support function)."""
        raise NotImplementedError

    def to_config(self) -> dict:
        raise NotImplementedError


class Box(ConvexSet):
    kind = "box"

    def __init__(self, lo, hi, dim: Optional[int] = None):
        lo, hi = _vec(lo), _vec(hi)
        n = dim or max(lo.size, hi.size)
        super().__init__(n)
        self.lo, self.hi = _bcast(lo, n), _bcast(hi, n)
        if np.any(self.lo > self.hi):
            raise ValueError("empty box")

    def project(self, x):
        return np.clip(_vec(x), self.lo, self.hi)

    def support(self, v):
        v = _vec(v)
        with np.errstate(invalid="ignore"):
            terms = np.where(v > 0, v * self.hi, np.where(v < 0, v * self.lo, 0.0))
        return float(np.sum(terms))

    def support_argmax(self, v):
        v = _vec(v)
        z = np.clip(0.0, self.lo, self.hi)
        z = np.where(v > 0, self.hi, np.where(v < 0, self.lo, z))
        return z

    def to_config(self):
        return {"kind": "box", "lo": self.lo.tolist(), "hi": self.hi.tolist()}


class Ball(ConvexSet):
    kind = "ball"

    def __init__(self, center, radius: float):
        c = _vec(center)
        super().__init__(c.size)
        if radius < 0:
            raise ValueError("negative radius")
        self.center, self.radius = c, float(radius)

    def project(self, x):
        d = _vec(x) - self.center
        r = np.linalg.norm(d)
        return self.center + (d if r <= self.radius else d * (self.radius / r))

    def support(self, v):
        v = _vec(v)
        return float(v @ self.center + self.radius * np.linalg.norm(v))

    def support_argmax(self, v):
        v = _vec(v)
        n = np.linalg.norm(v)
        if n == 0.0:
            return self.project(np.zeros(self.dim))
        return self.center + self.radius * v / n

    def to_config(self):
        return {"kind": "ball", "center": self.center.tolist(), "radius": self.radius}


class Halfspace(ConvexSet):
    """{x : <a, x> <= c}."""

    kind = "halfspace"

    def __init__(self, a, c: float):
        a = _vec(a)
        if not np.any(a):
            raise ValueError("halfspace normal must be nonzero")
        super().__init__(a.size)
        self.a, self.c = a, float(c)

    def project(self, x):
        x = _vec(x)
        s = self.a @ x - self.c
        return x if s <= 0 else x - s * self.a / (self.a @ self.a)

    def _ratio(self, v):
        v = _vec(v)
        t = (v @ self.a) / (self.a @ self.a)
        ok = np.linalg.norm(v - t * self.a) <= 1e-10 * (1.0 + np.linalg.norm(v)) and t >= -1e-14
        return t, ok

    def support(self, v):
        t, ok = self._ratio(v)
        return float(max(t, 0.0) * self.c) if ok else INF

    def support_argmax(self, v):
        t, ok = self._ratio(v)
        if ok and t > 0:
            return self.c * self.a / (self.a @ self.a)
        return self.project(np.zeros(self.dim))

    def to_config(self):
        return {"kind": "halfspace", "a": self.a.tolist(), "c": self.c}


def _pava(y: np.ndarray) -> np.ndarray:
    # pool-adjacent-violators, unit weights
    vals, cnts = [], []
    for yi in y:
        vals.append(float(yi))
        cnts.append(1)
        while len(vals) > 1 and vals[-2] > vals[-1]:
            c = cnts[-2] + cnts[-1]
            v = (vals[-2] * cnts[-2] + vals[-1] * cnts[-1]) / c
            vals[-2:] = [v]
            cnts[-2:] = [c]
    return np.repeat(vals, cnts)


class NonnegMonotone(ConvexSet):
    """{x : 0 <= x_0 <= x_1 <= ... <= x_{n-1}}, a grid-function cone."""

    kind = "nonneg_monotone"

    def project(self, x):
        return np.maximum(_pava(_vec(x)), 0.0)

    def support(self, v):
        # generators are the tails (0,..,0,1,..,1); the cone's support is 0 iff every tail sum <= 0
        tails = np.cumsum(_vec(v)[::-1])
        return 0.0 if np.all(tails <= 1e-12 * (1.0 + np.abs(tails).max())) else INF

    def support_argmax(self, v):
        return np.zeros(self.dim)

    def to_config(self):
        return {"kind": "nonneg_monotone", "dim": self.dim}


class WholeSpace(ConvexSet):
    kind = "whole"

    def project(self, x):
        return _vec(x).copy()

    def contains(self, x, tol=1e-10):
        return True

    def support(self, v):
        v = _vec(v)
        return 0.0 if np.linalg.norm(v) <= 1e-12 else INF

    def support_argmax(self, v):
        return np.zeros(self.dim)

    def to_config(self):
        return {"kind": "whole", "dim": self.dim}


def make_set(cfg: dict) -> ConvexSet:
    check_keys(cfg, _SET_KEYS, "set")
    k = cfg["kind"]
    if k == "box":
        return Box(cfg["lo"], cfg["hi"], cfg.get("dim"))
    if k == "ball":
        return Ball(cfg["center"], cfg["radius"])
    if k == "halfspace":
        return Halfspace(cfg["a"], cfg["c"])
    if k == "nonneg_monotone":
        return NonnegMonotone(cfg["dim"])
    if k == "whole":
        return WholeSpace(cfg["dim"])
    raise ValueError(f"unknown set kind {k!r}")


# ---------------------------------------------------------------------------
# small inner solvers (used by prox of composite functions and by QPs)
# ---------------------------------------------------------------------------


def _finite_hess(H: np.ndarray, cap: float = 1e12) -> np.ndarray:
    H = np.array(H, dtype=float)
    bad = ~np.isfinite(H)
    if bad.any():
        H[bad] = 0.0
        d = np.diag(H).copy()
        d[np.diag(bad)] = cap
        np.fill_diagonal(H, d)
    return H


def newton_minimize(vgh, z0, tol=1e-14, max_iter=200):
    """Damped Newton with Levenberg fallback for smooth convex objectives.

    ``vgh(z)`` returns (value, grad, hess).  Stops when the Newton step is tiny
    relative to |z| (scale-free, unlike a gradient test).  Returns (z, converged).
    """
    z = _vec(z0).copy()
    mu = 0.0
    f, g, H = vgh(z)
    for _ in range(max_iter):
        if not np.any(g):
            return z, True
        H = _finite_hess(H)
        d = None
        for _ in range(40):
            try:
                d = np.linalg.solve(H + mu * np.eye(z.size), -g)
                if np.all(np.isfinite(d)):
                    break
            except np.linalg.LinAlgError:
                pass
            d = None
            mu = max(10 * mu, 1e-12 * (1 + np.abs(H).max()))
        if d is None:
            d = -g
        slope = g @ d
        if slope >= 0:
            d, slope = -g, -(g @ g)
        if np.linalg.norm(d) <= tol * (1.0 + np.linalg.norm(z)):
            return z + d, True
        t = 1.0
        while True:
            zn = z + t * d
            fn_, gn_, Hn = vgh(zn)
            if np.isfinite(fn_) and fn_ <= f + 1e-4 * t * slope + 1e-15 * abs(f):
                break
            t *= 0.5
            if t < 1e-12:
                return z, bool(np.linalg.norm(d) <= 1e-8 * (1.0 + np.linalg.norm(z)))
        z, f, g, H = zn, fn_, gn_, Hn
        mu = mu * 0.1 if t == 1.0 else max(mu, 1e-12)
    return z, False


def box_qp(Q, g, lo, hi):
    """argmin 0.5 z'Qz + g'z over lo <= z <= hi, Q symmetric positive definite."""
    Q = np.asarray(Q, dtype=float)
    g = _vec(g)
    n = g.size
    lo, hi = _bcast(lo, n), _bcast(hi, n)
    if np.all(np.isinf(lo)) and np.all(np.isinf(hi)):
        return np.linalg.solve(Q, -g)
    dq = np.diag(Q)
    if not np.any(Q - np.diag(dq)):
        # separable: exact coordinatewise clip
        return np.clip(-g / dq, lo, hi)
    L = np.linalg.cholesky(Q)
    rhs = -sla.solve_triangular(L, g, lower=True)
    res = lsq_linear(L.T, rhs, bounds=(lo, hi), method="bvls", tol=1e-15, max_iter=10 * n + 100)
    z = np.clip(res.x, lo, hi)
    # polish: exact solve on the free set with the active coordinates frozen
    for _ in range(3):
        grad = Q @ z + g
        with np.errstate(invalid="ignore"):
            at_lo = np.isfinite(lo) & (z <= lo + 1e-14 * (1 + np.abs(lo))) & (grad >= 0)
            at_hi = np.isfinite(hi) & (z >= hi - 1e-14 * (1 + np.abs(hi))) & (grad <= 0)
        free = ~(at_lo | at_hi)
        if not free.any():
            break
        zf = z.copy()
        act = ~free
        rhs_f = -g[free] - Q[np.ix_(free, act)] @ z[act]
        zf[free] = np.linalg.solve(Q[np.ix_(free, free)], rhs_f)
        if np.all(zf >= lo - 1e-13) and np.all(zf <= hi + 1e-13):
            z = np.clip(zf, lo, hi)
            break
        z = np.clip(zf, lo, hi)
    return z


def projected_qp(Q, g, K: ConvexSet, z0=None, tol=1e-14, max_iter=100_000):
    """argmin 0.5 z'Qz + g'z over K by accelerated projected gradient."""
    Q = np.asarray(Q, dtype=float)
    g = _vec(g)
    if isinstance(K, Box):
        return box_qp(Q, g, K.lo, K.hi)
    if isinstance(K, WholeSpace):
        return np.linalg.solve(Q, -g)
    Lq = max(np.linalg.eigvalsh(Q)[-1], 1e-300)
    z = K.project(np.zeros(g.size) if z0 is None else z0)
    y, t = z.copy(), 1.0
    for _ in range(max_iter):
        zn = K.project(y - (Q @ y + g) / Lq)
        tn = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        if (zn - z) @ (Q @ zn + g) > 0:  # adaptive restart
            y, t = zn.copy(), 1.0
        else:
            y = zn + ((t - 1) / tn) * (zn - z)
            t = tn
        if np.linalg.norm(zn - z) <= tol * (1 + np.linalg.norm(zn)):
            return zn
        z = zn
    return z


# ---------------------------------------------------------------------------
# convex functions
# ---------------------------------------------------------------------------


class ConvexFn:
    """Proper convex lsc function on R^dim."""

    tag = "generic"
    smooth = False  # differentiable and finite everywhere
    has_hess = False
    strictly_convex = False
    strongly_convex = False
    prox_exact = True

    def __init__(self, dim: int):
        if int(dim) < 1:
            raise ValueError("dim must be positive")
        self.dim = int(dim)

    def __call__(self, x) -> float:
        raise NotImplementedError

    def subgrad(self, x) -> np.ndarray:
        raise NotImplementedError

    def grad(self, x) -> np.ndarray:
        return self.subgrad(x)

    def hess(self, x) -> np.ndarray:
        raise NotImplementedError(f"{self.tag} has no Hessian")

    def prox(self, x, lam: float) -> np.ndarray:
        raise NotImplementedError

    def value_grad(self, x, scratch: Optional[dict] = None):
        return self(x), self.grad(x)

    def hess_at(self, x, scratch: Optional[dict] = None):
        return self.hess(x)

    def conjugate(self) -> "ConvexFn":
        return NumericConjugate(self)

    @property
    def conj_kind(self) -> str:
        c = self.conjugate()
        if isinstance(c, NumericConjugate):
            return "prox-derived" if self.prox_exact else "numeric"
        return "exact"

    def to_config(self) -> dict:
        raise NotImplementedError(f"{self.tag} is not serializable")

    def __add__(self, other):
        return add(self, other)

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class Quadratic(ConvexFn):
    """0.5 x'Qx + b'x + c."""

    tag = "quadratic"
    smooth = True
    has_hess = True

    def __init__(self, Q, b=None, c: float = 0.0):
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[0] != Q.shape[1]:
            raise ValueError("Q must be square")
        super().__init__(Q.shape[0])
        Q = 0.5 * (Q + Q.T)
        ev = np.linalg.eigvalsh(Q)
        if ev[0] < -1e-10:
            raise ValueError(f"Q has negative eigenvalue {ev[0]:.3g}")
        self.Q = Q
        self.b = np.zeros(self.dim) if b is None else _bcast(b, self.dim)
        self.c = float(c)
        self._lmin = float(ev[0])
        self._lmax = float(ev[-1])
        self.strongly_convex = self.strictly_convex = self._lmin > 1e-12 * max(1.0, self._lmax)

    def __call__(self, x):
        x = _vec(x)
        return float(0.5 * x @ self.Q @ x + self.b @ x + self.c)

    def subgrad(self, x):
        return self.Q @ _vec(x) + self.b

    def hess(self, x):
        return self.Q

    def prox(self, x, lam):
        return np.linalg.solve(np.eye(self.dim) + lam * self.Q, _vec(x) - lam * self.b)

    def conjugate(self):
        if self.strongly_convex:
            Qi = np.linalg.inv(self.Q)
            Qi = 0.5 * (Qi + Qi.T)
            return Quadratic(Qi, -Qi @ self.b, 0.5 * self.b @ Qi @ self.b - self.c)
        return DegenerateQuadraticConj(self)

    def to_config(self):
        return {"kind": "quadratic", "Q": self.Q.tolist(), "b": self.b.tolist(), "c": self.c}


class DegenerateQuadraticConj(ConvexFn):
    """Conjugate of a quadratic with singular Q: finite only on b + range(Q)."""

    tag = "quadratic_conj"

    def __init__(self, q: Quadratic):
        super().__init__(q.dim)
        self.q = q
        self.Qp = np.linalg.pinv(q.Q, rcond=1e-12, hermitian=True)
        self._P = q.Q @ self.Qp  # projector on range(Q)

    def _r(self, v):
        return _vec(v) - self.q.b

    def __call__(self, v):
        r = self._r(v)
        if np.linalg.norm(r - self._P @ r) > 1e-10 * (1.0 + np.linalg.norm(r)):
            return INF
        return float(0.5 * r @ self.Qp @ r - self.q.c)

    def subgrad(self, v):
        return self.Qp @ self._r(v)

    def prox(self, v, lam):
        v = _vec(v)
        return v - lam * self.q.prox(v / lam, 1.0 / lam)

    def conjugate(self):
        return self.q

    def affine_split(self):
        """(smooth quadratic extension, N, b) with domain {v : N'(v - b) = 0}."""
        b = self.q.b
        w, V = np.linalg.eigh(self.q.Q)
        N = V[:, w <= 1e-12 * max(1.0, np.abs(w).max())]
        ext = Quadratic(self.Qp, -self.Qp @ b, float(0.5 * b @ self.Qp @ b - self.q.c))
        return ext, N, b


class Power(ConvexFn):
    """(w/p) ||x||^p with the Euclidean norm, p > 1."""

    tag = "power"
    smooth = True
    has_hess = True
    strictly_convex = True

    def __init__(self, p: float, weight: float = 1.0, dim: int = 1):
        if p <= 1:
            raise ValueError("power exponent must exceed 1")
        if weight <= 0:
            raise ValueError("weight must be positive")
        super().__init__(dim)
        self.p, self.w = float(p), float(weight)
        self.strongly_convex = self.p == 2.0

    def __call__(self, x):
        return float(self.w / self.p * np.linalg.norm(_vec(x)) ** self.p)

    def subgrad(self, x):
        x = _vec(x)
        r = np.linalg.norm(x)
        if r == 0.0:
            return np.zeros(self.dim)
        return self.w * r ** (self.p - 2) * x

    def hess(self, x):
        x = _vec(x)
        r = np.linalg.norm(x)
        p = self.p
        if r == 0.0:
            s = self.w if p == 2 else (0.0 if p > 2 else INF)
            return s * np.eye(self.dim) if np.isfinite(s) else np.diag(np.full(self.dim, INF))
        u = x / r
        return self.w * r ** (p - 2) * (np.eye(self.dim) + (p - 2) * np.outer(u, u))

    def prox(self, x, lam):
        x = _vec(x)
        a = np.linalg.norm(x)
        if a == 0.0:
            return x.copy()
        s = _scalar_power_prox(np.array([a]), lam * self.w, self.p)[0]
        return x * (s / a)

    def conjugate(self):
        q = self.p / (self.p - 1.0)
        return Power(q, self.w ** (1.0 - q), self.dim)

    def to_config(self):
        return {"kind": "power", "p": self.p, "weight": self.w, "dim": self.dim}


def _scalar_power_prox(a: np.ndarray, c, p: float) -> np.ndarray:
    """Solve s + c s^(p-1) = a for s in [0, a], elementwise (a >= 0)."""
    a = np.asarray(a, dtype=float)
    c = np.broadcast_to(np.asarray(c, dtype=float), a.shape)
    if p == 2.0:
        return a / (1.0 + c)
    lo = np.zeros_like(a)
    hi = np.minimum(a, (a / c) ** (1.0 / (p - 1.0)))
    s = 0.5 * (lo + hi) if p < 2 else hi.copy()
    for _ in range(200):
        g = s + c * s ** (p - 1) - a
        lo = np.where(g < 0, s, lo)
        hi = np.where(g > 0, s, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            dg = 1.0 + c * (p - 1) * s ** (p - 2)
            sn = s - g / dg
        bad = ~np.isfinite(sn) | (sn <= lo) | (sn >= hi)
        sn = np.where(bad, 0.5 * (lo + hi), sn)
        if np.all(np.abs(sn - s) <= 1e-16 * (1 + a)):
            s = sn
            break
        s = sn
    return s


class SeparablePower(ConvexFn):
    """sum_i (w_i/p) |x_i|^p, p > 1."""

    tag = "separable_power"
    smooth = True
    has_hess = True
    strictly_convex = True

    def __init__(self, p: float, weights, dim: Optional[int] = None):
        if p <= 1:
            raise ValueError("power exponent must exceed 1")
        w = _vec(weights)
        n = dim or w.size
        super().__init__(n)
        self.p, self.w = float(p), _bcast(w, n)
        if np.any(self.w <= 0):
            raise ValueError("weights must be positive")
        self.strongly_convex = self.p == 2.0

    def __call__(self, x):
        return float(np.sum(self.w / self.p * np.abs(_vec(x)) ** self.p))

    def subgrad(self, x):
        x = _vec(x)
        return self.w * np.sign(x) * np.abs(x) ** (self.p - 1)

    def hess(self, x):
        x = _vec(x)
        with np.errstate(divide="ignore"):
            d = self.w * (self.p - 1) * np.abs(x) ** (self.p - 2)
        return np.diag(d)

    def prox(self, x, lam):
        x = _vec(x)
        return np.sign(x) * _scalar_power_prox(np.abs(x), lam * self.w, self.p)

    def conjugate(self):
        q = self.p / (self.p - 1.0)
        return SeparablePower(q, self.w ** (1.0 - q))

    def to_config(self):
        return {"kind": "separable_power", "p": self.p, "weights": self.w.tolist()}


class AbsSum(ConvexFn):
    """sum_i w_i |x_i| (the 1-D case is the absolute value)."""

    tag = "abs"

    def __init__(self, weights=1.0, dim: Optional[int] = None):
        w = _vec(weights)
        n = dim or w.size
        super().__init__(n)
        self.w = _bcast(w, n)
        if np.any(self.w < 0):
            raise ValueError("weights must be nonnegative")

    def __call__(self, x):
        return float(self.w @ np.abs(_vec(x)))

    def subgrad(self, x):
        return self.w * np.sign(_vec(x))

    def prox(self, x, lam):
        x = _vec(x)
        return np.sign(x) * np.maximum(np.abs(x) - lam * self.w, 0.0)

    def conjugate(self):
        return Indicator(Box(-self.w, self.w))

    def to_config(self):
        return {"kind": "abs", "weights": self.w.tolist()}


class SeparableSum(ConvexFn):
    """sum_i w_i j(x_i) for a scalar convex j and positive weights."""

    tag = "separable_sum"

    def __init__(self, j: ConvexFn, weights, dim: Optional[int] = None):
        if j.dim != 1:
            raise ValueError("j must be a function of one variable")
        w = _vec(weights)
        n = dim or w.size
        super().__init__(n)
        self.j, self.w = j, _bcast(w, n)
        if np.any(self.w <= 0):
            raise ValueError("weights must be positive")
        for k in ("smooth", "has_hess", "strictly_convex", "strongly_convex", "prox_exact"):
            setattr(self, k, getattr(j, k))

    def __call__(self, x):
        tot = 0.0
        for wi, xi in zip(self.w, _vec(x)):
            v = self.j(xi)
            if not np.isfinite(v):
                return INF
            tot += wi * v
        return float(tot)

    def subgrad(self, x):
        return np.array([wi * self.j.subgrad(xi)[0] for wi, xi in zip(self.w, _vec(x))])

    def hess(self, x):
        return np.diag([wi * self.j.hess(xi)[0, 0] for wi, xi in zip(self.w, _vec(x))])

    def prox(self, x, lam):
        return np.array([self.j.prox(xi, lam * wi)[0] for wi, xi in zip(self.w, _vec(x))])

    def conjugate(self):
        jc = self.j.conjugate()
        if isinstance(jc, NumericConjugate):
            return NumericConjugate(self)
        # (w j)*(v) = w j*(v / w), coordinatewise
        return _WeightedConj(jc, self.w, self)

    def to_config(self):
        return {"kind": "separable_sum", "j": self.j.to_config(), "weights": self.w.tolist()}


class _WeightedConj(ConvexFn):
    tag = "separable_sum_conj"

    def __init__(self, jc: ConvexFn, w, base):
        super().__init__(w.size)
        self.jc, self.w, self.base = jc, w, base
        for k in ("smooth", "has_hess", "strictly_convex", "strongly_convex"):
            setattr(self, k, getattr(jc, k))

    def __call__(self, v):
        tot = 0.0
        for wi, vi in zip(self.w, _vec(v)):
            c = self.jc(vi / wi)
            if not np.isfinite(c):
                return INF
            tot += wi * c
        return float(tot)

    def subgrad(self, v):
        return np.array([self.jc.subgrad(vi / wi)[0] for wi, vi in zip(self.w, _vec(v))])

    def hess(self, v):
        return np.diag([self.jc.hess(vi / wi)[0, 0] / wi for wi, vi in zip(self.w, _vec(v))])

    def prox(self, v, lam):
        # prox of w jc(./w) at v: w * prox_{jc, lam/w}(v/w)
        return np.array([wi * self.jc.prox(vi / wi, lam / wi)[0] for wi, vi in zip(self.w, _vec(v))])

    def conjugate(self):
        return self.base


class Indicator(ConvexFn):
    tag = "indicator"

    def __init__(self, K: ConvexSet, tol: float = 1e-10):
        super().__init__(K.dim)
        self.K, self.tol = K, tol

    def __call__(self, x):
        return 0.0 if self.K.contains(x, self.tol) else INF

    def subgrad(self, x):
        return np.zeros(self.dim)

    def prox(self, x, lam):
        return self.K.project(x)

    def conjugate(self):
        return SupportFn(self.K)

    def to_config(self):
        return {"kind": "indicator", "set": self.K.to_config()}


class SupportFn(ConvexFn):
    tag = "support"

    def __init__(self, K: ConvexSet):
        super().__init__(K.dim)
        self.K = K

    def __call__(self, v):
        return self.K.support(v)

    def subgrad(self, v):
        return self.K.support_argmax(v)

    def prox(self, v, lam):
        v = _vec(v)
        return v - lam * self.K.project(v / lam)

    def conjugate(self):
        return Indicator(self.K)

    def to_config(self):
        return {"kind": "support", "set": self.K.to_config()}


class Tilt(ConvexFn):
    """phi(x) + <f, x>."""

    tag = "tilt"

    def __init__(self, fn: ConvexFn, f):
        super().__init__(fn.dim)
        self.fn, self.f = fn, _bcast(f, fn.dim)
        for k in ("smooth", "has_hess", "strictly_convex", "strongly_convex", "prox_exact"):
            setattr(self, k, getattr(fn, k))

    def __call__(self, x):
        x = _vec(x)
        return self.fn(x) + float(self.f @ x)

    def subgrad(self, x):
        return self.fn.subgrad(x) + self.f

    def hess(self, x):
        return self.fn.hess(x)

    def prox(self, x, lam):
        return self.fn.prox(_vec(x) - lam * self.f, lam)

    def conjugate(self):
        return Translate(self.fn.conjugate(), self.f)

    def to_config(self):
        return {"kind": "tilt", "f": self.f.tolist(), "fn": self.fn.to_config()}


class Translate(ConvexFn):
    """phi(x - c)."""

    tag = "translate"

    def __init__(self, fn: ConvexFn, c):
        super().__init__(fn.dim)
        self.fn, self.c = fn, _bcast(c, fn.dim)
        for k in ("smooth", "has_hess", "strictly_convex", "strongly_convex", "prox_exact"):
            setattr(self, k, getattr(fn, k))

    def __call__(self, x):
        return self.fn(_vec(x) - self.c)

    def subgrad(self, x):
        return self.fn.subgrad(_vec(x) - self.c)

    def hess(self, x):
        return self.fn.hess(_vec(x) - self.c)

    def prox(self, x, lam):
        return self.c + self.fn.prox(_vec(x) - self.c, lam)

    def conjugate(self):
        return Tilt(self.fn.conjugate(), self.c)

    def to_config(self):
        return {"kind": "translate", "c": self.c.tolist(), "fn": self.fn.to_config()}


class Scaled(ConvexFn):
    """alpha * phi(x / beta), alpha, beta > 0."""

    tag = "scaled"

    def __init__(self, alpha: float, fn: ConvexFn, beta: float = 1.0):
        if alpha <= 0 or beta <= 0:
            raise ValueError("scale factors must be positive")
        super().__init__(fn.dim)
        self.alpha, self.fn, self.beta = float(alpha), fn, float(beta)
        for k in ("smooth", "has_hess", "strictly_convex", "strongly_convex", "prox_exact"):
            setattr(self, k, getattr(fn, k))

    def __call__(self, x):
        v = self.fn(_vec(x) / self.beta)
        return self.alpha * v if np.isfinite(v) else INF

    def subgrad(self, x):
        return (self.alpha / self.beta) * self.fn.subgrad(_vec(x) / self.beta)

    def hess(self, x):
        return (self.alpha / self.beta**2) * self.fn.hess(_vec(x) / self.beta)

    def value_grad(self, x, scratch=None):
        v, g = self.fn.value_grad(_vec(x) / self.beta, scratch)
        return (self.alpha * v if np.isfinite(v) else INF), (self.alpha / self.beta) * g

    def hess_at(self, x, scratch=None):
        return (self.alpha / self.beta**2) * self.fn.hess_at(_vec(x) / self.beta, scratch)

    def prox(self, x, lam):
        b = self.beta
        return b * self.fn.prox(_vec(x) / b, lam * self.alpha / b**2)

    def conjugate(self):
        return Scaled(self.alpha, self.fn.conjugate(), self.alpha / self.beta)

    def to_config(self):
        return {"kind": "scaled", "alpha": self.alpha, "beta": self.beta, "fn": self.fn.to_config()}


class Composed(ConvexFn):
    """g(Mx + c) for a matrix M."""

    tag = "composed"
    prox_exact = False

    def __init__(self, g: ConvexFn, M, c=None):
        M = np.atleast_2d(np.asarray(M, dtype=float))
        if M.shape[0] != g.dim:
            raise ValueError("M rows must match g.dim")
        super().__init__(M.shape[1])
        self.g, self.M = g, M
        self.c = np.zeros(g.dim) if c is None else _bcast(c, g.dim)
        self.smooth, self.has_hess = g.smooth, g.has_hess
        injective = np.linalg.matrix_rank(M) == M.shape[1]
        self.strictly_convex = g.strictly_convex and injective
        self.strongly_convex = g.strongly_convex and injective

    def __call__(self, x):
        return self.g(self.M @ _vec(x) + self.c)

    def subgrad(self, x):
        return self.M.T @ self.g.subgrad(self.M @ _vec(x) + self.c)

    def hess(self, x):
        return self.M.T @ self.g.hess(self.M @ _vec(x) + self.c) @ self.M

    def prox(self, x, lam):
        x = _vec(x)
        if self.g.has_hess:
            def vgh(z):
                d = z - x
                u = self.M @ z + self.c
                return (self.g(u) + d @ d / (2 * lam), self.M.T @ self.g.grad(u) + d / lam,
                        self.M.T @ self.g.hess(u) @ self.M + np.eye(self.dim) / lam)
            return newton_minimize(vgh, x)[0]
        return _prox_by_splitting([self], x, lam)

    def conjugate(self):
        n = self.dim
        if self.M.shape == (n, n) and np.linalg.matrix_rank(self.M) == n:
            Mi_T = np.linalg.inv(self.M).T
            # (g o (M.+c))*(v) = g*(M^{-T} v) - <c, M^{-T} v>
            return Composed(Tilt(self.g.conjugate(), -self.c), Mi_T)
        return NumericConjugate(self)


class Sum(ConvexFn):
    tag = "sum"
    prox_exact = False

    def __init__(self, fns: Sequence[ConvexFn], conj_hint: Optional[ConvexFn] = None):
        fns = list(fns)
        if not fns:
            raise ValueError("empty sum")
        d = fns[0].dim
        if any(f.dim != d for f in fns):
            raise ValueError("dimension mismatch in sum")
        super().__init__(d)
        self.fns = fns
        self._conj_hint = conj_hint
        self.smooth = all(f.smooth for f in fns)
        self.has_hess = all(f.has_hess for f in fns)
        self.strictly_convex = any(f.strictly_convex for f in fns)
        self.strongly_convex = any(f.strongly_convex for f in fns)

    def __call__(self, x):
        tot = 0.0
        for f in self.fns:
            v = f(x)
            if not np.isfinite(v):
                return INF
            tot += v
        return tot

    def subgrad(self, x):
        return sum(f.subgrad(x) for f in self.fns)

    def hess(self, x):
        return sum(f.hess(x) for f in self.fns)

    def prox(self, x, lam):
        x = _vec(x)
        if len(self.fns) == 2:
            q, g = self.fns if isinstance(self.fns[0], Quadratic) else self.fns[::-1]
            if isinstance(q, Quadratic) and not isinstance(g, Quadratic) and g.prox_exact:
                c = q.Q[0, 0]
                if np.array_equal(q.Q, c * np.eye(self.dim)):
                    # c/2|z|^2 + b'z + |z - x|^2/(2 lam) = |z - y|^2/(2 mu) + const
                    mu = lam / (1.0 + lam * c)
                    return g.prox(mu * (x / lam - q.b), mu)
        if self.has_hess:
            def vgh(z):
                d = z - x
                return (self(z) + d @ d / (2 * lam), self.grad(z) + d / lam,
                        self.hess(z) + np.eye(self.dim) / lam)
            return newton_minimize(vgh, x)[0]
        return _prox_by_splitting(self.fns, x, lam)

    def conjugate(self):
        if self._conj_hint is not None:
            return self._conj_hint
        return NumericConjugate(self)

    def to_config(self):
        return {"kind": "sum", "terms": [f.to_config() for f in self.fns]}


class QuadraticOnSet(ConvexFn):
    """0.5 x'Qx + b'x + c restricted to a convex set K (Q positive definite)."""

    tag = "quadratic_on_set"

    def __init__(self, q: Quadratic, K: ConvexSet):
        if q.dim != K.dim:
            raise ValueError("dimension mismatch")
        super().__init__(q.dim)
        self.q, self.K = q, K
        self.strictly_convex = self.strongly_convex = q.strongly_convex
        self.prox_exact = isinstance(K, (Box, WholeSpace))

    def __call__(self, x):
        return self.q(x) if self.K.contains(x) else INF

    def subgrad(self, x):
        # min-norm element of Qx + b + N_K(x): project -(Qx+b) onto the normal cone
        x = _vec(x)
        g = self.q.grad(x)
        return g - (x - self.K.project(x - g)) if self.K.contains(x) else g

    def prox(self, x, lam):
        x = _vec(x)
        Q = self.q.Q + np.eye(self.dim) / lam
        return projected_qp(Q, self.q.b - x / lam, self.K, z0=x)

    def conjugate(self):
        if self.q.strongly_convex:
            return QuadraticOnSetConj(self)
        return NumericConjugate(self)

    def to_config(self):
        return {"kind": "sum", "terms": [self.q.to_config(), {"kind": "indicator", "set": self.K.to_config()}]}


class QuadraticOnSetConj(ConvexFn):
    """Conjugate of a strongly convex quadratic restricted to K, via an exact QP."""

    tag = "quadratic_on_set_conj"
    smooth = True

    def __init__(self, base: QuadraticOnSet):
        super().__init__(base.dim)
        self.base = base
        self.has_hess = isinstance(base.K, (Box, WholeSpace))

    def argmax(self, v, scratch=None):
        q = self.base.q
        z0 = None if scratch is None else scratch.get("z")
        z = projected_qp(q.Q, q.b - _vec(v), self.base.K, z0=z0)
        if scratch is not None:
            scratch["z"] = z
        return z

    def __call__(self, v):
        v = _vec(v)
        z = self.argmax(v)
        return float(v @ z - self.base.q(z))

    def subgrad(self, v):
        return self.argmax(v)

    def value_grad(self, v, scratch=None):
        v = _vec(v)
        z = self.argmax(v, scratch)
        return float(v @ z - self.base.q(z)), z

    def hess(self, v):
        return self.hess_at(v)

    def hess_at(self, v, scratch=None):
        # generalized Hessian: inverse of Q on the free coordinates of the maximizer
        z = self.argmax(v, scratch)
        K = self.base.K
        Q = self.base.q.Q
        if isinstance(K, WholeSpace):
            return np.linalg.inv(Q)
        free = (z > K.lo + 1e-12) & (z < K.hi - 1e-12)
        H = np.zeros((self.dim, self.dim))
        if free.any():
            H[np.ix_(free, free)] = np.linalg.inv(Q[np.ix_(free, free)])
        return H

    def prox(self, v, lam):
        v = _vec(v)
        return v - lam * self.base.prox(v / lam, 1.0 / lam)

    def conjugate(self):
        return self.base


class MoreauEnvelope(ConvexFn):
    tag = "moreau_envelope"
    smooth = True

    def __init__(self, fn: ConvexFn, lam: float):
        if lam <= 0:
            raise ValueError("lambda must be positive")
        super().__init__(fn.dim)
        self.fn, self.lam = fn, float(lam)
        self.prox_exact = fn.prox_exact

    def __call__(self, x):
        x = _vec(x)
        z = self.fn.prox(x, self.lam)
        return self.fn(z) + float((z - x) @ (z - x)) / (2 * self.lam)

    def subgrad(self, x):
        x = _vec(x)
        return (x - self.fn.prox(x, self.lam)) / self.lam

    def prox(self, x, mu):
        x = _vec(x)
        return x + (mu / (self.lam + mu)) * (self.fn.prox(x, self.lam + mu) - x)

    def conjugate(self):
        # (e_lam phi)* = phi* + (lam/2)|.|^2
        return Sum([self.fn.conjugate(), Quadratic(self.lam * np.eye(self.dim))], conj_hint=self)


def _prox_by_splitting(fns: Sequence[ConvexFn], x, lam, tol=1e-13, max_iter=20_000):
    """prox of a sum by proximal gradient (one nonsmooth term) or Douglas-Rachford."""
    x = _vec(x)
    smooth = [f for f in fns if f.smooth]
    rough = [f for f in fns if not f.smooth]
    if len(rough) <= 1:
        r = rough[0] if rough else None

        def grad(z):
            return sum((f.grad(z) for f in smooth), np.zeros(x.size)) + (z - x) / lam

        # crude Lipschitz estimate by power iteration on finite differences
        z, y, t, step = x.copy(), x.copy(), 1.0, lam
        for _ in range(max_iter):
            g = grad(y)
            while True:
                zn = y - step * g
                if r is not None:
                    zn = r.prox(zn, step)
                if not np.all(np.isfinite(zn)):
                    step *= 0.5
                    continue
                # sufficient-decrease check on the smooth part
                fs = lambda w: sum(f(w) for f in smooth) + (w - x) @ (w - x) / (2 * lam)  # noqa: E731
                d = zn - y
                if fs(zn) <= fs(y) + g @ d + d @ d / (2 * step) + 1e-15 * (1 + abs(fs(y))):
                    break
                step *= 0.5
            tn = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
            if (zn - z) @ (y - zn) > 0:
                y, t = zn.copy(), 1.0
            else:
                y, t = zn + ((t - 1) / tn) * (zn - z), tn
            if np.linalg.norm(zn - z) <= tol * (1 + np.linalg.norm(zn)):
                return zn
            z = zn
            step *= 1.2
        return z
    # Douglas-Rachford on f1 + (f2 + ... + quadratic)
    f1 = rough[0]
    rest = Sum([f for f in fns if f is not f1]) if len(fns) > 2 else [f for f in fns if f is not f1][0]
    # absorb the proximity quadratic: prox_{lam f} with f = f1 + rest
    gam = lam
    s = x.copy()
    z = x.copy()
    for _ in range(max_iter):
        # prox of gam*(f1 + |.-x|^2/(4 lam)) and gam*(rest + |.-x|^2/(4 lam))
        a = f1.prox((s + gam * x / (2 * lam)) / (1 + gam / (2 * lam)), gam / (1 + gam / (2 * lam)))
        w = 2 * a - s
        b = rest.prox((w + gam * x / (2 * lam)) / (1 + gam / (2 * lam)), gam / (1 + gam / (2 * lam)))
        s = s + b - a
        if np.linalg.norm(a - z) <= tol * (1 + np.linalg.norm(a)) and np.linalg.norm(a - b) <= 1e-10 * (1 + np.linalg.norm(a)):
            return a
        z = a
    return z


def add(*fns: ConvexFn) -> ConvexFn:
    """Sum of convex functions; merges quadratics and recognizes quadratic + indicator."""
    flat = []
    for f in fns:
        flat.extend(f.fns if isinstance(f, Sum) and f._conj_hint is None else [f])
    quads = [f for f in flat if isinstance(f, Quadratic)]
    others = [f for f in flat if not isinstance(f, Quadratic)]
    if len(quads) > 1:
        q = Quadratic(sum(f.Q for f in quads), sum(f.b for f in quads), sum(f.c for f in quads))
        quads = [q]
    if len(quads) == 1 and len(others) == 1 and isinstance(others[0], Indicator):
        return QuadraticOnSet(quads[0], others[0].K)
    if len(quads) == 1 and len(others) == 1 and not np.any(quads[0].Q) and quads[0].c == 0.0:
        # a purely linear quadratic is a tilt, which keeps the conjugate exact
        return Tilt(others[0], quads[0].b)
    parts = quads + others
    return parts[0] if len(parts) == 1 else Sum(parts)


# ---------------------------------------------------------------------------
# numeric conjugation
# ---------------------------------------------------------------------------


@dataclass
class ConjResult:
    value: float
    kind: str
    converged: bool
    residual: float
    argmax: Optional[np.ndarray] = None


class NumericConjugate(ConvexFn):
    """phi*(v) by proximal-point iterations on z -> phi(z) - <v, z>.

    The proximal weight 1/lam diminishes geometrically; the warm start is read
    from and written to a caller-supplied scratch dict.
    """

    tag = "numeric_conjugate"

    def __init__(self, fn: ConvexFn, policy: NumericPolicy = DEFAULT_POLICY):
        super().__init__(fn.dim)
        self.fn, self.policy = fn, policy
        self._last = None
        self.smooth = fn.strictly_convex
        self.has_hess = fn.has_hess and fn.strictly_convex
        self.prox_exact = False

    def solve(self, v, scratch: Optional[dict] = None) -> ConjResult:
        v = _vec(v)
        if scratch is not None and "v" in scratch and np.array_equal(scratch["v"], v):
            return scratch["res"]
        key = v.tobytes()
        last = self._last  # (key, result), replaced atomically; the result depends on v only
        if last is not None and last[0] == key:
            return last[1]
        if self.fn.smooth and self.fn.has_hess:
            r = self._solve_newton(v, scratch)
        else:
            r = self._solve_prox(v, scratch)
        if scratch is not None:
            scratch["v"], scratch["res"] = v.copy(), r
        self._last = (key, r)
        return r

    def _solve_newton(self, v, scratch):
        # stationarity grad phi(z) = v; unbounded sup shows up as divergence
        pol = self.policy
        fn = self.fn
        z = np.zeros(self.dim) if scratch is None or scratch.get("z") is None else scratch["z"].copy()
        last = self._last
        if scratch is None and last is not None and last[1].argmax is not None:
            z = last[1].argmax.copy()

        def vgh(w):
            return fn(w) - v @ w, fn.grad(w) - v, fn.hess(w)

        z, ok = newton_minimize(vgh, z, tol=1e-14, max_iter=300)
        if not np.all(np.isfinite(z)) or np.linalg.norm(z) > pol.div_radius:
            if scratch is not None:
                scratch["z"] = None
            # a finite sup that is not attained (flat directions) also sends
            # Newton away; proximal point stays bounded there
            return self._solve_prox(v, scratch)
        g = fn.grad(z) - v
        res = float(np.linalg.norm(g))
        if not ok and res > 1e-6 * (1.0 + np.linalg.norm(v)):
            # Newton stalled; defer to proximal point
            return self._solve_prox(v, scratch)
        if scratch is not None:
            scratch["z"] = z
        return ConjResult(float(v @ z - fn(z)), "numeric", True, res, z)

    def _solve_prox(self, v, scratch):
        pol = self.policy
        z = np.zeros(self.dim) if scratch is None or scratch.get("z") is None else scratch["z"].copy()
        if not np.isfinite(self.fn(z)):
            z = self.fn.prox(z, 1.0)
        lam, res, ok = 1.0, INF, False
        d = np.zeros(self.dim)
        for k in range(min(pol.max_iter, 400)):
            zn = self.fn.prox(z + lam * v, lam)
            d = zn - z
            res = np.linalg.norm(d)
            z = zn
            if not np.all(np.isfinite(z)) or np.linalg.norm(z) > pol.div_radius:
                if scratch is not None:
                    scratch["z"] = None
                return ConjResult(INF, "numeric", True, 0.0, None)
            if res <= 1e-13 * (1.0 + np.linalg.norm(z)) and k >= 1:
                ok = True
                break
            lam = min(lam * 10.0, 1e6)
        if ok and lam > 1e3:
            # huge weights cancel digits in z + lam v; polish at a moderate weight
            lam = 1e3
            for _ in range(200):
                zn = self.fn.prox(z + lam * v, lam)
                step = np.linalg.norm(zn - z)
                z = zn
                if step <= 1e-15 * (1.0 + np.linalg.norm(z)):
                    break
        if not ok and self._recedes(v, z, d):
            if scratch is not None:
                scratch["z"] = None
            return ConjResult(INF, "numeric", True, 0.0, None)
        if scratch is not None:
            scratch["z"] = z
        val = float(v @ z - self.fn(z))
        if not ok and not np.isfinite(val):
            val = INF
        return ConjResult(val, "prox-derived" if self.fn.prox_exact else "numeric", ok, float(res), z)

    def _recedes(self, v, z, d) -> bool:
        # linear gain of <v, .> - phi along the last step direction means sup = +inf
        nd = np.linalg.norm(d)
        if nd == 0.0 or not np.all(np.isfinite(d)):
            return False
        u = d / nd
        R = max(1e3, 10.0 * np.linalg.norm(z))
        g = [float(v @ (z + t * u) - self.fn(z + t * u)) for t in (0.0, R, 2.0 * R)]
        if not all(np.isfinite(g)):
            return False
        s1, s2 = (g[1] - g[0]) / R, (g[2] - g[1]) / R
        return s2 > 1e-6 * (1.0 + np.linalg.norm(v)) and s2 >= 0.5 * s1

    def __call__(self, v):
        return self.solve(v).value

    def subgrad(self, v):
        r = self.solve(v)
        return r.argmax if r.argmax is not None else np.full(self.dim, np.nan)

    def value_grad(self, v, scratch=None):
        r = self.solve(v, scratch)
        return r.value, (r.argmax if r.argmax is not None else np.full(self.dim, np.nan))

    def hess(self, v):
        return self.hess_at(v)

    def hess_at(self, v, scratch=None):
        z = self.solve(v, scratch).argmax
        H = _finite_hess(self.fn.hess(z))
        return np.linalg.pinv(H, hermitian=True)

    def prox(self, v, lam):
        v = _vec(v)
        return v - lam * self.fn.prox(v / lam, 1.0 / lam)

    def conjugate(self):
        return self.fn


# ---------------------------------------------------------------------------
# operation-level entry points
# ---------------------------------------------------------------------------


def conjugate_eval(fn: ConvexFn, p, mode: str = "auto", scratch: Optional[dict] = None,
                   policy: NumericPolicy = DEFAULT_POLICY) -> ConjResult:
    """phi*(p), exact when the catalog permits, else by numeric conjugation."""
    p = _vec(p)
    c = fn.conjugate() if mode != "numeric" else NumericConjugate(fn, policy)
    if isinstance(c, NumericConjugate):
        if mode == "exact":
            raise ValueError(f"{fn.tag} has no closed-form conjugate")
        if c.policy is not policy:
            c = NumericConjugate(fn, policy)
        return c.solve(p, scratch)
    return ConjResult(float(c(p)), "exact", True, 0.0, None)


def prox(fn: ConvexFn, x, lam: float) -> np.ndarray:
    if lam <= 0:
        raise ValueError("lambda must be positive")
    return fn.prox(_vec(x), float(lam))


def moreau_envelope(fn: ConvexFn, lam: float) -> MoreauEnvelope:
    return MoreauEnvelope(fn, lam)


def fenchel_young_gap(fn: ConvexFn, x, p, conj: Optional[ConvexFn] = None) -> float:
    """phi(x) + phi*(p) - <x, p> (nonnegative; zero iff p is a subgradient at x)."""
    x, p = _vec(x), _vec(p)
    c = fn.conjugate() if conj is None else conj
    a, b = fn(x), c(p)
    if not (np.isfinite(a) and np.isfinite(b)):
        return INF
    return float(a + b - x @ p)


_FN_KEYS = {
    "quadratic": {"Q", "b", "c"},
    "power": {"p", "weight", "dim"},
    "separable_power": {"p", "weights", "dim"},
    "abs": {"weights", "dim"},
    "indicator": {"set"},
    "support": {"set"},
    "tilt": {"fn", "f"},
    "translate": {"fn", "c"},
    "scaled": {"alpha", "beta", "fn"},
    "sum": {"terms"},
    "separable_sum": {"j", "weights", "dim"},
}
_SET_KEYS = {
    "box": {"lo", "hi", "dim"},
    "ball": {"center", "radius"},
    "halfspace": {"a", "c"},
    "nonneg_monotone": {"dim"},
    "whole": {"dim"},
}


def check_keys(cfg: dict, table: dict, what: str):
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ValueError(f"{what} config must be an object with a 'kind' field")
    k = cfg["kind"]
    if k not in table:
        raise ValueError(f"unknown {what} kind {k!r}")
    extra = set(cfg) - table[k] - {"kind"}
    if extra:
        raise ValueError(f"unknown keys for {what} {k!r}: {sorted(extra)}")


def make_catalog_fn(cfg: dict) -> ConvexFn:
    """Build a function from a tagged record {"kind": ..., ...}."""
    check_keys(cfg, _FN_KEYS, "function")
    k = cfg["kind"]
    if k == "quadratic":
        Q = np.asarray(cfg["Q"], dtype=float)
        return Quadratic(Q, cfg.get("b"), cfg.get("c", 0.0))
    if k == "power":
        return Power(cfg["p"], cfg.get("weight", 1.0), cfg.get("dim", 1))
    if k == "separable_power":
        return SeparablePower(cfg["p"], cfg["weights"], cfg.get("dim"))
    if k == "abs":
        return AbsSum(cfg.get("weights", 1.0), cfg.get("dim"))
    if k == "indicator":
        return Indicator(make_set(cfg["set"]))
    if k == "support":
        return SupportFn(make_set(cfg["set"]))
    if k == "tilt":
        return Tilt(make_catalog_fn(cfg["fn"]), cfg["f"])
    if k == "translate":
        return Translate(make_catalog_fn(cfg["fn"]), cfg["c"])
    if k == "scaled":
        return Scaled(cfg["alpha"], make_catalog_fn(cfg["fn"]), cfg.get("beta", 1.0))
    if k == "sum":
        return add(*[make_catalog_fn(t) for t in cfg["terms"]])
    if k == "separable_sum":
        return SeparableSum(make_catalog_fn(cfg["j"]), cfg["weights"], cfg.get("dim"))
    raise ValueError(f"unknown function kind {k!r}")
