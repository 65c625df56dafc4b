"""Dense linear operators with an optional metric, and boundary triplets."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np


class LinOp:
    """Dense operator X -> Y.  ``metric`` (on X and Y when square) defines the
    inner product <x, y>_G = x' G y; the adjoint is taken in that metric."""

    def __init__(self, entries, metric=None, metric_out=None):
        A = np.atleast_2d(np.asarray(entries, dtype=float))
        if A.ndim != 2:
            raise ValueError("operator entries must be a matrix")
        self.A = A
        self.rows, self.cols = A.shape
        self.metric = None if metric is None else np.atleast_2d(np.asarray(metric, dtype=float))
        if metric_out is None and self.metric is not None and self.rows == self.cols:
            metric_out = self.metric
        self.metric_out = None if metric_out is None else np.atleast_2d(np.asarray(metric_out, dtype=float))
        for G, n in ((self.metric, self.cols), (self.metric_out, self.rows)):
            if G is not None:
                if G.shape != (n, n) or not np.allclose(G, G.T, atol=1e-12 * (1 + np.abs(G).max())):
                    raise ValueError("metric must be symmetric and shape-compatible")
                if np.linalg.eigvalsh(G)[0] <= 0:
                    raise ValueError("metric must be positive definite")

    @classmethod
    def identity(cls, n: int, metric=None) -> "LinOp":
        return cls(np.eye(n), metric)

    @classmethod
    def zeros(cls, rows: int, cols: Optional[int] = None) -> "LinOp":
        return cls(np.zeros((rows, rows if cols is None else cols)))

    @property
    def square(self) -> bool:
        return self.rows == self.cols

    @property
    def T(self) -> np.ndarray:
        return self.A.T

    def __matmul__(self, x):
        if isinstance(x, LinOp):
            return LinOp(self.A @ x.A, x.metric, self.metric_out)
        return self.A @ np.asarray(x, dtype=float)

    def __call__(self, x):
        return self.A @ np.asarray(x, dtype=float)

    def __add__(self, other: "LinOp") -> "LinOp":
        return LinOp(self.A + _entries(other), self.metric, self.metric_out)

    def __sub__(self, other: "LinOp") -> "LinOp":
        return LinOp(self.A - _entries(other), self.metric, self.metric_out)

    def __neg__(self):
        return LinOp(-self.A, self.metric, self.metric_out)

    def __mul__(self, s: float):
        return LinOp(float(s) * self.A, self.metric, self.metric_out)

    __rmul__ = __mul__

    def inner_in(self, x, y) -> float:
        x, y = np.asarray(x, float), np.asarray(y, float)
        return float(x @ y) if self.metric is None else float(x @ self.metric @ y)

    def inner_out(self, x, y) -> float:
        x, y = np.asarray(x, float), np.asarray(y, float)
        return float(x @ y) if self.metric_out is None else float(x @ self.metric_out @ y)

    def adjoint(self) -> "LinOp":
        # <Ax, y>_Gout = <x, A* y>_Gin  =>  A* = Gin^{-1} A' Gout
        At = self.A.T
        if self.metric_out is not None:
            At = At @ self.metric_out
        if self.metric is not None:
            At = np.linalg.solve(self.metric, At)
        return LinOp(At, self.metric_out, self.metric)

    def inv(self) -> "LinOp":
        if not self.square:
            raise ValueError("only square operators can be inverted")
        return LinOp(np.linalg.inv(self.A), self.metric_out, self.metric)

    def to_config(self) -> dict:
        d = {"kind": "linop", "entries": self.A.tolist()}
        if self.metric is not None:
            d["metric"] = self.metric.tolist()
        return d

    def __repr__(self):
        return f"LinOp({self.rows}x{self.cols}{', metric' if self.metric is not None else ''})"


def _entries(op) -> np.ndarray:
    return op.A if isinstance(op, LinOp) else np.asarray(op, dtype=float)


def as_linop(A) -> LinOp:
    return A if isinstance(A, LinOp) else LinOp(A)


def make_linop(cfg) -> LinOp:
    if isinstance(cfg, dict):
        return LinOp(cfg["entries"], cfg.get("metric"))
    return LinOp(cfg)


def decompose(A) -> tuple[LinOp, LinOp]:
    """Symmetric and antisymmetric parts (in the operator's metric)."""
    A = as_linop(A)
    if not A.square:
        raise ValueError("decompose needs a square operator")
    As = A.adjoint()
    sym = LinOp(0.5 * (A.A + As.A), A.metric)
    skew = LinOp(0.5 * (A.A - As.A), A.metric)
    # keep A == sym + skew exactly in floating point
    skew = LinOp(A.A - sym.A, A.metric)
    return sym, skew


@dataclass(frozen=True)
class Classification:
    positive: bool
    coercive_constant: float
    skew: bool


def classify(A, pos_tol: float = 1e-10, skew_tol: float = 1e-12) -> Classification:
    A = as_linop(A)
    if not A.square:
        raise ValueError("classify needs a square operator")
    M = A.A if A.metric is None else A.metric @ A.A  # bilinear form x' G A y
    S = 0.5 * (M + M.T)
    if A.metric is None:
        lam = np.linalg.eigvalsh(S)[0]
    else:
        from scipy.linalg import eigh
        lam = eigh(S, A.metric, eigvals_only=True)[0]
    scale = max(1.0, np.abs(M).max())
    skew = bool(np.abs(M + M.T).max() <= skew_tol * scale)
    return Classification(bool(lam >= -pos_tol), float(max(lam, 0.0)), skew)


@dataclass(frozen=True)
class BoundaryTriplet:
    """(Lambda, b1, b2) with Lambda skew modulo the boundary:
    Lambda* = -Lambda + b2* b2 - b1* b1  (all in the identity pairing on X)."""

    lambda_op: LinOp
    b1: LinOp
    b2: LinOp

    @property
    def dim(self) -> int:
        return self.lambda_op.cols


def _pairing_matrix(L: LinOp) -> np.ndarray:
    # matrix of the bilinear form (x, y) -> <Lx, y>
    return L.A if L.metric_out is None else L.metric_out @ L.A


def triplet_residual(t: BoundaryTriplet, samples: int = 10, seed: int = 0) -> float:
    """Larger of the sampled |<Lx,y> + <Ly,x> - <b2x,b2y> + <b1x,b1y>| over unit pairs
    and the exact entrywise residual of Lambda + Lambda* - b2*b2 + b1*b1."""
    Lm = _pairing_matrix(t.lambda_op)
    B1 = _pairing_matrix_b(t.b1)
    B2 = _pairing_matrix_b(t.b2)
    E = Lm + Lm.T - B2 + B1
    rng = np.random.default_rng(seed)
    worst = 0.0
    n = t.dim
    for _ in range(samples):
        x = rng.standard_normal(n)
        y = rng.standard_normal(n)
        x /= np.linalg.norm(x)
        y /= np.linalg.norm(y)
        worst = max(worst, abs(x @ E @ y))
    return float(max(worst, np.abs(E).max()))


def _pairing_matrix_b(b: LinOp) -> np.ndarray:
    Gm = np.eye(b.rows) if b.metric_out is None else b.metric_out
    return b.A.T @ Gm @ b.A
