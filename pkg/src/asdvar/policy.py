"""Single numeric-policy record shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, replace


@dataclass(frozen=True)
class NumericPolicy:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_iter: int = 100_000
    # iterates beyond this norm are treated as divergence (sup = +inf, inf = -inf)
    div_radius: float = 1e8
    # certificate tolerance factor: tol_gap = gap_factor * (1 + |I(x0)|)
    gap_factor: float = 1e-8

    def with_(self, **kw) -> "NumericPolicy":
        return replace(self, **kw)

    def tol_gap(self, i0: float) -> float:
        return self.gap_factor * (1.0 + abs(i0))


DEFAULT_POLICY = NumericPolicy()
