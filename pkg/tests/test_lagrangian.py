import numpy as np
import pytest

from asdvar.convex_core import Indicator, Box, Power, Quadratic
from asdvar.engine import Term
from asdvar.lagrangian import (asd_residual, basic, combine, conjugate_eval_L, fenchel_young_floor,
                               free_product, from_terms, make_lagrangian, partial_asd_residual, scaled,
                               shift, sub_asd_residual, twisted, antidual, yosida_regularize)

J = np.array([[0.0, 1.0], [-1.0, 0.0]])
half = Quadratic(np.eye(1))
half2 = Quadratic(np.eye(2))


def test_basic_values():
    L = basic(half2)
    assert L([1.0, 0.0], [0.0, 1.0]) == pytest.approx(1.0)
    q = basic(Power(4.0, 1.0, 1))
    # 1/4 + 3/4 and Fenchel-Young equality at p = phi'(1)
    assert q([1.0], [-1.0]) == pytest.approx(1.0)
    assert q([1.0], [-1.0]) + 1.0 * -1.0 == pytest.approx(0.0, abs=1e-14)


def test_basic_exact_conjugate():
    L = basic(half)
    r = conjugate_eval_L(L, [0.7], [-0.2])
    assert r.kind == "exact"
    assert r.value == pytest.approx(0.5 * 0.49 + 0.5 * 0.04)
    assert conjugate_eval_L(L, [0.7], [-0.2], mode="numeric").value == pytest.approx(r.value, abs=1e-9)


def test_basic_self_conjugate_residual():
    assert float(asd_residual(basic(half2))) <= 1e-10


def test_shift_zero_is_identity():
    L = basic(half2)
    S = shift(L, np.zeros((2, 2)))
    rng = np.random.default_rng(0)
    for _ in range(5):
        x, p = rng.standard_normal(2), rng.standard_normal(2)
        assert S(x, p) == pytest.approx(L(x, p))


@pytest.mark.parametrize("side", ["right", "left"])
def test_shift_by_skew_is_asd(side):
    S = shift(basic(half2), J, side)
    assert S.asd_guaranteed
    assert float(asd_residual(S, samples=100)) <= 1e-8


def test_shift_left_singular_rejected():
    with pytest.raises(ValueError):
        shift(basic(half2), np.zeros((2, 2)), "left")


def test_right_shift_exact_matches_numeric():
    S = shift(basic(half2), J)
    q, y = np.array([0.3, -0.4]), np.array([1.0, 0.2])
    ex = conjugate_eval_L(S, q, y)
    assert ex.kind == "exact"
    assert ex.value == pytest.approx(conjugate_eval_L(S, q, y, mode="numeric").value, abs=1e-7)


def test_scaled_value():
    assert scaled(basic(half), 2.0)([2.0], [2.0]) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        scaled(basic(half), 0.0)


def test_sum_of_quadratics_closed_form():
    # phi + psi = x^2 and phi* conv psi* = p^2 / 4
    S = combine("sum", basic(half), basic(half))
    for x, p in [(1.0, 2.0), (-0.5, 0.3), (2.0, -1.0)]:
        assert S([x], [p]) == pytest.approx(x * x + 0.25 * p * p, abs=1e-10)
    assert S.asd_guaranteed


def test_sum_non_basic_flagged():
    L = shift(basic(half2), J)
    S = combine("sum", L, L)
    assert not S.asd_guaranteed


def test_twisted_and_antidual_residuals():
    T = twisted(basic(half), basic(half), [[1.0]])
    assert float(asd_residual(T)) <= 1e-8
    A = antidual(Quadratic(np.diag([1.0, 2.0])), [[1.0]], 1)
    assert float(asd_residual(A, samples=50)) <= 1e-8


def test_free_product_exact_and_residual():
    F = free_product([basic(half), basic(Power(4.0, 1.0, 1))])
    assert F.has_exact_conjugate
    assert float(asd_residual(F, samples=50)) <= 1e-8


def test_wrong_sign_even_phi_is_invisible():
    # phi* even: phi(x) + phi*(+p) coincides with the basic Lagrangian
    L = from_terms(1, [Term(half, [[1.0, 0.0]], None), Term(half.conjugate(), [[0.0, 1.0]], None)])
    assert float(asd_residual(L, samples=20)) <= 1e-12


def test_wrong_sign_detected():
    # phi = 1/2(x-1)^2: L*(p,x) - L(-x,-p) = 2(p - x)
    phi = Quadratic([[1.0]], [-1.0], 0.5)
    L = from_terms(1, [Term(phi, [[1.0, 0.0]], None), Term(phi.conjugate(), [[0.0, 1.0]], None)])
    r = asd_residual(L, samples=20)
    rng = np.random.default_rng(0)
    ref = 0.0
    for _ in range(20):
        x, p = rng.standard_normal(1), rng.standard_normal(1)
        ref = max(ref, abs(2 * (p[0] - x[0])))
    assert float(r) > 0.1
    assert float(r) == pytest.approx(ref, rel=1e-6)


def test_r_antiselfdual():
    # phi(R^{-1}x) + phi*(-p) with R = 2
    phi = half
    L = from_terms(1, [Term(phi, [[0.5, 0.0]], None), Term(phi.conjugate(), [[0.0, -1.0]], None)])
    assert float(asd_residual(L, R=[[2.0]])) <= 1e-8
    assert float(asd_residual(L)) > 1e-3
    with pytest.raises(ValueError):
        asd_residual(L, R=[[0.0]])


def test_yosida_of_indicator_is_finite():
    L = basic(Indicator(Box(0.0, 0.0, 1)))
    lam = 0.5
    Y = yosida_regularize(L, lam)
    # inf_z L(z,p) + M(x-z,p) with z = 0: x^2/(2 lam^2) + lam^2 p^2/2 + 0*(p)
    for x, p in [(1.0, 0.0), (2.0, 1.0), (-3.0, -2.0)]:
        v = Y([x], [p])
        assert np.isfinite(v)
        assert v == pytest.approx(x * x / (2 * lam ** 2) + lam ** 2 * p * p / 2, abs=1e-8)


def test_yosida_limit_and_asd():
    L = basic(Power(4.0, 1.0, 1))
    Y = yosida_regularize(L, 1e-3)
    assert abs(Y([0.8], [-0.3]) - L([0.8], [-0.3])) <= 1e-4
    assert float(asd_residual(yosida_regularize(basic(half), 0.5), samples=30)) <= 1e-6


def test_scaling_commutes_with_convolution():
    L, M = basic(half), basic(Quadratic([[3.0]]))
    lam = 2.0
    rhs = scaled(combine("convolution", L, M), lam)
    lhs = combine("convolution", scaled(L, lam), M)
    for x, p in [(1.0, 0.5), (-0.3, 2.0)]:
        assert lhs([x], [p]) == pytest.approx(rhs([x], [p]), abs=1e-7)
    # with linear parts both operands must scale
    L, M = basic(Quadratic([[1.0]], [1.0])), basic(Power(4.0, 1.0, 1))
    lhs = combine("convolution", scaled(L, lam), scaled(M, lam))
    rhs = scaled(combine("convolution", L, M), lam)
    for x, p in [(1.0, 0.5), (-0.3, 2.0)]:
        assert lhs([x], [p]) == pytest.approx(rhs([x], [p]), abs=1e-7)


def test_convolution_sum_duality():
    L, M = basic(half), basic(Power(4.0, 1.0, 1))
    C = combine("convolution", L, M)
    rng = np.random.default_rng(1)
    for _ in range(10):
        q, y = rng.standard_normal(1), rng.standard_normal(1)
        # (L conv M)*(q,y) = (L* + M*)(q,y) = (L conv M)(-y,-q) for ASD L, M
        assert C.conjugate(q, y, mode="numeric").value == pytest.approx(C(-y, -q), abs=1e-6)


def test_fenchel_young_floor_and_partial():
    L = shift(basic(half2), J)
    assert fenchel_young_floor(L, samples=300) >= -1e-8
    assert float(partial_asd_residual(L, samples=20)) <= 1e-6
    assert float(sub_asd_residual(L, samples=20)) <= 1e-8


def test_config_round_trip():
    L = twisted(basic(half), shift(basic(half), [[0.0]]), [[2.0]])
    R = make_lagrangian(L.config)
    for x, p in [([0.1, 0.2], [0.3, -0.4]), ([1.0, -1.0], [0.0, 2.0])]:
        assert R(x, p) == pytest.approx(L(x, p))
    with pytest.raises(ValueError):
        make_lagrangian({"kind": "basic", "phi": {"kind": "power", "p": 2.0}, "bogus": 1})
