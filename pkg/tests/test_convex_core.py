import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize, minimize_scalar

from asdvar.convex_core import (AbsSum, Ball, Box, Composed, Halfspace, Indicator, NonnegMonotone,
                                NumericConjugate, Power, Quadratic, QuadraticOnSet, Scaled,
                                SeparablePower, SeparableSum, SupportFn, Tilt, Translate, WholeSpace,
                                add, box_qp, conjugate_eval, fenchel_young_gap, make_catalog_fn,
                                make_set, moreau_envelope, prox)

finite = st.floats(-5, 5, allow_nan=False)


# -- conjugates --------------------------------------------------------------


def test_identity_quadratic_self_conjugate():
    phi = Quadratic(np.eye(2))
    p = np.array([0.3, -1.2])
    assert conjugate_eval(phi, p).value == pytest.approx(0.5 * p @ p)
    assert conjugate_eval(phi, [3.0, 4.0]).value == pytest.approx(12.5)


def test_diag_quadratic_exact_and_numeric():
    phi = Quadratic(np.diag([2.0, 4.0]))
    ex = conjugate_eval(phi, [2.0, 4.0], mode="exact")
    num = conjugate_eval(phi, [2.0, 4.0], mode="numeric")
    assert ex.kind == "exact"
    assert ex.value == pytest.approx(3.0, abs=1e-14)
    assert abs(num.value - 3.0) <= 1e-8


def test_box_indicator_conjugate_is_l1():
    phi = Indicator(Box(-1.0, 1.0, 3))
    p = np.array([0.5, -2.0, 1.5])
    assert conjugate_eval(phi, p).value == pytest.approx(4.0)
    assert conjugate_eval(phi, p, mode="numeric").value == pytest.approx(4.0, abs=1e-9)


def test_abs_conjugate_indicator():
    phi = AbsSum(1.0, 1)
    assert conjugate_eval(phi, [0.5]).value == 0.0
    assert conjugate_eval(phi, [2.0]).value == np.inf
    assert conjugate_eval(phi, [2.0], mode="numeric").value == np.inf


def test_exact_mode_refuses_numeric_only():
    f = Composed(Power(4.0, 1.0, 1), [[1.0, 1.0]])
    with pytest.raises(ValueError):
        conjugate_eval(f, [1.0, 1.0], mode="exact")


def test_power_conjugate_closed_form():
    # (1/4|x|^4)* = 3/4 |p|^{4/3}
    phi = Power(4.0, 1.0, 2)
    p = np.array([1.0, 0.0])
    assert conjugate_eval(phi, p).value == pytest.approx(0.75)
    assert conjugate_eval(phi, p, mode="numeric").value == pytest.approx(0.75, rel=1e-9)


def test_power_numeric_against_scipy():
    phi = Power(3.0, 2.0, 1)
    for p in (-2.0, 0.3, 1.7):
        ref = -minimize_scalar(lambda x: phi(np.array([x])) - p * x, bounds=(-10, 10), method="bounded",
                               options={"xatol": 1e-12}).fun
        assert conjugate_eval(phi, [p], mode="numeric").value == pytest.approx(ref, abs=1e-8)


def test_degenerate_quadratic_conjugate():
    phi = Quadratic(np.diag([1.0, 0.0]), [0.0, 1.0])
    assert conjugate_eval(phi, [2.0, 1.0]).value == pytest.approx(2.0)
    assert conjugate_eval(phi, [2.0, 0.5]).value == np.inf


def test_tilt_translate_scaled_exact():
    base = Quadratic(np.diag([1.0, 2.0]))
    p = np.array([0.4, -0.3])
    for f in (Tilt(base, [1.0, -1.0]), Translate(base, [0.5, 2.0]), Scaled(3.0, base, 0.5)):
        assert f.conj_kind == "exact"
        ex = conjugate_eval(f, p).value
        num = conjugate_eval(f, p, mode="numeric").value
        assert ex == pytest.approx(num, abs=1e-8)


def test_separable_sum_conjugate_weighted():
    j = Power(4.0, 1.0, 1)
    f = SeparableSum(j, [1.0, 2.0])
    p = np.array([1.0, 2.0])
    # w j*(p/w) coordinatewise: 0.75 + 2 * 0.75
    assert conjugate_eval(f, p).value == pytest.approx(2.25)
    assert conjugate_eval(f, p, mode="numeric").value == pytest.approx(2.25, rel=1e-9)


def test_quadratic_on_box_conjugate_vs_scipy():
    Q = np.array([[2.0, 0.5], [0.5, 1.0]])
    f = add(Quadratic(Q), Indicator(Box(0.0, 1.0, 2)))
    assert isinstance(f, QuadraticOnSet)
    p = np.array([3.0, -1.0])
    res = minimize(lambda x: 0.5 * x @ Q @ x - p @ x, [0.5, 0.5], bounds=[(0, 1), (0, 1)],
                   method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-12})
    assert conjugate_eval(f, p).value == pytest.approx(-res.fun, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2), st.lists(finite, min_size=2, max_size=2))
def test_fenchel_young_inequality(x, p):
    for phi in (Quadratic(np.diag([1.0, 3.0])), Power(4.0, 1.0, 2), AbsSum(1.0, 2)):
        g = fenchel_young_gap(phi, x, p)
        assert g >= -1e-10


@settings(max_examples=25, deadline=None)
@given(st.lists(finite, min_size=2, max_size=2))
def test_fenchel_young_equality_at_gradient(x):
    phi = Power(4.0, 1.0, 2)
    x = np.array(x)
    assert abs(fenchel_young_gap(phi, x, phi.grad(x))) <= 1e-8 * (1 + phi(x))


# -- prox and envelopes ------------------------------------------------------


def test_prox_examples():
    assert prox(AbsSum(1.0, 1), [3.0], 1.0)[0] == pytest.approx(2.0)
    assert prox(Indicator(Box(0.0, 1.0, 1)), [-0.5], 7.0)[0] == 0.0
    assert prox(Quadratic([[1.0]]), [3.0], 2.0)[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        prox(AbsSum(1.0, 1), [1.0], 0.0)


@settings(max_examples=30, deadline=None)
@given(finite, st.floats(0.05, 5))
def test_power_prox_optimality(x, lam):
    phi = Power(3.0, 1.0, 1)
    z = prox(phi, [x], lam)[0]
    ref = minimize_scalar(lambda u: phi(np.array([u])) + (u - x) ** 2 / (2 * lam), bounds=(-10, 10),
                          method="bounded", options={"xatol": 1e-12}).x
    assert z == pytest.approx(ref, abs=1e-6)


def test_moreau_huber_and_quadratic():
    assert moreau_envelope(AbsSum(1.0, 1), 1.0)(np.array([0.5])) == pytest.approx(0.125)
    assert moreau_envelope(Quadratic([[1.0]]), 1.0)(np.array([2.0])) == pytest.approx(1.0)


def test_moreau_increases_to_phi():
    phi = Power(4.0, 1.0, 1)
    x = np.array([1.3])
    vals = [moreau_envelope(phi, lam)(x) for lam in (1.0, 0.1, 0.01, 0.001)]
    assert all(a <= b + 1e-14 for a, b in zip(vals, vals[1:]))
    assert vals[-1] <= phi(x) and phi(x) - vals[-1] < 1e-2


def test_moreau_identity():
    # prox_{lam f}(x) + lam prox_{f*/lam}(x/lam) = x
    f = AbsSum([1.0, 0.5])
    fc = f.conjugate()
    x = np.array([2.0, -0.2])
    lam = 0.7
    assert np.allclose(f.prox(x, lam) + lam * fc.prox(x / lam, 1.0 / lam), x, atol=1e-14)


def test_sum_prox_scaled_identity_fast_path():
    f = add(Quadratic(2.0 * np.eye(2), [1.0, 0.0]), AbsSum(1.0, 2))
    x = np.array([3.0, -0.5])
    z = f.prox(x, 0.5)
    ref = minimize(lambda u: f(u) + (u - x) @ (u - x) / 1.0, x, method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-14, "maxiter": 20000}).x
    assert np.allclose(z, ref, atol=1e-6)


# -- sets ----------------------------------------------------------------------


def test_set_projections():
    assert np.allclose(Ball([0, 0], 1.0).project([3.0, 4.0]), [0.6, 0.8])
    h = Halfspace([1.0, 1.0], 1.0)
    assert np.allclose(h.project([2.0, 2.0]), [0.5, 0.5])
    y = NonnegMonotone(4).project([3.0, 1.0, 2.0, -1.0])
    assert np.all(np.diff(y) >= -1e-15) and np.all(y >= 0)
    assert np.array_equal(WholeSpace(2).project([1.0, 2.0]), [1.0, 2.0])


def test_box_qp_matches_scipy():
    rng = np.random.default_rng(3)
    B = rng.standard_normal((4, 4))
    Q = B @ B.T + np.eye(4)
    g = rng.standard_normal(4) * 3
    z = box_qp(Q, g, -0.5, 0.5)
    res = minimize(lambda u: 0.5 * u @ Q @ u + g @ u, np.zeros(4), jac=lambda u: Q @ u + g,
                   bounds=[(-0.5, 0.5)] * 4, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-13})
    assert np.allclose(z, res.x, atol=1e-7)


# -- numeric conjugate ---------------------------------------------------------


def test_numeric_conjugate_scratch_cache():
    nc = NumericConjugate(Power(4.0, 1.0, 2))
    s = {}
    a = nc.solve(np.array([1.0, 0.5]), s)
    b = nc.solve(np.array([1.0, 0.5]), s)
    assert a is b


def test_numeric_conjugate_nonattained_sup():
    # Huber* is finite on the closed unit box, and the sup is not attained on its boundary
    hub = moreau_envelope(AbsSum(1.0, 1), 0.5)
    assert conjugate_eval(hub, [1.0], mode="numeric").value == pytest.approx(0.25, abs=1e-9)
    assert conjugate_eval(hub, [1.1], mode="numeric").value == np.inf


# -- config ----------------------------------------------------------------------


def test_catalog_round_trip():
    cfgs = [
        {"kind": "quadratic", "Q": [[2.0, 0.0], [0.0, 1.0]], "b": [1.0, 0.0]},
        {"kind": "power", "p": 3.0, "dim": 2},
        {"kind": "abs", "weights": [1.0, 2.0]},
        {"kind": "indicator", "set": {"kind": "box", "lo": -1.0, "hi": 1.0, "dim": 2}},
        {"kind": "tilt", "fn": {"kind": "power", "p": 4.0, "dim": 2}, "f": [1.0, 1.0]},
    ]
    x = np.array([0.3, -0.4])
    for c in cfgs:
        f = make_catalog_fn(c)
        g = make_catalog_fn(f.to_config())
        assert f(x) == pytest.approx(g(x))


def test_unknown_keys_rejected():
    with pytest.raises(ValueError, match="unknown keys"):
        make_catalog_fn({"kind": "power", "p": 3.0, "colour": "red"})
    with pytest.raises(ValueError):
        make_catalog_fn({"kind": "nonsense"})
    with pytest.raises(ValueError):
        make_set({"kind": "box", "lo": 0, "hi": 1, "extra": 2})


def test_invalid_inputs():
    with pytest.raises(ValueError):
        Quadratic([[-1.0]])
    with pytest.raises(ValueError):
        Power(1.0)
    with pytest.raises(ValueError):
        Box(1.0, 0.0)
    with pytest.raises(ValueError):
        SeparablePower(3.0, [1.0, -1.0])
