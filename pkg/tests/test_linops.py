import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from asdvar.linops import BoundaryTriplet, LinOp, classify, decompose, make_linop, triplet_residual


def test_decompose_example():
    s, k = decompose([[2.0, 1.0], [-1.0, 2.0]])
    assert np.array_equal(s.A, [[2.0, 0.0], [0.0, 2.0]])
    assert np.array_equal(k.A, [[0.0, 1.0], [-1.0, 0.0]])


def test_decompose_symmetric_has_zero_skew():
    A = np.array([[3.0, 1.0], [1.0, 5.0]])
    s, k = decompose(A)
    assert not np.any(k.A)
    assert np.array_equal(s.A, A)


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
def test_decompose_recombines(A):
    s, k = decompose(A)
    assert np.abs(s.A + k.A - A).max() <= 1e-14
    assert np.allclose(s.A, s.A.T)
    assert np.allclose(k.A, -k.A.T)


def test_decompose_in_metric():
    G = np.diag([1.0, 4.0])
    A = LinOp([[1.0, 2.0], [0.0, 1.0]], metric=G)
    s, k = decompose(A)
    # skew part is antisymmetric in <x, G y>
    M = G @ k.A
    assert np.allclose(M, -M.T)
    assert np.allclose(s.A + k.A, A.A)


@pytest.mark.parametrize("A, pos, c, skew", [
    ([[0.0, 1.0], [-1.0, 0.0]], True, 0.0, True),
    ([[2.0, 1.0], [-1.0, 2.0]], True, 2.0, False),
    ([[-1.0, 0.0], [0.0, 1.0]], False, 0.0, False),
])
def test_classify_examples(A, pos, c, skew):
    r = classify(A)
    assert r.positive is pos
    assert r.coercive_constant == pytest.approx(c)
    assert r.skew is skew


def test_classify_nonsquare_rejected():
    with pytest.raises(ValueError):
        classify(np.ones((2, 3)))


def test_triplet_residual_examples():
    K = np.array([[0.0, 2.0], [-2.0, 0.0]])
    z = LinOp(np.zeros((0, 2)))
    assert triplet_residual(BoundaryTriplet(LinOp(K), z, z)) == 0.0
    # <x,x> + <x,x> with |x| = 1
    assert triplet_residual(BoundaryTriplet(LinOp(np.eye(3)), LinOp(np.zeros((0, 3))),
                                            LinOp(np.zeros((0, 3))))) == pytest.approx(2.0)


def test_triplet_integration_by_parts():
    # forward difference with boundary evaluation: D + D' = e_n e_n' - e_1 e_1'
    D = np.array([[-0.5, 0.5, 0.0], [-0.5, 0.0, 0.5], [0.0, -0.5, 0.5]])
    b1 = LinOp([[1.0, 0.0, 0.0]])
    b2 = LinOp([[0.0, 0.0, 1.0]])
    assert triplet_residual(BoundaryTriplet(LinOp(D), b1, b2)) <= 1e-15


def test_linop_algebra_and_adjoint():
    G = np.diag([2.0, 1.0])
    A = LinOp([[1.0, 2.0], [3.0, 4.0]], metric=G)
    x, y = np.array([1.0, -1.0]), np.array([0.5, 2.0])
    assert A.inner_out(A(x), y) == pytest.approx(A.inner_in(x, A.adjoint()(y)))
    B = (A + A) * 0.5 - A
    assert not np.any(B.A)
    assert np.allclose((A.inv() @ (A @ x)), x)


def test_make_linop_config():
    op = make_linop({"entries": [[1.0, 0.0], [0.0, 2.0]]})
    assert np.array_equal(op.A, [[1.0, 0.0], [0.0, 2.0]])
    assert np.array_equal(make_linop(op.to_config()).A, op.A)
