import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from clocklmi.polymat import GramForm, PolyMat, gram_eval, gram_realize

finite = st.floats(-3, 3, allow_nan=False, allow_infinity=False)


def example_poly():
    # [[t^2, t], [t, 1]]
    c = np.zeros((3, 2, 2))
    c[0, 1, 1] = 1.0
    c[1, 0, 1] = c[1, 1, 0] = 1.0
    c[2, 0, 0] = 1.0
    return PolyMat(c, symmetric=True)


def test_eval_examples():
    P = example_poly()
    assert np.array_equal(P.eval(0.0), [[0, 0], [0, 1]])
    assert np.array_equal(P.eval(2.0), [[4, 2], [2, 1]])
    assert np.array_equal(PolyMat.identity(3).eval(7.3), np.eye(3))


def test_derivative_examples():
    D = example_poly().derivative()
    assert D.degree == 1 and D.symmetric
    assert np.array_equal(D.eval(1.5), [[3.0, 1.0], [1.0, 0.0]])
    Z = PolyMat.constant(np.array([[1.0, 2.0], [3.0, 4.0]])).derivative()
    assert np.array_equal(Z.eval(0.3), np.zeros((2, 2)))
    c = np.zeros((4, 3, 3))
    c[3] = np.eye(3)
    assert np.allclose(PolyMat(c).derivative().eval(0.5), 0.75 * np.eye(3))


def test_symmetric_flag_is_exact():
    c = np.zeros((2, 2, 2))
    c[1, 0, 1] = 1.0
    with pytest.raises(ValueError):
        PolyMat(c, symmetric=True)


def test_normalized_drops_trailing_zeros():
    c = np.zeros((4, 1, 1))
    c[1] = 2.0
    P = PolyMat(c)
    assert P.degree == 3 and P.normalized().degree == 1
    assert P.normalized().allclose(P)


def test_eval_grid_matches_eval(rng):
    P = PolyMat(rng.standard_normal((5, 3, 2)))
    taus = rng.uniform(-1, 2, 17)
    assert np.allclose(P.eval_grid(taus), np.array([P.eval(t) for t in taus]), rtol=1e-13)


def test_gram_examples():
    assert np.allclose(gram_realize(GramForm(1, 1, np.eye(2))).coeffs.ravel(), [1, 0, 1])
    off = np.array([[0.0, 0.5], [0.5, 0.0]])
    assert np.allclose(gram_realize(GramForm(1, 1, off)).coeffs.ravel(), [0, 1, 0])
    G0 = np.array([[2.0, 1.0], [1.0, 3.0]])
    R = gram_realize(GramForm(0, 2, G0))
    assert R.degree == 0 and np.array_equal(R.eval(5.0), G0)


def test_gram_dimension_mismatch():
    with pytest.raises(ValueError):
        GramForm(1, 2, np.eye(3))


@given(st.integers(0, 6), st.integers(1, 3), st.integers(0, 10_000), finite)
def test_derivative_matches_finite_difference(deg, n, seed, tau):
    P = PolyMat(np.random.default_rng(seed).standard_normal((deg + 1, n, n)))
    h = 1e-5
    fd = (P.eval(tau + h) - P.eval(tau - h)) / (2 * h)
    exact = P.derivative().eval(tau)
    scale = max(1.0, np.abs(exact).max())
    assert np.abs(fd - exact).max() <= 1e-6 * scale


@given(st.integers(0, 3), st.integers(1, 3), st.integers(0, 10_000))
def test_gram_round_trip_psd(m, q, seed):
    rng = np.random.default_rng(seed)
    F = rng.standard_normal((q * (m + 1), q * (m + 1)))
    g = GramForm(m, q, F @ F.T)
    R = gram_realize(g)
    for tau in rng.uniform(-3, 3, 100):
        val = R.eval(tau)
        assert np.allclose(val, gram_eval(g, tau), rtol=1e-12, atol=1e-12 * np.abs(val).max())
        assert np.linalg.eigvalsh(val)[0] >= -1e-10 * max(1.0, np.abs(val).max())


@given(st.integers(0, 10_000), finite, finite)
def test_arithmetic_laws(seed, tau, s):
    rng = np.random.default_rng(seed)
    P, Q, R = (PolyMat(rng.standard_normal((rng.integers(1, 5), 2, 2))) for _ in range(3))
    at = lambda M: M.eval(tau)  # noqa: E731
    assert np.allclose(at(P + Q), at(Q + P), atol=1e-12)
    assert np.allclose(at((P + Q) + R), at(P + (Q + R)), atol=1e-12)
    assert np.allclose(at(P * s), s * at(P), atol=1e-12)
    assert np.allclose(at((P + Q) * s), at(P * s + Q * s), atol=1e-11)


def test_matmul_and_congruence(rng):
    P = PolyMat(rng.standard_normal((3, 2, 3)))
    Q = PolyMat(rng.standard_normal((2, 3, 2)))
    tau = 0.7
    assert np.allclose((P @ Q).eval(tau), P.eval(tau) @ Q.eval(tau))
    S = PolyMat(np.array([np.eye(2), [[0, 1], [1, 0]]]), symmetric=True)
    T = rng.standard_normal((2, 2))
    assert np.allclose(S.congruence(T).eval(tau), T.T @ S.eval(tau) @ T)


@given(arrays(np.float64, (3, 2, 2), elements=finite), st.floats(0.1, 5))
def test_rescaled(c, f):
    P = PolyMat(c)
    assert np.allclose(P.rescaled(f).eval(0.4), P.eval(0.4 * f), atol=1e-9)
