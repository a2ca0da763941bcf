import numpy as np
import pytest

from clocklmi import _pykernels, kernels


def compiled():
    try:
        from clocklmi import _ckernels
    except ImportError:
        pytest.skip("compiled kernels not built")
    return _ckernels


def test_backend_name():
    assert kernels.BACKEND in ("cython", "python")


def test_horner_matches_fallback(rng):
    ck = compiled()
    c = rng.standard_normal((6, 9))
    t = rng.uniform(-2, 2, 50)
    assert np.allclose(ck.horner_grid(c, t), _pykernels.horner_grid(c, t), rtol=1e-14, atol=1e-14)


def test_rk4_matches_fallback(rng):
    ck = compiled()
    half = rng.standard_normal((41, 3, 3))
    x0 = rng.standard_normal(3)
    a, b = np.empty((21, 3)), np.empty((21, 3))
    ck.rk4_steps(half, x0, 20, 0.01, a)
    _pykernels.rk4_steps(half, x0, 20, 0.01, b)
    assert np.allclose(a, b, rtol=1e-13, atol=1e-14)
    s1 = ck.rk4_step(half[0], half[1], half[2], x0, 0.01)
    s2 = _pykernels.rk4_step(half[0], half[1], half[2], x0, 0.01)
    assert np.allclose(s1, s2, rtol=1e-14)
