"""Pure-Python/numpy versions of the hot loops in :mod:`clocklmi._ckernels`.

Signatures and results match the compiled module exactly (up to floating
point summation order).
"""
import numpy as np


def horner_grid(coeffs, taus):
    """Evaluate ``sum_k coeffs[k] * t**k`` for every ``t`` in ``taus``.

    ``coeffs`` has shape ``(d + 1, m)``; the result has shape ``(len(taus), m)``.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    taus = np.asarray(taus, dtype=float)
    out = np.repeat(coeffs[-1][None, :], taus.size, axis=0)
    for k in range(coeffs.shape[0] - 2, -1, -1):
        out *= taus[:, None]
        out += coeffs[k]
    return out


def rk4_steps(half_grid, x0, nsteps, h, out):
    """Classical RK4 for ``x' = A(tau) x`` with ``A`` tabulated on a half-step grid.

    ``half_grid[j]`` is ``A(j * h / 2)``; step ``i`` uses entries ``2i``,
    ``2i + 1`` and ``2i + 2``.  ``out[0]`` receives ``x0`` and ``out[i]`` the
    state after ``i`` steps.
    """
    x = np.array(x0, dtype=float)
    out[0] = x
    for i in range(nsteps):
        a0 = half_grid[2 * i]
        am = half_grid[2 * i + 1]
        a1 = half_grid[2 * i + 2]
        k1 = a0 @ x
        k2 = am @ (x + 0.5 * h * k1)
        k3 = am @ (x + 0.5 * h * k2)
        k4 = a1 @ (x + h * k3)
        x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        out[i + 1] = x
    return out


def rk4_step(a0, am, a1, x, h):
    k1 = a0 @ x
    k2 = am @ (x + 0.5 * h * k1)
    k3 = am @ (x + 0.5 * h * k2)
    k4 = a1 @ (x + h * k3)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
