"""Univariate polynomial matrices in the clock variable.

A :class:`PolyMat` stores dense coefficient matrices ``C_0 .. C_d`` in the
monomial basis and represents ``P(tau) = sum_k C_k tau**k``.  Values are
immutable; every operation returns a new object.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels

__all__ = ["PolyMat", "GramForm", "gram_realize", "gram_eval", "monomials"]


def monomials(tau: float, degree: int) -> np.ndarray:
    """Return ``(1, tau, ..., tau**degree)``."""
    return np.power(float(tau), np.arange(degree + 1))


class PolyMat:
    """Polynomial matrix ``P(tau) = sum_k coeffs[k] * tau**k``.

    ``coeffs`` has shape ``(d + 1, rows, cols)``.  Trailing zero coefficients
    are kept until :meth:`normalized` is called.
    """

    __slots__ = ("_c", "_sym")

    def __init__(self, coeffs, symmetric: bool = False):
        c = np.array(coeffs, dtype=float)
        if c.ndim == 2:
            c = c[None]
        if c.ndim != 3 or c.shape[0] == 0:
            raise ValueError(f"coefficients must have shape (d+1, rows, cols), got {c.shape}")
        if symmetric:
            if c.shape[1] != c.shape[2]:
                raise ValueError("symmetric PolyMat must be square")
            if not np.array_equal(c, np.swapaxes(c, 1, 2)):
                raise ValueError("coefficients are not symmetric")
        c.setflags(write=False)
        self._c = c
        self._sym = bool(symmetric)

    # construction ---------------------------------------------------------
    @classmethod
    def constant(cls, mat, symmetric: bool | None = None) -> "PolyMat":
        m = np.atleast_2d(np.asarray(mat, dtype=float))
        if symmetric is None:
            symmetric = m.shape[0] == m.shape[1] and np.array_equal(m, m.T)
        return cls(m[None], symmetric=symmetric)

    @classmethod
    def zeros(cls, rows: int, cols: int, degree: int = 0) -> "PolyMat":
        return cls(np.zeros((degree + 1, rows, cols)), symmetric=rows == cols)

    @classmethod
    def identity(cls, n: int) -> "PolyMat":
        return cls(np.eye(n)[None], symmetric=True)

    @classmethod
    def from_scalar_coeffs(cls, coeffs: Sequence[float]) -> "PolyMat":
        """1x1 polynomial from ascending scalar coefficients."""
        return cls(np.asarray(coeffs, dtype=float).reshape(-1, 1, 1), symmetric=True)

    # properties -----------------------------------------------------------
    @property
    def coeffs(self) -> np.ndarray:
        return self._c

    @property
    def degree(self) -> int:
        return self._c.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self._c.shape[1], self._c.shape[2]

    @property
    def rows(self) -> int:
        return self._c.shape[1]

    @property
    def cols(self) -> int:
        return self._c.shape[2]

    @property
    def symmetric(self) -> bool:
        return self._sym

    def __repr__(self) -> str:
        return f"PolyMat(shape={self.shape}, degree={self.degree}, symmetric={self._sym})"

    # evaluation -----------------------------------------------------------
    def __call__(self, tau: float) -> np.ndarray:
        return self.eval(tau)

    def eval(self, tau: float) -> np.ndarray:
        """Horner evaluation at a single clock value."""
        tau = float(tau)
        if not np.isfinite(tau):
            raise ValueError("tau must be finite")
        c = self._c
        out = c[-1].copy()
        for k in range(c.shape[0] - 2, -1, -1):
            out *= tau
            out += c[k]
        return out

    def eval_grid(self, taus: Iterable[float]) -> np.ndarray:
        """Evaluate on many clock values; returns shape ``(len(taus), rows, cols)``."""
        t = np.ascontiguousarray(np.asarray(list(taus) if not isinstance(taus, np.ndarray) else taus,
                                            dtype=float).ravel())
        r, s = self.shape
        flat = np.ascontiguousarray(self._c.reshape(self._c.shape[0], r * s))
        return kernels.horner_grid(flat, t).reshape(t.size, r, s)

    # calculus and algebra -------------------------------------------------
    def derivative(self) -> "PolyMat":
        c = self._c
        if c.shape[0] == 1:
            return PolyMat(np.zeros_like(c), symmetric=self._sym)
        k = np.arange(1, c.shape[0], dtype=float)
        return PolyMat(c[1:] * k[:, None, None], symmetric=self._sym)

    def normalized(self) -> "PolyMat":
        """Drop trailing all-zero coefficients (keeps at least degree 0)."""
        c = self._c
        d = c.shape[0]
        while d > 1 and not np.any(c[d - 1]):
            d -= 1
        return PolyMat(c[:d], symmetric=self._sym)

    def padded(self, degree: int) -> "PolyMat":
        if degree < self.degree:
            raise ValueError("cannot pad to a lower degree")
        c = np.zeros((degree + 1,) + self.shape)
        c[: self._c.shape[0]] = self._c
        return PolyMat(c, symmetric=self._sym)

    @property
    def T(self) -> "PolyMat":
        return PolyMat(np.swapaxes(self._c, 1, 2), symmetric=self._sym)

    def rescaled(self, factor: float) -> "PolyMat":
        """Return ``Q(s) = P(factor * s)``."""
        scale = float(factor) ** np.arange(self._c.shape[0])
        return PolyMat(self._c * scale[:, None, None], symmetric=self._sym)

    def _coerce(self, other) -> "PolyMat":
        if isinstance(other, PolyMat):
            return other
        return PolyMat.constant(other)

    def __add__(self, other) -> "PolyMat":
        o = self._coerce(other)
        if o.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {o.shape}")
        d = max(self.degree, o.degree)
        c = np.zeros((d + 1,) + self.shape)
        c[: self.degree + 1] += self._c
        c[: o.degree + 1] += o._c
        return PolyMat(c, symmetric=self._sym and o._sym)

    __radd__ = __add__

    def __neg__(self) -> "PolyMat":
        return PolyMat(-self._c, symmetric=self._sym)

    def __sub__(self, other) -> "PolyMat":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "PolyMat":
        return self._coerce(other) - self

    def __mul__(self, scalar) -> "PolyMat":
        if isinstance(scalar, PolyMat) or np.ndim(scalar) != 0:
            return NotImplemented
        return PolyMat(self._c * float(scalar), symmetric=self._sym)

    __rmul__ = __mul__

    def __matmul__(self, other) -> "PolyMat":
        if isinstance(other, PolyMat):
            da, db = self.degree, other.degree
            c = np.zeros((da + db + 1, self.rows, other.cols))
            for i in range(da + 1):
                for j in range(db + 1):
                    c[i + j] += self._c[i] @ other._c[j]
            return PolyMat(c)
        m = np.atleast_2d(np.asarray(other, dtype=float))
        return PolyMat(self._c @ m)

    def __rmatmul__(self, other) -> "PolyMat":
        m = np.atleast_2d(np.asarray(other, dtype=float))
        return PolyMat(m @ self._c)

    def congruence(self, T) -> "PolyMat":
        """``T.T @ P @ T`` keeping the symmetric flag exact."""
        T = np.atleast_2d(np.asarray(T, dtype=float))
        c = np.swapaxes(T, 0, 1) @ self._c @ T
        if self._sym:
            c = 0.5 * (c + np.swapaxes(c, 1, 2))
        return PolyMat(c, symmetric=self._sym)

    def block(self, rows: slice, cols: slice) -> "PolyMat":
        sub = self._c[:, rows, cols]
        sym = self._sym and rows == cols
        return PolyMat(sub, symmetric=sym)

    def allclose(self, other: "PolyMat", atol: float = 1e-12) -> bool:
        d = max(self.degree, other.degree)
        return self.shape == other.shape and np.allclose(
            self.padded(d)._c, other.padded(d)._c, atol=atol, rtol=0.0)


@dataclass(frozen=True)
class GramForm:
    """``S(tau) = (z_m(tau) kron I_q)^T gram (z_m(tau) kron I_q)``."""

    m: int
    q: int
    gram: np.ndarray

    def __post_init__(self):
        g = np.asarray(self.gram, dtype=float)
        n = self.q * (self.m + 1)
        if g.shape != (n, n):
            raise ValueError(f"gram must be {n}x{n} for q={self.q}, m={self.m}; got {g.shape}")
        if not np.allclose(g, g.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(g).max())):
            raise ValueError("gram must be symmetric")
        object.__setattr__(self, "gram", 0.5 * (g + g.T))


def gram_realize(g: GramForm) -> PolyMat:
    """Expand a Gram form into its symmetric polynomial matrix of degree ``2m``."""
    q, m = g.q, g.m
    blocks = g.gram.reshape(m + 1, q, m + 1, q).transpose(0, 2, 1, 3)
    c = np.zeros((2 * m + 1, q, q))
    for i in range(m + 1):
        for j in range(m + 1):
            c[i + j] += blocks[i, j]
    c = 0.5 * (c + np.swapaxes(c, 1, 2))
    return PolyMat(c, symmetric=True)


def gram_eval(g: GramForm, tau: float) -> np.ndarray:
    """Evaluate the quadratic form directly (independent of :func:`gram_realize`)."""
    z = np.kron(monomials(tau, g.m)[:, None], np.eye(g.q))
    return z.T @ g.gram @ z
