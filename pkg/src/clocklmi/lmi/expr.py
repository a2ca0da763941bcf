"""Polynomial matrices whose coefficients are affine in decision variables.

An :class:`AffPoly` holds a dense tensor ``T`` of shape
``(degree + 1, rows, cols, 1 + nvars)``; slice ``[..., 0]`` is the constant
part and ``[..., 1 + i]`` the coefficient of decision variable ``i``.  The
polynomial variable is the normalized clock ``s = tau / t_max``.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from ..polymat import PolyMat


class AffPoly:
    __slots__ = ("T",)
    # make ``ndarray @ AffPoly`` and ``ndarray + AffPoly`` defer to this class
    __array_ufunc__ = None

    def __init__(self, T: np.ndarray):
        if T.ndim != 4:
            raise ValueError("AffPoly tensor must be 4-d")
        self.T = T

    # construction ---------------------------------------------------------
    @classmethod
    def const(cls, mat, nvars: int = 0) -> "AffPoly":
        if isinstance(mat, PolyMat):
            c = mat.coeffs
        else:
            c = np.atleast_2d(np.asarray(mat, dtype=float))[None]
        T = np.zeros(c.shape + (nvars + 1,))
        T[..., 0] = c
        return cls(T)

    @classmethod
    def zeros(cls, rows: int, cols: int, nvars: int = 0) -> "AffPoly":
        return cls(np.zeros((1, rows, cols, nvars + 1)))

    # shape ------------------------------------------------------------------
    @property
    def degree(self) -> int:
        return self.T.shape[0] - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.T.shape[1], self.T.shape[2]

    @property
    def width(self) -> int:
        return self.T.shape[3]

    def __repr__(self) -> str:
        return f"AffPoly(shape={self.shape}, degree={self.degree}, nvars={self.width - 1})"

    # helpers ------------------------------------------------------------------
    def _grow(self, degree: int, width: int) -> np.ndarray:
        T = self.T
        if T.shape[0] == degree + 1 and T.shape[3] == width:
            return T
        out = np.zeros((degree + 1,) + T.shape[1:3] + (width,))
        out[: T.shape[0], :, :, : T.shape[3]] = T
        return out

    @staticmethod
    def _as_aff(x) -> "AffPoly":
        if isinstance(x, AffPoly):
            return x
        return AffPoly.const(x)

    # algebra ------------------------------------------------------------------
    def __add__(self, other) -> "AffPoly":
        o = self._as_aff(other)
        if o.shape != self.shape:
            raise ValueError(f"shape mismatch {self.shape} vs {o.shape}")
        d = max(self.degree, o.degree)
        w = max(self.width, o.width)
        return AffPoly(self._grow(d, w) + o._grow(d, w))

    __radd__ = __add__

    def __neg__(self) -> "AffPoly":
        return AffPoly(-self.T)

    def __sub__(self, other) -> "AffPoly":
        return self + (-self._as_aff(other))

    def __rsub__(self, other) -> "AffPoly":
        return self._as_aff(other) - self

    def __mul__(self, scalar) -> "AffPoly":
        if np.ndim(scalar) != 0:
            return NotImplemented
        return AffPoly(self.T * float(scalar))

    __rmul__ = __mul__

    def __matmul__(self, mat) -> "AffPoly":
        m = np.atleast_2d(np.asarray(mat, dtype=float))
        return AffPoly(np.einsum("krcv,cs->krsv", self.T, m, optimize=True))

    def __rmatmul__(self, mat) -> "AffPoly":
        m = np.atleast_2d(np.asarray(mat, dtype=float))
        return AffPoly(np.einsum("sr,krcv->kscv", m, self.T, optimize=True))

    def times_poly(self, P: PolyMat) -> "AffPoly":
        """``self @ P`` for a numeric polynomial matrix ``P`` (same clock variable)."""
        c = P.coeffs
        out = np.zeros((self.T.shape[0] + c.shape[0] - 1, self.shape[0], c.shape[2], self.width))
        for j in range(c.shape[0]):
            out[j: j + self.T.shape[0]] += np.einsum("krcv,cs->krsv", self.T, c[j], optimize=True)
        return AffPoly(out)

    def poly_times(self, P: PolyMat) -> "AffPoly":
        """``P @ self`` for a numeric polynomial matrix ``P``."""
        c = P.coeffs
        out = np.zeros((self.T.shape[0] + c.shape[0] - 1, c.shape[1], self.shape[1], self.width))
        for j in range(c.shape[0]):
            out[j: j + self.T.shape[0]] += np.einsum("sr,krcv->kscv", c[j], self.T, optimize=True)
        return AffPoly(out)

    @property
    def t(self) -> "AffPoly":
        return AffPoly(np.swapaxes(self.T, 1, 2))

    def sym(self) -> "AffPoly":
        """``P + P^T``."""
        return AffPoly(self.T + np.swapaxes(self.T, 1, 2))

    def derivative(self, scale: float = 1.0) -> "AffPoly":
        """Derivative in ``s`` times ``scale`` (``scale = 1/t_max`` gives d/dtau)."""
        if self.degree == 0:
            return AffPoly(np.zeros_like(self.T))
        k = np.arange(1, self.T.shape[0], dtype=float) * scale
        return AffPoly(self.T[1:] * k[:, None, None, None])

    def at_zero(self) -> "AffPoly":
        return AffPoly(self.T[:1].copy())

    def poly_mul(self, coeffs: Sequence[float]) -> "AffPoly":
        """Multiply by a scalar polynomial with ascending coefficients."""
        c = np.asarray(coeffs, dtype=float)
        out = np.zeros((self.T.shape[0] + c.size - 1,) + self.T.shape[1:])
        for i, ci in enumerate(c):
            out[i: i + self.T.shape[0]] += ci * self.T
        return AffPoly(out)

    def is_symmetric(self, tol: float = 0.0) -> bool:
        return self.shape[0] == self.shape[1] and np.allclose(
            self.T, np.swapaxes(self.T, 1, 2), rtol=0, atol=tol)

    def block(self, rows: slice, cols: slice) -> "AffPoly":
        return AffPoly(self.T[:, rows, cols, :].copy())

    # evaluation -----------------------------------------------------------------
    def coeffs_at(self, y: np.ndarray) -> np.ndarray:
        """Numeric coefficients ``(degree + 1, rows, cols)`` at decision vector ``y``."""
        w = self.width
        yy = np.zeros(w)
        yy[0] = 1.0
        n = min(w - 1, len(y))
        yy[1: 1 + n] = np.asarray(y, dtype=float)[:n]
        return self.T @ yy

    def value(self, y: np.ndarray, symmetric: bool | None = None) -> PolyMat:
        c = self.coeffs_at(y)
        if symmetric is None:
            symmetric = self.is_symmetric()
        if symmetric:
            c = 0.5 * (c + np.swapaxes(c, 1, 2))
        return PolyMat(c, symmetric=symmetric)


def bmat(rows: Sequence[Sequence[object]]) -> AffPoly:
    """Block matrix from AffPoly / ndarray / None (zero) entries.

    Block sizes are inferred per block-row and block-column; every row and
    column needs at least one sized entry.
    """
    nr, nc = len(rows), len(rows[0])
    heights = [None] * nr
    widths = [None] * nc
    deg, width = 0, 1
    items = [[None] * nc for _ in range(nr)]
    for i, row in enumerate(rows):
        if len(row) != nc:
            raise ValueError("ragged block matrix")
        for j, x in enumerate(row):
            if x is None:
                continue
            a = AffPoly._as_aff(x)
            items[i][j] = a
            h, w = a.shape
            if heights[i] is None:
                heights[i] = h
            elif heights[i] != h:
                raise ValueError(f"block row {i} height mismatch")
            if widths[j] is None:
                widths[j] = w
            elif widths[j] != w:
                raise ValueError(f"block column {j} width mismatch")
            deg = max(deg, a.degree)
            width = max(width, a.width)
    if None in heights or None in widths:
        raise ValueError("cannot infer block sizes")
    ro = np.concatenate([[0], np.cumsum(heights)])
    co = np.concatenate([[0], np.cumsum(widths)])
    T = np.zeros((deg + 1, ro[-1], co[-1], width))
    for i in range(nr):
        for j in range(nc):
            a = items[i][j]
            if a is not None:
                T[: a.degree + 1, ro[i]:ro[i + 1], co[j]:co[j + 1], : a.width] = a.T
    return AffPoly(T)


class Program:
    """Allocator of decision variables shared by a set of clock constraints."""

    def __init__(self):
        self.nvars = 0
        self.labels: list[str] = []

    def _alloc(self, count: int, label: str) -> int:
        start = self.nvars
        self.nvars += count
        self.labels.extend([label] * count)
        return start

    def poly(self, rows: int, cols: int, degree: int, symmetric: bool = False,
             label: str = "") -> AffPoly:
        """Fresh polynomial matrix variable of the given degree."""
        if symmetric and rows != cols:
            raise ValueError("symmetric variable must be square")
        if symmetric:
            iu, ju = np.triu_indices(rows)
        else:
            iu, ju = np.divmod(np.arange(rows * cols), cols)
        per = iu.size
        start = self._alloc(per * (degree + 1), label)
        T = np.zeros((degree + 1, rows, cols, self.nvars + 1))
        for k in range(degree + 1):
            v = 1 + start + k * per + np.arange(per)
            T[k, iu, ju, v] = 1.0
            if symmetric:
                T[k, ju, iu, v] = 1.0
        return AffPoly(T)

    def matrix(self, rows: int, cols: int, symmetric: bool = False, label: str = "") -> AffPoly:
        return self.poly(rows, cols, 0, symmetric, label)

    def scalar(self, label: str = "") -> AffPoly:
        return self.poly(1, 1, 0, False, label)
