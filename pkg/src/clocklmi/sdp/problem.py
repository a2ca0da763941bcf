"""Block-diagonal LMI feasibility problems ``F0 + sum_i y_i F_i >= 0``."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class Status(str, enum.Enum):
    FEASIBLE = "Feasible"
    INFEASIBLE = "Infeasible"
    MAX_ITERATIONS = "MaxIterations"
    NUMERICAL_FAILURE = "NumericalFailure"

    def __str__(self) -> str:
        return self.value


class Block:
    """One affine symmetric block ``F0 + sum_i y_i F_i``.

    Variable coefficients are stored as upper-triangular triplets
    ``(var, row, col, value)`` with ``row <= col``; the lower triangle is
    implied by symmetry.  A ``diagonal`` block only carries diagonal entries
    and is treated as a vector of scalar inequalities.
    """

    def __init__(self, size: int, F0=None, var=(), row=(), col=(), val=(), diagonal: bool = False):
        self.size = int(size)
        self.diagonal = bool(diagonal)
        if F0 is None:
            F0 = np.zeros((self.size, self.size))
        F0 = np.asarray(F0, dtype=float)
        if diagonal and F0.ndim == 1:
            F0 = np.diag(F0)
        if F0.shape != (self.size, self.size):
            raise ValueError(f"F0 must be {self.size}x{self.size}")
        if not np.allclose(F0, F0.T, rtol=0, atol=0):
            raise ValueError("F0 must be symmetric")
        self.F0 = F0
        var = np.asarray(var, dtype=np.int64)
        row = np.asarray(row, dtype=np.int64)
        col = np.asarray(col, dtype=np.int64)
        val = np.asarray(val, dtype=float)
        swap = row > col
        row, col = np.where(swap, col, row), np.where(swap, row, col)
        if diagonal and np.any(row != col):
            raise ValueError("diagonal block with off-diagonal coefficient")
        keep = val != 0.0
        self.var, self.row, self.col, self.val = var[keep], row[keep], col[keep], val[keep]
        if self.var.size and (self.row.max() >= self.size or self.col.max() >= self.size):
            raise ValueError("coefficient index out of range")

    def __repr__(self) -> str:
        kind = "diag" if self.diagonal else "psd"
        return f"Block({kind}, size={self.size}, nnz={self.val.size})"

    def variables(self) -> np.ndarray:
        return np.unique(self.var)

    def coefficient_matrix(self, nvars: int) -> sp.csr_matrix:
        """Sparse ``(nvars, size*size)`` matrix whose rows are ``vec(F_i)`` (both triangles)."""
        k = self.size
        off = self.row != self.col
        rows = np.concatenate([self.var, self.var[off]])
        cols = np.concatenate([self.row * k + self.col, self.col[off] * k + self.row[off]])
        vals = np.concatenate([self.val, self.val[off]])
        return sp.csr_matrix((vals, (rows, cols)), shape=(nvars, k * k))

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        """Return ``F0 + sum_i y_i F_i`` as a dense symmetric matrix."""
        out = self.F0.copy()
        if self.val.size:
            w = self.val * np.asarray(y, dtype=float)[self.var]
            np.add.at(out, (self.row, self.col), w)
            off = self.row != self.col
            np.add.at(out, (self.col[off], self.row[off]), w[off])
        return out

    def coefficient(self, i: int) -> np.ndarray:
        """Dense ``F_i`` (mostly for tests and export)."""
        out = np.zeros((self.size, self.size))
        sel = self.var == i
        out[self.row[sel], self.col[sel]] += self.val[sel]
        off = sel & (self.row != self.col)
        out[self.col[off], self.row[off]] += self.val[off]
        return out

    def same_data(self, other: "Block", nvars: int) -> bool:
        if self.size != other.size or self.diagonal != other.diagonal:
            return False
        if not np.array_equal(self.F0, other.F0):
            return False
        a = self.coefficient_matrix(nvars)
        b = other.coefficient_matrix(nvars)
        return (a != b).nnz == 0


@dataclass
class SdpProblem:
    nvars: int
    blocks: list[Block]
    objective: np.ndarray | None = None
    names: Sequence[str] | None = None  # optional per-block labels
    # optional hint: disjoint variable sets, each confined to its own blocks
    groups: Sequence[np.ndarray] | None = None

    def __post_init__(self):
        if self.objective is None:
            self.objective = np.zeros(self.nvars)
        self.objective = np.asarray(self.objective, dtype=float)
        if self.objective.shape != (self.nvars,):
            raise ValueError("objective length must equal nvars")
        for b in self.blocks:
            if b.var.size and (b.var.min() < 0 or b.var.max() >= self.nvars):
                raise ValueError("block references a variable outside 0..nvars-1")

    @property
    def total_size(self) -> int:
        return sum(b.size for b in self.blocks)

    @property
    def is_feasibility(self) -> bool:
        return not np.any(self.objective)

    def block_values(self, y) -> list[np.ndarray]:
        return [b.evaluate(y) for b in self.blocks]


@dataclass
class SolverOptions:
    feas_tol: float = 1e-8
    gap_tol: float = 1e-9
    max_iter: int = 200
    size_cap: int = 2000
    # bounds that keep the margin-maximization problem compact
    margin_cap: float = 1.0
    var_bound: float = 1e4
    cond_limit: float = 1e14
    early_exit: bool = True
    step_fraction: float = 0.98
    backend: str = "ipm"  # "ipm" (bundled) or "cvxopt"
    verbose: bool = False


@dataclass
class SdpSolution:
    y: np.ndarray
    status: Status
    residuals: list[float]
    iterations: int
    margin: float = float("nan")
    dual: list[np.ndarray] = field(default_factory=list)
    dual_residual: float = float("nan")
    message: str = ""

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


@dataclass
class ResidualReport:
    margins: list[float]
    names: list[str]

    @property
    def min_margin(self) -> float:
        return min(self.margins) if self.margins else float("inf")

    def worst(self) -> str:
        i = int(np.argmin(self.margins))
        return self.names[i]


def block_min_eig(mat: np.ndarray, diagonal: bool = False) -> float:
    if diagonal:
        return float(np.min(np.diag(mat)))
    return float(np.linalg.eigvalsh(0.5 * (mat + mat.T))[0])


def check_residuals(p: SdpProblem, s: SdpSolution | np.ndarray) -> ResidualReport:
    """Recompute per-block minimum eigenvalues at ``s.y`` with plain numpy."""
    y = np.asarray(s.y if isinstance(s, SdpSolution) else s, dtype=float)
    if y.shape != (p.nvars,):
        raise ValueError(f"y has length {y.size}, problem has {p.nvars} variables")
    margins = []
    for b in p.blocks:
        # dense rebuild from coefficients, independent of Block.evaluate
        m = b.F0.copy()
        for i in b.variables():
            m += y[i] * b.coefficient(int(i))
        margins.append(block_min_eig(m, b.diagonal))
    names = list(p.names) if p.names is not None else [f"block{j}" for j in range(len(p.blocks))]
    return ResidualReport(margins, names)
