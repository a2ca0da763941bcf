"""Matrix sum-of-squares certificates for polynomial matrix inequalities on intervals.

``F(s) <= -eps I`` on ``[a, b]`` is replaced by the polynomial identity

    -F(s) - eps I = S0(s) + (s - a)(b - s) S1(s)

with Gram-parameterized ``S0``, ``S1``.  Each coefficient equation has a
private "pivot" Gram entry of ``S0``; pivots are solved for and substituted,
so the resulting LMI blocks contain only free Gram entries and the original
decision variables.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..polymat import GramForm
from ..sdp import Block, SdpProblem
from .expr import AffPoly, Program


@dataclass
class ClockConstraint:
    """``expr(s) <= -eps I`` for all normalized clock values ``s`` in ``interval``."""

    expr: AffPoly
    interval: tuple[float, float]
    eps: float
    name: str = ""

    def __post_init__(self):
        a, b = self.interval
        if not a < b:
            raise ValueError(f"empty interval {self.interval}")
        if a < 0:
            raise ValueError("interval must lie in [0, inf)")
        if not self.expr.is_symmetric(tol=1e-12):
            raise ValueError(f"constraint {self.name!r} is not symmetric")


@dataclass
class Relaxation:
    blocks: list[Block]
    names: list[str]
    nnew: int
    # bookkeeping to rebuild the Gram matrices from a solution
    gram_sizes: tuple[int, int] = (0, 0)
    degrees: tuple[int, int] = (0, 0)
    q: int = 0
    offset: int = 0
    _pivot_map: dict = field(default_factory=dict, repr=False)

    def grams(self, y: np.ndarray) -> tuple[GramForm, GramForm]:
        (b0, b1), (m0, m1) = self.blocks, self.degrees
        return (GramForm(m0, self.q, b0.evaluate(y)), GramForm(m1, self.q, b1.evaluate(y)))


def sos_degrees(expr_degree: int, mult_degree: int) -> tuple[int, int]:
    """Half-degrees ``(m0, m1)`` of the Gram bases of ``S0`` and ``S1``.

    ``mult_degree`` is a floor: the multiplier is raised to ``deg S0 - 2`` so
    that ``g S1`` can cancel the leading coefficient of ``S0``.  Without this a
    leading coefficient that must vanish pins a Gram diagonal at zero and no
    strictly feasible point exists.
    """
    if mult_degree < 0 or mult_degree % 2:
        raise ValueError("multiplier degree must be even and non-negative")
    top = max(expr_degree, mult_degree + 2)
    top += top % 2
    return top // 2, max(mult_degree // 2, top // 2 - 1)


def _upper_index(N: int) -> np.ndarray:
    idx = np.full((N, N), -1, dtype=np.int64)
    iu, ju = np.triu_indices(N)
    idx[iu, ju] = np.arange(iu.size)
    idx[ju, iu] = idx[iu, ju]
    return idx


def _coefficient_map(q: int, m: int, shift_poly: np.ndarray, D: int) -> sp.csr_matrix:
    """Sparse map from upper Gram entries to coefficient equations ``(k, a<=b)``.

    ``shift_poly`` multiplies the Gram polynomial (``[1]`` for S0, ``g`` for S1).
    """
    N = q * (m + 1)
    up = _upper_index(N)
    x, yy = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    x, yy = x.ravel(), yy.ravel()
    a, b = x % q, yy % q
    keep = a <= b
    x, yy, a, b = x[keep], yy[keep], a[keep], b[keep]
    deg = x // q + yy // q
    pair = _pair_index(q)[a, b]
    P = q * (q + 1) // 2
    rows, cols, vals = [], [], []
    for shift, coef in enumerate(shift_poly):
        if coef == 0.0:
            continue
        k = deg + shift
        ok = k <= D
        rows.append(k[ok] * P + pair[ok])
        cols.append(up[x[ok], yy[ok]])
        vals.append(np.full(ok.sum(), float(coef)))
    n_up = N * (N + 1) // 2
    return sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=((D + 1) * P, n_up))


def _pair_index(q: int) -> np.ndarray:
    idx = np.full((q, q), -1, dtype=np.int64)
    iu, ju = np.triu_indices(q)
    idx[iu, ju] = np.arange(iu.size)
    return idx


def relax_interval_negativity(c: ClockConstraint, mult_degree: int, nvars: int,
                              offset: int | None = None) -> Relaxation:
    """Compile one clock constraint into two Gram blocks.

    ``nvars`` is the number of decision variables the expression may use;
    new Gram variables are numbered from ``offset`` (default ``nvars``).
    """
    offset = nvars if offset is None else offset
    F = c.expr
    q = F.shape[0]
    m0, m1 = sos_degrees(F.degree, mult_degree)
    D = 2 * m0
    lo, hi = c.interval
    g = np.array([-lo * hi, lo + hi, -1.0])
    A0 = _coefficient_map(q, m0, np.array([1.0]), D)
    A1 = _coefficient_map(q, m1, g, D)
    P = q * (q + 1) // 2
    E = (D + 1) * P
    N0, N1 = q * (m0 + 1), q * (m1 + 1)
    up0 = _upper_index(N0)

    # right-hand side -F_k[a, b] - eps*delta, affine in decision variables
    T = np.zeros((D + 1, q, q, nvars + 1))
    T[: F.degree + 1, :, :, : F.width] = F.T
    iu, ju = np.triu_indices(q)
    rhs = -T[:, iu, ju, :].reshape(E, nvars + 1)
    diag_pairs = np.flatnonzero(iu == ju)
    rhs[diag_pairs, 0] -= c.eps

    # pivots: entry (i q + a, j q + b) with i = k // 2, j = k - i
    k_of = np.repeat(np.arange(D + 1), P)
    a_of = np.tile(iu, D + 1)
    b_of = np.tile(ju, D + 1)
    i_of = k_of // 2
    j_of = k_of - i_of
    piv = up0[i_of * q + a_of, j_of * q + b_of]
    A0 = A0.tocsr()
    cpiv = np.asarray(A0[np.arange(E), piv]).ravel()
    if np.any(cpiv == 0):
        raise RuntimeError("pivot entry missing from its coefficient equation")
    n0u = N0 * (N0 + 1) // 2
    n1u = N1 * (N1 + 1) // 2
    is_piv = np.zeros(n0u, dtype=bool)
    is_piv[piv] = True
    free0 = np.flatnonzero(~is_piv)
    gvar0 = np.full(n0u, -1, dtype=np.int64)
    gvar0[free0] = offset + np.arange(free0.size)
    gvar1 = offset + free0.size + np.arange(n1u)
    nnew = free0.size + n1u

    # pivot_e = (rhs_e - A0[e, free] g0 - A1[e, :] g1) / cpiv_e
    A0f = A0[:, free0].tocoo()
    A1c = A1.tocoo()
    iu0, ju0 = np.triu_indices(N0)
    pu, pv = iu0[piv], ju0[piv]

    F0 = np.zeros((N0, N0))
    F0[pu, pv] = rhs[:, 0] / cpiv
    F0[pv, pu] = F0[pu, pv]
    var, row, col, val = [], [], [], []
    # decision-variable part of the pivots
    dec = rhs[:, 1:] / cpiv[:, None]
    e_idx, d_idx = np.nonzero(dec)
    var.append(d_idx)
    row.append(pu[e_idx])
    col.append(pv[e_idx])
    val.append(dec[e_idx, d_idx])
    # free S0 entries appearing in pivot equations
    var.append(gvar0[free0[A0f.col]])
    row.append(pu[A0f.row])
    col.append(pv[A0f.row])
    val.append(-A0f.data / cpiv[A0f.row])
    # S1 entries appearing in pivot equations
    var.append(gvar1[A1c.col])
    row.append(pu[A1c.row])
    col.append(pv[A1c.row])
    val.append(-A1c.data / cpiv[A1c.row])
    # free S0 entries themselves
    var.append(gvar0[free0])
    row.append(iu0[free0])
    col.append(ju0[free0])
    val.append(np.ones(free0.size))
    block0 = Block(N0, F0=F0, var=np.concatenate(var), row=np.concatenate(row),
                   col=np.concatenate(col), val=np.concatenate(val))
    iu1, ju1 = np.triu_indices(N1)
    block1 = Block(N1, var=gvar1, row=iu1, col=ju1, val=np.ones(n1u))
    name = c.name or "constraint"
    return Relaxation([block0, block1], [f"{name}/S0", f"{name}/S1"], nnew,
                      gram_sizes=(N0, N1), degrees=(m0, m1), q=q, offset=offset)


@dataclass
class CompiledProgram:
    problem: SdpProblem
    ndecision: int
    relaxations: list[Relaxation]
    constraints: list[ClockConstraint]


def compile_program(prog: Program, constraints: list[ClockConstraint],
                    mult_degree: int) -> CompiledProgram:
    nd = prog.nvars
    offset = nd
    blocks, names, relaxations = [], [], []
    for c in constraints:
        r = relax_interval_negativity(c, mult_degree, nd, offset)
        offset += r.nnew
        blocks.extend(r.blocks)
        names.extend(r.names)
        relaxations.append(r)
    groups = [np.arange(r.offset, r.offset + r.nnew) for r in relaxations]
    problem = SdpProblem(offset, blocks, names=names, groups=groups)
    return CompiledProgram(problem, nd, relaxations, constraints)
