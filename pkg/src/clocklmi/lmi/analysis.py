"""Stability analysis of impulsive systems with clock-dependent Lyapunov certificates."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..polymat import PolyMat
from ..sdp import SdpSolution, SolverOptions, Status, check_residuals, solve
from .expr import AffPoly, Program, bmat
from .relax import ClockConstraint, CompiledProgram, compile_program

RHO_GRID = tuple(float(r) for r in np.logspace(-3, 2, 11))


@dataclass(frozen=True)
class DwellTimeSpec:
    """Range dwell-time: consecutive jumps are between ``t_min`` and ``t_max`` apart."""

    t_min: float
    t_max: float

    def __post_init__(self):
        if not (0 < self.t_min < self.t_max):
            raise ValueError(f"need 0 < t_min < t_max, got ({self.t_min}, {self.t_max})")

    def with_tmax(self, t_max: float) -> "DwellTimeSpec":
        return DwellTimeSpec(self.t_min, t_max)

    def flow_grid(self, n: int) -> np.ndarray:
        return np.linspace(0.0, self.t_max, n)

    def jump_grid(self, n: int) -> np.ndarray:
        return np.linspace(self.t_min, self.t_max, n)


@dataclass
class GridMargins:
    """Extreme eigenvalues of the three Lyapunov conditions on a clock grid."""

    x_min: float
    flow_max: float
    jump_max: float

    def passes(self, eps: float) -> bool:
        return self.x_min >= eps / 2 and self.flow_max <= -eps / 2 and self.jump_max <= -eps / 2

    @property
    def strict(self) -> bool:
        return self.x_min > 0 and self.flow_max < 0 and self.jump_max < 0

    def worst(self) -> str:
        vals = {"positivity": self.x_min, "flow": -self.flow_max, "jump": -self.jump_max}
        return min(vals, key=vals.get)


@dataclass
class AnalysisResult:
    status: Status
    X: PolyMat | None
    margin: float
    auxiliary: dict = field(default_factory=dict)
    condition_margins: dict = field(default_factory=dict)
    solution: SdpSolution | None = None
    grid: GridMargins | None = None
    problem: object = None  # the compiled SdpProblem

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE

    @property
    def weakest_condition(self) -> str | None:
        if not self.condition_margins:
            return None
        return min(self.condition_margins, key=self.condition_margins.get)


def _sym_eig_extremes(mats: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w = np.linalg.eigvalsh(0.5 * (mats + np.swapaxes(mats, -1, -2)))
    return w[..., 0], w[..., -1]


def lyapunov_grid_margins(A_fn: Callable, AJ_fn: Callable, X_fn: Callable, Xdot_fn: Callable,
                          dwell: DwellTimeSpec, grid_size: int = 1000) -> GridMargins:
    """Evaluate positivity, flow and jump conditions pointwise.

    Every callable maps an array of clock values to a stack of matrices.
    """
    tf = dwell.flow_grid(grid_size)
    tj = dwell.jump_grid(grid_size)
    X = X_fn(tf)
    Xd = Xdot_fn(tf)
    A = A_fn(tf)
    flow = Xd + np.swapaxes(A, 1, 2) @ X + X @ A
    x_min = float(_sym_eig_extremes(X)[0].min())
    flow_max = float(_sym_eig_extremes(flow)[1].max())
    X0 = X_fn(np.array([0.0]))[0]
    AJ = AJ_fn(tj)
    jump = -X_fn(tj) + np.swapaxes(AJ, 1, 2) @ X0 @ AJ
    jump_max = float(_sym_eig_extremes(jump)[1].max())
    return GridMargins(x_min, flow_max, jump_max)


def _as_poly(M) -> PolyMat:
    return M if isinstance(M, PolyMat) else PolyMat.constant(M)


def _status_result(sol: SdpSolution, cp: CompiledProgram, X: PolyMat | None, **aux) -> AnalysisResult:
    rep = check_residuals(cp.problem, sol)
    cond = {}
    for name, mg in zip(rep.names, rep.margins):
        key = name.split("/")[0]
        cond[key] = min(cond.get(key, math.inf), mg)
    return AnalysisResult(sol.status, X, sol.margin, auxiliary=aux, condition_margins=cond,
                          solution=sol)


def clock_lyapunov_program(A: PolyMat, AJ: PolyMat, dwell: DwellTimeSpec, x_degree: int,
                           eps: float) -> tuple[Program, AffPoly, list[ClockConstraint]]:
    T = dwell.t_max
    n = A.rows
    prog = Program()
    X = prog.poly(n, n, x_degree, symmetric=True, label="X")
    As = A.rescaled(T)
    AJs = AJ.rescaled(T)
    XA = X.times_poly(As)
    flow = X.derivative(1.0 / T) + XA + XA.t
    jump = -X + X.at_zero().times_poly(AJs).poly_times(AJs.T)
    cons = [
        ClockConstraint(-X, (0.0, 1.0), eps, "positivity"),
        ClockConstraint(flow, (0.0, 1.0), eps, "flow"),
        ClockConstraint(jump, (dwell.t_min / T, 1.0), eps, "jump"),
    ]
    return prog, X, cons


def analyze_clock_lyapunov(A, AJ, dwell: DwellTimeSpec, x_degree: int = 4, mult_degree: int = 2,
                           eps: float = 0.1, opts: SolverOptions | None = None,
                           verify_grid: int = 1000) -> AnalysisResult:
    """Search a polynomial certificate ``X`` for the flow/jump Lyapunov conditions.

    ``A`` and ``AJ`` are constant matrices or :class:`PolyMat` in the clock.
    """
    A, AJ = _as_poly(A), _as_poly(AJ)
    if A.shape != AJ.shape or A.rows != A.cols:
        raise ValueError("flow and jump matrices must be square of equal size")
    prog, Xv, cons = clock_lyapunov_program(A, AJ, dwell, x_degree, eps)
    cp = compile_program(prog, cons, mult_degree)
    sol = solve(cp.problem, opts)
    X = Xv.value(sol.y).rescaled(1.0 / dwell.t_max)
    res = _status_result(sol, cp, X if sol.feasible else None)
    res.problem = cp.problem
    if res.feasible and verify_grid:
        Xd = X.derivative()
        res.grid = lyapunov_grid_margins(A.eval_grid, AJ.eval_grid, X.eval_grid, Xd.eval_grid,
                                         dwell, verify_grid)
    return res


def svariable_program(A, AJ, dwell: DwellTimeSpec, x_degree: int, eps: float, rho: float):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    AJ = np.atleast_2d(np.asarray(AJ, dtype=float))
    n = A.shape[0]
    T = dwell.t_max
    prog = Program()
    X = prog.poly(n, n, x_degree, symmetric=True, label="X")
    G = prog.matrix(n, n, label="G")
    GJ = prog.matrix(n, n, label="G_J")
    GA = G @ A
    flow = bmat([[X.derivative(1.0 / T) + GA.sym(), X + rho * GA.t - G],
                 [X + rho * GA - G.t, -rho * G.sym()]])
    GJAJ = GJ @ AJ
    jump = bmat([[-X, GJAJ.t], [GJAJ, X.at_zero() - GJ.sym()]])
    cons = [
        ClockConstraint(-X, (0.0, 1.0), eps, "positivity"),
        ClockConstraint(flow, (0.0, 1.0), eps, "flow"),
        ClockConstraint(jump, (dwell.t_min / T, 1.0), eps, "jump"),
    ]
    return prog, (X, G, GJ), cons


def analyze_svariable(A, AJ, dwell: DwellTimeSpec, x_degree: int = 4, mult_degree: int = 2,
                      eps: float = 0.1, rho: float = 0.1, opts: SolverOptions | None = None,
                      verify_grid: int = 1000) -> AnalysisResult:
    """Slack-variable analysis with constant ``G``, ``G_J`` and fixed ``rho > 0``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    prog, (Xv, Gv, GJv), cons = svariable_program(A, AJ, dwell, x_degree, eps, rho)
    cp = compile_program(prog, cons, mult_degree)
    sol = solve(cp.problem, opts)
    X = Xv.value(sol.y).rescaled(1.0 / dwell.t_max)
    G = Gv.coeffs_at(sol.y)[0]
    GJ = GJv.coeffs_at(sol.y)[0]
    res = _status_result(sol, cp, X if sol.feasible else None, rho=rho, G=G, G_J=GJ)
    res.problem = cp.problem
    if res.feasible and verify_grid:
        res.grid = svariable_grid_margins(A, AJ, X, G, GJ, rho, dwell, verify_grid)
    return res


def svariable_grid_margins(A, AJ, X: PolyMat, G, GJ, rho: float, dwell: DwellTimeSpec,
                           grid_size: int = 1000) -> GridMargins:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    AJ = np.atleast_2d(np.asarray(AJ, dtype=float))
    tf = dwell.flow_grid(grid_size)
    tj = dwell.jump_grid(grid_size)
    Xf = X.eval_grid(tf)
    Xd = X.derivative().eval_grid(tf)
    GA = G @ A
    top = Xd + GA + GA.T
    off = Xf + rho * GA.T - G
    br = np.broadcast_to(-rho * (G + G.T), Xf.shape)
    flow = np.block([[top, off], [np.swapaxes(off, 1, 2), br]])
    Xj = X.eval_grid(tj)
    GJAJ = GJ @ AJ
    X0 = X.eval(0.0)
    n = A.shape[0]
    jump = np.zeros((tj.size, 2 * n, 2 * n))
    jump[:, :n, :n] = -Xj
    jump[:, :n, n:] = GJAJ.T
    jump[:, n:, :n] = GJAJ
    jump[:, n:, n:] = X0 - GJ - GJ.T
    return GridMargins(float(_sym_eig_extremes(Xf)[0].min()),
                       float(_sym_eig_extremes(flow)[1].max()),
                       float(_sym_eig_extremes(jump)[1].max()))


def sweep_rho(run: Callable[[float], AnalysisResult], grid=RHO_GRID,
              first_feasible: bool = False):
    """Run ``run(rho)`` over ``grid``; return the feasible result with the best margin.

    With ``first_feasible`` the sweep stops at the first feasible value.
    Returns the last result when nothing is feasible.
    """
    best = None
    last = None
    for rho in grid:
        r = run(rho)
        last = r
        if r.feasible and (best is None or r.margin > best.margin):
            best = r
            if first_feasible:
                break
    return best if best is not None else last
