"""Output-feedback synthesis through the convexifying parameter transformation.

The closed-loop Lyapunov conditions become LMIs in ``X, Y`` and the
transformed controller parameters ``K, L, M, N`` (flow) and
``K_J, L_J, M_J, N_J`` (jump), all polynomial in the clock.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lmi.expr import AffPoly, Program, bmat
from ..lmi.relax import ClockConstraint, compile_program
from ..polymat import PolyMat
from ..sdp import SolverOptions
from .plant import (ClockController, ControllerForm, ImpulsivePlant, NearSingularCompletion,
                    checked_solve)
from .result import SynthResult, solve_program


def _t(M: np.ndarray) -> np.ndarray:
    return np.swapaxes(M, -1, -2)


@dataclass(frozen=True)
class TransformVars:
    """Solution of the transformed LMIs; every map is a :class:`PolyMat` in the clock."""

    X: PolyMat
    Y: PolyMat
    K: PolyMat
    L: PolyMat
    M: PolyMat
    N: PolyMat
    K_J: PolyMat
    L_J: PolyMat
    M_J: PolyMat
    N_J: PolyMat

    def bold_X(self, taus) -> np.ndarray:
        X, Y = self.X.eval_grid(taus), self.Y.eval_grid(taus)
        n = X.shape[-1]
        eye = np.broadcast_to(np.eye(n), X.shape)
        return np.block([[Y, eye], [eye, X]])

    def bold_Z(self, taus) -> np.ndarray:
        Xd = self.X.derivative().eval_grid(taus)
        Yd = self.Y.derivative().eval_grid(taus)
        z = np.zeros_like(Xd)
        return np.block([[-Yd, z], [z, Xd]])

    def bold_A(self, plant: ImpulsivePlant, taus) -> np.ndarray:
        A, B, C = plant.A, plant.B, plant.C
        X, Y = self.X.eval_grid(taus), self.Y.eval_grid(taus)
        K, L, M, N = (P.eval_grid(taus) for P in (self.K, self.L, self.M, self.N))
        return np.block([[A @ Y + B @ M, A + B @ N @ C], [K, X @ A + L @ C]])

    def bold_AJ(self, plant: ImpulsivePlant, taus) -> np.ndarray:
        AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
        Y = self.Y.eval_grid(taus)
        X0 = self.X.eval(0.0)
        K, L, M, N = (P.eval_grid(taus) for P in (self.K_J, self.L_J, self.M_J, self.N_J))
        return np.block([[AJ @ Y + BJ @ M, np.broadcast_to(AJ, Y.shape) + BJ @ N @ CJ],
                         [K, X0 @ AJ + L @ CJ]])


def transform_program(plant: ImpulsivePlant, x_degree: int, eps: float):
    """Decision polynomials and the three clock constraints (normalized clock ``s``)."""
    n = plant.n
    p, q, pJ, qJ = plant.dims
    T = plant.dwell.t_max
    A, B, C = plant.A, plant.B, plant.C
    AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
    d = x_degree
    prog = Program()
    X = prog.poly(n, n, d, symmetric=True, label="X")
    Y = prog.poly(n, n, d, symmetric=True, label="Y")
    K = prog.poly(n, n, d, label="K")
    L = prog.poly(n, q, d, label="L")
    M = prog.poly(p, n, d, label="M")
    N = prog.poly(p, q, d, label="N")
    KJ = prog.poly(n, n, d, label="K_J")
    LJ = prog.poly(n, qJ, d, label="L_J")
    MJ = prog.poly(pJ, n, d, label="M_J")
    NJ = prog.poly(pJ, qJ, d, label="N_J")
    eye = np.eye(n)
    bX = bmat([[Y, eye], [eye, X]])
    bZ = bmat([[-Y.derivative(1.0 / T), None], [None, X.derivative(1.0 / T)]])
    bA = bmat([[A @ Y + B @ M, A + B @ N @ C], [K, X @ A + L @ C]])
    bAJ = bmat([[AJ @ Y + BJ @ MJ, AJ + BJ @ NJ @ CJ], [KJ, X.at_zero() @ AJ + LJ @ CJ]])
    jump = bmat([[bX, bAJ.t], [bAJ, bX.at_zero()]])
    cons = [
        ClockConstraint(-bX, (0.0, 1.0), eps, "positivity"),
        ClockConstraint(bZ + bA.sym(), (0.0, 1.0), eps, "flow"),
        ClockConstraint(-jump, (plant.dwell.t_min / T, 1.0), eps, "jump"),
    ]
    return prog, (X, Y, K, L, M, N, KJ, LJ, MJ, NJ), cons


def synth_transform_ltv(plant: ImpulsivePlant, x_degree: int = 4, mult_degree: int = 2,
                        eps: float = 0.1, opts: SolverOptions | None = None) -> SynthResult:
    """Search clock-dependent controller parameters through the transformed LMIs."""
    prog, polys, cons = transform_program(plant, x_degree, eps)
    cp = compile_program(prog, cons, mult_degree)
    sol, cond = solve_program(cp, opts)
    inv_t = 1.0 / plant.dwell.t_max
    vals = [P.value(sol.y).rescaled(inv_t) for P in polys]
    tv = TransformVars(*vals) if sol.feasible else None
    return SynthResult(sol.status, sol.margin, tv, cp.problem.nvars, cp.ndecision, cond, sol, cp)


# completion -------------------------------------------------------------------

def complete_certificate(X: np.ndarray, Y: np.ndarray, Xd: np.ndarray | None = None,
                         Yd: np.ndarray | None = None):
    """Closed-loop certificate from ``(X, Y)`` stacks with ``U = X``, ``V = X^-1 - Y``.

    Returns ``(cal_X, cal_X_dot, cal_Y, V)``; ``cal_X_dot`` is ``None`` when no
    derivatives are given.
    """
    n = X.shape[-1]
    eye = np.broadcast_to(np.eye(n), X.shape)
    zero = np.zeros_like(X)
    coupling = eye - X @ Y
    c = np.linalg.cond(coupling)
    if not np.all(np.isfinite(c)) or np.max(c) > 1e12:
        raise NearSingularCompletion(f"cond(I - XY) = {np.max(c):.3e}")
    Xinv = np.linalg.inv(X)
    V = Xinv - Y
    U = X
    calY = np.block([[Y, eye], [_t(V), zero]])
    calZ = np.block([[eye, zero], [X, U]])
    calYinvT = np.linalg.inv(_t(calY))
    calX = calYinvT @ calZ
    calX = 0.5 * (calX + _t(calX))
    if Xd is None:
        return calX, None, calY, V
    Vd = -Xinv @ Xd @ Xinv - Yd
    calYd = np.block([[Yd, zero], [_t(Vd), zero]])
    calZd = np.block([[zero, zero], [Xd, Xd]])
    calXd = -calYinvT @ _t(calYd) @ calX + calYinvT @ calZd
    calXd = 0.5 * (calXd + _t(calXd))
    return calX, calXd, calY, V


def ltv_certificate(X: PolyMat, Y: PolyMat):
    """Vectorized ``(value, derivative)`` callables of the completed certificate."""
    Xd, Yd = X.derivative(), Y.derivative()

    def value(t):
        return complete_certificate(X.eval_grid(t), Y.eval_grid(t))[0]

    def derivative(t):
        return complete_certificate(X.eval_grid(t), Y.eval_grid(t), Xd.eval_grid(t),
                                    Yd.eval_grid(t))[1]

    return value, derivative


def reconstruct_ltv_controller(tv: TransformVars, plant: ImpulsivePlant) -> ClockController:
    """Closed-form clock-dependent controller from the transformed variables."""
    n = plant.n
    p, q, pJ, qJ = plant.dims
    A, B, C = plant.A, plant.B, plant.C
    AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
    Xd_p = tv.X.derivative()
    X0 = tv.X.eval(0.0)
    # raises early when the completion is ill-conditioned anywhere on a coarse grid
    for grid in (plant.dwell.flow_grid(201), plant.dwell.jump_grid(201)):
        complete_certificate(tv.X.eval_grid(grid), tv.Y.eval_grid(grid))

    def flow(t):
        X, Y, Xd = tv.X.eval_grid(t), tv.Y.eval_grid(t), Xd_p.eval_grid(t)
        K, L, M, N = (P.eval_grid(t) for P in (tv.K, tv.L, tv.M, tv.N))
        V = np.linalg.inv(X) - Y
        U, Ud = X, Xd
        k = len(t)
        left = np.zeros((k, n + p, n + p))
        left[:, :n, :n] = U
        left[:, :n, n:] = X @ B
        left[:, n:, n:] = np.eye(p)
        mid = np.block([[K - X @ A @ Y - Xd @ Y - Ud @ _t(V), L], [M, N]])
        right = np.zeros((k, n + q, n + q))
        right[:, :n, :n] = _t(V)
        right[:, n:, :n] = C @ Y
        right[:, n:, n:] = np.eye(q)
        tmp = checked_solve(left, mid, "flow left factor")
        return _t(checked_solve(_t(right), _t(tmp), "flow right factor"))

    def jump(t):
        Y = tv.Y.eval_grid(t)
        X = tv.X.eval_grid(t)
        K, L, M, N = (P.eval_grid(t) for P in (tv.K_J, tv.L_J, tv.M_J, tv.N_J))
        V = np.linalg.inv(X) - Y
        k = len(t)
        left = np.zeros((n + pJ, n + pJ))
        left[:n, :n] = X0
        left[:n, n:] = X0 @ BJ
        left[n:, n:] = np.eye(pJ)
        mid = np.block([[K - X0 @ AJ @ Y, L], [M, N]])
        right = np.zeros((k, n + qJ, n + qJ))
        right[:, :n, :n] = _t(V)
        right[:, n:, :n] = CJ @ Y
        right[:, n:, n:] = np.eye(qJ)
        tmp = checked_solve(np.broadcast_to(left, (k,) + left.shape), mid, "jump left factor")
        return _t(checked_solve(_t(right), _t(tmp), "jump right factor"))

    return ClockController(n, flow, jump, plant.dwell, ControllerForm.RATIONAL)
