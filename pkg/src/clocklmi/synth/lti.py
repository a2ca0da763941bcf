"""Constant (clock-independent) controllers through slack-variable LMIs.

The certificate stays clock dependent while the controller matrices are
constant; ``rho`` is fixed per solve and swept outside.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..lmi.analysis import RHO_GRID
from ..lmi.expr import Program, bmat
from ..lmi.relax import ClockConstraint, compile_program
from ..polymat import PolyMat
from ..sdp import SolverOptions
from .plant import ImpulsivePlant, LtiController, SingularReconstruction, checked_solve
from .result import SynthResult, solve_program


@dataclass(frozen=True)
class LtiVars:
    """Solution of the slack-variable synthesis LMIs."""

    bX: PolyMat
    G: np.ndarray
    H: np.ndarray
    S: np.ndarray
    G_J: np.ndarray
    S_J: np.ndarray
    K: np.ndarray
    L: np.ndarray
    M: np.ndarray
    N: np.ndarray
    K_J: np.ndarray
    L_J: np.ndarray
    M_J: np.ndarray
    N_J: np.ndarray
    rho: float

    @property
    def bG(self) -> np.ndarray:
        n = self.H.shape[0]
        return np.block([[self.H, np.eye(n)], [self.S, self.G]])

    @property
    def bG_J(self) -> np.ndarray:
        n = self.H.shape[0]
        return np.block([[self.H, np.eye(n)], [self.S_J, self.G_J]])

    def bA(self, plant: ImpulsivePlant) -> np.ndarray:
        A, B, C = plant.A, plant.B, plant.C
        return np.block([[A @ self.H + B @ self.M, A + B @ self.N @ C],
                         [self.K, self.G @ A + self.L @ C]])

    def bA_J(self, plant: ImpulsivePlant) -> np.ndarray:
        AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
        return np.block([[AJ @ self.H + BJ @ self.M_J, AJ + BJ @ self.N_J @ CJ],
                         [self.K_J, self.G_J @ AJ + self.L_J @ CJ]])


def lti_program(plant: ImpulsivePlant, x_degree: int, eps: float, rho: float):
    n = plant.n
    p, q, pJ, qJ = plant.dims
    T = plant.dwell.t_max
    A, B, C = plant.A, plant.B, plant.C
    AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
    prog = Program()
    bX = prog.poly(2 * n, 2 * n, x_degree, symmetric=True, label="X")
    G = prog.matrix(n, n, label="G")
    H = prog.matrix(n, n, label="H")
    S = prog.matrix(n, n, label="S")
    GJ = prog.matrix(n, n, label="G_J")
    SJ = prog.matrix(n, n, label="S_J")
    K, L = prog.matrix(n, n, label="K"), prog.matrix(n, q, label="L")
    M, N = prog.matrix(p, n, label="M"), prog.matrix(p, q, label="N")
    KJ, LJ = prog.matrix(n, n, label="K_J"), prog.matrix(n, qJ, label="L_J")
    MJ, NJ = prog.matrix(pJ, n, label="M_J"), prog.matrix(pJ, qJ, label="N_J")
    eye = np.eye(n)
    bG = bmat([[H, eye], [S, G]])
    bGJ = bmat([[H, eye], [SJ, GJ]])
    bA = bmat([[A @ H + B @ M, A + B @ N @ C], [K, G @ A + L @ C]])
    bAJ = bmat([[AJ @ H + BJ @ MJ, AJ + BJ @ NJ @ CJ], [KJ, GJ @ AJ + LJ @ CJ]])
    off = bX + rho * bA.t - bG
    flow = bmat([[bX.derivative(1.0 / T) + bA.sym(), off], [off.t, -rho * bG.sym()]])
    jump = bmat([[-bX, bAJ.t], [bAJ, bX.at_zero() - bGJ.sym()]])
    cons = [
        ClockConstraint(-bX, (0.0, 1.0), eps, "positivity"),
        ClockConstraint(flow, (0.0, 1.0), eps, "flow"),
        ClockConstraint(jump, (plant.dwell.t_min / T, 1.0), eps, "jump"),
    ]
    return prog, (bX, G, H, S, GJ, SJ, K, L, M, N, KJ, LJ, MJ, NJ), cons


def synth_lti(plant: ImpulsivePlant, x_degree: int = 4, mult_degree: int = 2, eps: float = 0.1,
              rho: float = 1.0, opts: SolverOptions | None = None) -> SynthResult:
    """Constant controller parameters for a fixed ``rho > 0``."""
    if not rho > 0:
        raise ValueError("rho must be positive")
    prog, vs, cons = lti_program(plant, x_degree, eps, rho)
    cp = compile_program(prog, cons, mult_degree)
    sol, cond = solve_program(cp, opts)
    lv = None
    if sol.feasible:
        bX = vs[0].value(sol.y).rescaled(1.0 / plant.dwell.t_max)
        mats = [v.coeffs_at(sol.y)[0] for v in vs[1:]]
        lv = LtiVars(bX, *mats, rho=float(rho))
    return SynthResult(sol.status, sol.margin, lv, cp.problem.nvars, cp.ndecision, cond, sol, cp)


def synth_lti_sweep(plant: ImpulsivePlant, x_degree: int = 4, mult_degree: int = 2,
                    eps: float = 0.1, rho_grid=RHO_GRID, first_feasible: bool = False,
                    opts: SolverOptions | None = None) -> SynthResult:
    """Run :func:`synth_lti` over ``rho_grid``; keep the feasible result with the best margin."""
    best, last = None, None
    for rho in rho_grid:
        r = synth_lti(plant, x_degree, mult_degree, eps, rho, opts)
        last = r
        if r.feasible and (best is None or r.margin > best.margin):
            best = r
            if first_feasible:
                break
    return best if best is not None else last


def _lti_completion(lv: LtiVars):
    H = lv.H
    if np.linalg.cond(H) > 1e12:
        raise SingularReconstruction(f"H is near singular (cond {np.linalg.cond(H):.3e})")
    Hinv = np.linalg.inv(H)
    V = H.T
    U = lv.S @ Hinv - lv.G
    UJ = lv.S_J @ Hinv - lv.G_J
    return Hinv, V, U, UJ


def reconstruct_lti_controller(lv: LtiVars, plant: ImpulsivePlant) -> LtiController:
    """Constant controller from the slack-variable solution."""
    n = plant.n
    p, q, pJ, qJ = plant.dims
    A, B, C = plant.A, plant.B, plant.C
    AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
    H = lv.H
    _, V, U, UJ = _lti_completion(lv)

    def theta(Uf, Gf, Bf, Af, Cf, K, L, M, N, pp, qq, what):
        left = np.block([[Uf, Gf @ Bf], [np.zeros((pp, n)), np.eye(pp)]])
        mid = np.block([[K - Gf @ Af @ H, L], [M, N]])
        right = np.block([[V.T, np.zeros((n, qq))], [Cf @ H, np.eye(qq)]])
        tmp = checked_solve(left, mid, f"{what} left factor")
        return checked_solve(right.T, tmp.T, f"{what} right factor").T

    th = theta(U, lv.G, B, A, C, lv.K, lv.L, lv.M, lv.N, p, q, "flow")
    thJ = theta(UJ, lv.G_J, BJ, AJ, CJ, lv.K_J, lv.L_J, lv.M_J, lv.N_J, pJ, qJ, "jump")
    return LtiController(th, thJ, n)


def lti_certificate(lv: LtiVars):
    """``(cal_X, cal_G, cal_G_J, cal_Y)``: closed-loop certificate and slack matrices."""
    n = lv.H.shape[0]
    Hinv, V, U, UJ = _lti_completion(lv)
    calY = np.block([[lv.H, np.eye(n)], [V.T, np.zeros((n, n))]])
    Yinv = np.linalg.inv(calY)
    calX = lv.bX.congruence(Yinv)
    calG = np.block([[lv.G, U], [Hinv.T - lv.G, -U]])
    calGJ = np.block([[lv.G_J, UJ], [Hinv.T - lv.G_J, -UJ]])
    return calX, calG, calGJ, calY

