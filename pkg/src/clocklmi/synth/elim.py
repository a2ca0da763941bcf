"""Output-feedback synthesis with the controller eliminated.

Only ``X`` and ``Y`` are searched; the controller is recovered afterwards
pointwise on a clock grid and interpolated.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from ..lmi.expr import AffPoly, Program, bmat
from ..lmi.relax import ClockConstraint, compile_program
from ..polymat import PolyMat
from ..sdp import Block, SdpProblem, SolverOptions, solve
from .plant import ClockController, ControllerForm, ImpulsivePlant, kernel_basis
from .result import SynthResult, solve_program
from .transform import TransformVars, reconstruct_ltv_controller


class PointwiseInfeasible(RuntimeError):
    """No controller parameter satisfies the pointwise LMI at some clock value."""


def _project(basis: np.ndarray | None, expr: AffPoly) -> AffPoly | None:
    if basis is None or basis.shape[1] == 0:
        return None
    return basis.T @ expr @ basis


def elim_program(plant: ImpulsivePlant, x_degree: int, eps: float, bases=None):
    """Conditions on ``(X, Y)`` only.

    ``bases`` optionally overrides the kernel bases ``(U, V, U_J, V_J)`` of
    ``B^T, C, B_J^T, C_J``; an empty basis makes its condition vacuous.
    """
    n = plant.n
    T = plant.dwell.t_max
    A, AJ = plant.A, plant.A_J
    if bases is None:
        bases = (kernel_basis(plant.B.T), kernel_basis(plant.C),
                 kernel_basis(plant.B_J.T), kernel_basis(plant.C_J))
    U, V, UJ, VJ = bases
    prog = Program()
    X = prog.poly(n, n, x_degree, symmetric=True, label="X")
    Y = prog.poly(n, n, x_degree, symmetric=True, label="Y")
    eye = np.eye(n)
    jump_iv = (plant.dwell.t_min / T, 1.0)
    XA = X @ A
    YA = A @ Y
    candidates = [
        ("coupling", -bmat([[Y, eye], [eye, X]]), (0.0, 1.0)),
        ("flow_x", _project(V, X.derivative(1.0 / T) + XA.sym()), (0.0, 1.0)),
        ("flow_y", _project(U, -(Y.derivative(1.0 / T) - YA.sym())), (0.0, 1.0)),
        ("jump_x", _project(VJ, -X + AJ.T @ X.at_zero() @ AJ), jump_iv),
        ("jump_y", _project(UJ, -(Y.at_zero() - AJ @ Y @ AJ.T)), jump_iv),
    ]
    cons = [ClockConstraint(e, iv, eps, name) for name, e, iv in candidates if e is not None]
    return prog, (X, Y), cons


def synth_elim_ltv(plant: ImpulsivePlant, x_degree: int = 4, mult_degree: int = 2,
                   eps: float = 0.1, opts: SolverOptions | None = None,
                   bases=None) -> SynthResult:
    """Search ``(X, Y)`` satisfying the projected conditions; returns them as PolyMats."""
    prog, (Xv, Yv), cons = elim_program(plant, x_degree, eps, bases)
    cp = compile_program(prog, cons, mult_degree)
    sol, cond = solve_program(cp, opts)
    xy = None
    if sol.feasible:
        inv_t = 1.0 / plant.dwell.t_max
        xy = (Xv.value(sol.y).rescaled(inv_t), Yv.value(sol.y).rescaled(inv_t))
    return SynthResult(sol.status, sol.margin, xy, cp.problem.nvars, cp.ndecision, cond, sol, cp)


# pointwise reconstruction ----------------------------------------------------

def elimination_margin(Psi: np.ndarray, P: np.ndarray, Q: np.ndarray) -> float:
    """Largest ``delta`` such that some Theta gives ``Psi + sym(Q^T Theta P) <= -delta I``."""
    best = np.inf
    for M in (P, Q):
        N = kernel_basis(M)
        if N.shape[1]:
            best = min(best, -float(np.linalg.eigvalsh(N.T @ Psi @ N)[-1]))
    return best


def min_norm_parameter(Psi: np.ndarray, P: np.ndarray, Q: np.ndarray, delta: float,
                       opts: SolverOptions | None = None) -> np.ndarray:
    """Minimum-Frobenius-norm ``Theta`` with ``Psi + P^T Theta^T Q + Q^T Theta P <= -delta I``."""
    r, c = Q.shape[0], P.shape[0]
    k = Psi.shape[0]
    m = r * c
    iu, ju = np.triu_indices(k)
    var, row, col, val = [], [], [], []
    for a in range(r):
        for b in range(c):
            E = np.outer(Q[a], P[b])
            E = -(E + E.T)
            nz = E[iu, ju] != 0
            var.append(np.full(nz.sum(), a * c + b))
            row.append(iu[nz])
            col.append(ju[nz])
            val.append(E[iu, ju][nz])
    lmi = Block(k, F0=-Psi - delta * np.eye(k), var=np.concatenate(var), row=np.concatenate(row),
                col=np.concatenate(col), val=np.concatenate(val))
    # [[I, vec Theta], [vec Theta^T, s]] >= 0  <=>  ||Theta||_F^2 <= s
    F0 = np.zeros((m + 1, m + 1))
    F0[:m, :m] = np.eye(m)
    arrow = Block(m + 1, F0=F0, var=np.arange(m + 1), row=np.r_[np.arange(m), m],
                  col=np.full(m + 1, m), val=np.ones(m + 1))
    obj = np.zeros(m + 1)
    obj[m] = 1.0
    sol = solve(SdpProblem(m + 1, [lmi, arrow], objective=obj), opts)
    theta = sol.y[:m].reshape(r, c)
    got = np.linalg.eigvalsh(Psi + P.T @ theta.T @ Q + Q.T @ theta @ P)[-1]
    if not got < 0:
        raise PointwiseInfeasible(f"pointwise LMI not met (max eig {got:.3e}, {sol.message})")
    return theta


def _newton_barrier(F0, P, Q, lin, quad, shift, t0, t_final, stop=None, max_newton=50):
    """Batched path following for ``min t (lin.z + z^T diag(quad) z) - log det(-F(z))``.

    ``z = (vec Theta, s)`` with ``F(z) = F0 + sym(Q^T Theta P) - s I``; the shift
    ``s`` is present only when ``shift`` is set.  ``F0`` is ``(N, k, k)`` and
    ``z = 0`` must be strictly feasible; ``lin`` is ``(N, len(z))``.  The weight
    ``t`` grows geometrically up to ``t_final``; ``stop(z)`` optionally marks
    points as finished early.  Returns ``(z, ok)`` with ``ok`` False where the
    line search stalled.

    With ``S = -F = L L^T`` each direction ``sym(q_a p_b^T)`` whitens to
    ``u_a v_b^T + v_b u_a^T`` (``u = L^-1 Q^T``, ``v = L^-1 P^T``), so gradient and
    Hessian of the barrier only need the small Gram matrices of ``u`` and ``v``.
    """
    N, k = F0.shape[0], F0.shape[1]
    r, c = Q.shape[0], P.shape[0]
    m = r * c
    nz = m + int(shift)
    z = np.zeros((N, nz))
    ok = np.ones(N, dtype=bool)
    alphas = 0.5 ** np.arange(40)
    eye = np.eye(k)
    t = t0
    while True:
        active = ok.copy() if stop is None else ok & ~stop(z)
        for _ in range(max_newton):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            n_act = idx.size
            zi, li = z[idx], lin[idx]
            th = zi[:, :m].reshape(n_act, r, c)
            QtTP = Q.T @ th @ P
            F = F0[idx] + QtTP + np.swapaxes(QtTP, 1, 2)
            if shift:
                F = F - zi[:, m, None, None] * eye
            Li = np.linalg.inv(np.linalg.cholesky(-F))
            u, v = Li @ Q.T, Li @ P.T
            ut = np.swapaxes(u, 1, 2)
            M = ut @ v
            H = np.zeros((n_act, nz, nz))
            H[:, :m, :m] = 2.0 * (np.einsum("nad,ncb->nabcd", M, M)
                                  + np.einsum("nac,nbd->nabcd", ut @ u,
                                              np.swapaxes(v, 1, 2) @ v)).reshape(n_act, m, m)
            gbar = np.zeros((n_act, nz))
            gbar[:, :m] = 2.0 * M.reshape(n_act, m)
            if shift:
                R = Li @ np.swapaxes(Li, 1, 2)
                gbar[:, m] = -np.trace(R, axis1=1, axis2=2)
                H[:, :m, m] = H[:, m, :m] = -2.0 * (ut @ R @ v).reshape(n_act, m)
                H[:, m, m] = (R * R).sum(axis=(1, 2))
            grad = t * (li + 2.0 * quad * zi) + gbar
            H += 2.0 * t * np.diag(quad)
            step = -np.linalg.solve(H, grad[..., None])[..., 0]
            dec = -(grad * step).sum(axis=1)
            # S - a dS = L (I - a dSw) L^T
            uDv = u @ step[:, :m].reshape(n_act, r, c) @ np.swapaxes(v, 1, 2)
            dSw = uDv + np.swapaxes(uDv, 1, 2)
            if shift:
                dSw = dSw - step[:, m, None, None] * R
            mu = np.linalg.eigvalsh(dSw)
            top = mu[:, -1]
            a0 = np.where(top > 0, np.minimum(1.0, 0.99 / np.maximum(top, 1e-300)), 1.0)
            a = a0[:, None] * alphas[None]
            with np.errstate(invalid="ignore", divide="ignore"):
                logs = np.log1p(-a[..., None] * mu[:, None, :]).sum(axis=2)
            zq = zi[:, None, :] + a[..., None] * step[:, None, :]
            df = (t * (a * (li * step).sum(axis=1)[:, None]
                       + (quad * (zq ** 2 - zi[:, None, :] ** 2)).sum(axis=2)) - logs)
            good = np.isfinite(df) & (df <= -0.01 * a * dec[:, None])
            found = good.any(axis=1) | (dec <= 1e-8)
            take = a[np.arange(n_act), np.argmax(good, axis=1)] * good.any(axis=1)
            z[idx] = zi + take[:, None] * step
            ok[idx[~found]] = False
            active[idx[~found | (dec <= 1e-9)]] = False
            if stop is not None:
                active &= ~stop(z)
        if t >= t_final or (stop is not None and not (ok & ~stop(z)).any()):
            return z, ok
        t = min(t * 50.0, t_final)


def _barrier_min_norm(Psi: np.ndarray, P: np.ndarray, Q: np.ndarray, delta: np.ndarray):
    """Minimum-norm ``Theta`` with ``Psi + delta I + sym(Q^T Theta P)`` negative definite.

    Batched over the leading axis.  Where ``Theta = 0`` is not strictly
    feasible a start is found by driving down ``s`` in ``F(Theta) <= s I``.
    Returns ``(Theta, ok)``.
    """
    N, k = Psi.shape[0], Psi.shape[1]
    r, c = Q.shape[0], P.shape[0]
    m = r * c
    F0 = Psi + delta[:, None, None] * np.eye(k)
    top = np.linalg.eigvalsh(F0)[:, -1]
    theta = np.zeros((N, m))
    ok = np.ones(N, dtype=bool)
    need = np.flatnonzero(top >= -0.5 * delta)
    if need.size:
        s0 = np.maximum(top[need], 0.0) + 1.0
        F1 = F0[need] - s0[:, None, None] * np.eye(k)
        lin = np.zeros((need.size, m + 1))
        lin[:, m] = 1.0
        quad = np.r_[np.full(m, 1e-4), 0.0]
        target = -0.5 * delta[need]

        def stop(z):
            return s0 + z[:, m] <= target

        z, ok1 = _newton_barrier(F1, P, Q, lin, quad, True, 1.0, 1e8, stop)
        theta[need] = z[:, :m]
        ok[need] = ok1 & stop(z)
    idx = np.flatnonzero(ok)
    if idx.size:
        # offset z from the feasible start: ||base + z||^2 = ||z||^2 + 2 base.z + const
        base = theta[idx]
        bt = Q.T @ base.reshape(-1, r, c) @ P
        F2 = F0[idx] + bt + np.swapaxes(bt, 1, 2)
        z, ok2 = _newton_barrier(F2, P, Q, 2.0 * base, np.ones(m), False, 1.0, 1e8 * k)
        theta[idx] = base + z
        ok[idx] = ok2
    return theta.reshape(N, r, c), ok


def _pointwise_batch(Psis: np.ndarray, P: np.ndarray, Q: np.ndarray, fraction: float,
                     opts: SolverOptions | None) -> np.ndarray:
    """Minimum-norm parameters for a stack of ``Psi`` sharing ``P`` and ``Q``.

    ``Psi/a + sym((Q/b)^T Theta~ (P/c))`` with ``Theta = (a / (b c)) Theta~`` keeps
    the data and the parameter of unit size.  The batched barrier solver runs
    first; points it cannot settle go through the SDP solver one at a time.
    """
    Psis = 0.5 * (Psis + np.swapaxes(Psis, 1, 2))
    a = np.maximum(np.abs(Psis).max(axis=(1, 2)), 1e-300)
    b = max(np.abs(Q).max(), 1e-300)
    c = max(np.abs(P).max(), 1e-300)
    Psis, Q, P = Psis / a[:, None, None], Q / b, P / c
    dmax = np.full(len(Psis), np.inf)
    for M in (P, Q):
        N = kernel_basis(M)
        if N.shape[1]:
            proj = np.einsum("ji,njk,kl->nil", N, Psis, N)
            dmax = np.minimum(dmax, -np.linalg.eigvalsh(proj)[:, -1])
    if not np.all(dmax > 0):
        bad = int(np.argmin(dmax))
        raise PointwiseInfeasible(f"projected condition fails at sample {bad} "
                                  f"(margin {dmax[bad]:.3e})")
    delta = fraction * np.minimum(dmax, 1.0)
    theta, ok = _barrier_min_norm(Psis, P, Q, delta)
    for i in np.flatnonzero(~ok):
        theta[i] = min_norm_parameter(Psis[i], P, Q, delta[i], opts)
    return (a / (b * c))[:, None, None] * theta


class SplineMap:
    """Cubic-spline interpolation of matrix samples, evaluated like a PolyMat."""

    def __init__(self, taus: np.ndarray, samples: np.ndarray):
        self._lo, self._hi = float(taus[0]), float(taus[-1])
        self._s = CubicSpline(taus, samples, axis=0)

    def eval_grid(self, taus) -> np.ndarray:
        return self._s(np.clip(np.asarray(taus, dtype=float), self._lo, self._hi))

    def eval(self, tau: float) -> np.ndarray:
        return self.eval_grid([tau])[0]


def _split_params(xi: np.ndarray, n: int):
    return xi[:, :n, :n], xi[:, :n, n:], xi[:, n:, :n], xi[:, n:, n:]


def pointwise_parameters(X: PolyMat, Y: PolyMat, plant: ImpulsivePlant, grid_size: int = 201,
                         fraction: float = 0.5, opts: SolverOptions | None = None) -> TransformVars:
    """Transformed controller parameters on a clock grid, interpolated by cubic splines.

    At each grid point the transformed flow and jump LMIs are affine in
    ``Xi = [[K, L], [M, N]]`` (resp. the jump block); the minimum-norm ``Xi``
    meeting them with margin ``fraction * delta_max`` is selected.
    """
    n = plant.n
    p, q, pJ, qJ = plant.dims
    A, B, C = plant.A, plant.B, plant.C
    AJ, BJ, CJ = plant.A_J, plant.B_J, plant.C_J
    dwell = plant.dwell
    opts = opts or SolverOptions(gap_tol=1e-5, feas_tol=1e-7)
    eye, zero = np.eye(n), np.zeros((n, n))

    def outer(Bm, Cm):
        # A = A0 + Qo Xi Po with Qo = [0 B; I 0], Po = [I 0; 0 C]
        Qo = np.block([[np.zeros((n, n)), Bm], [eye, np.zeros((n, Bm.shape[1]))]])
        Po = np.block([[eye, np.zeros((n, n))], [np.zeros((Cm.shape[0], n)), Cm]])
        return Qo, Po

    Qf, Pf = outer(B, C)
    tf = dwell.flow_grid(grid_size)
    Xs, Ys = X.eval_grid(tf), Y.eval_grid(tf)
    Xds, Yds = X.derivative().eval_grid(tf), Y.derivative().eval_grid(tf)
    flow = []
    for Xk, Yk, Xdk, Ydk in zip(Xs, Ys, Xds, Yds):
        A0 = np.block([[A @ Yk, A], [zero, Xk @ A]])
        Psi = np.block([[-Ydk, zero], [zero, Xdk]]) + A0 + A0.T
        flow.append(Psi)

    QJ, PJ = outer(BJ, CJ)
    tj = dwell.jump_grid(grid_size)
    X0 = X.eval(0.0)
    bX0 = np.block([[Y.eval(0.0), eye], [eye, X0]])
    P = np.hstack([PJ, np.zeros((PJ.shape[0], 2 * n))])
    # off-diagonal block of the jump LMI carries -(J0 + QJ Xi PJ)
    Q = -np.hstack([np.zeros((QJ.shape[1], 2 * n)), QJ.T])
    jump = []
    for Xk, Yk in zip(X.eval_grid(tj), Y.eval_grid(tj)):
        J0 = np.block([[AJ @ Yk, AJ], [zero, X0 @ AJ]])
        bX = np.block([[Yk, eye], [eye, Xk]])
        Psi = -np.block([[bX, J0.T], [J0, bX0]])
        jump.append(Psi)

    K, L, M, N = (SplineMap(tf, v) for v in _split_params(
        _pointwise_batch(np.array(flow), Pf, Qf.T, fraction, opts), n))
    KJ, LJ, MJ, NJ = (SplineMap(tj, v) for v in _split_params(
        _pointwise_batch(np.array(jump), P, Q, fraction, opts), n))
    return TransformVars(X, Y, K, L, M, N, KJ, LJ, MJ, NJ)


def reconstruct_from_xy(X: PolyMat, Y: PolyMat, plant: ImpulsivePlant, grid_size: int = 201,
                        fraction: float = 0.5, opts: SolverOptions | None = None
                        ) -> ClockController:
    """Controller from an elimination solution ``(X, Y)``.

    Pointwise parameters from :func:`pointwise_parameters` are mapped through
    the closed-form controller formulas, so the result certifies with the
    completed certificate of ``(X, Y)``.
    """
    tv = pointwise_parameters(X, Y, plant, grid_size, fraction, opts)
    ctrl = reconstruct_ltv_controller(tv, plant)
    ctrl.form = ControllerForm.GRID
    return ctrl
