"""Plants, controllers and their closed-loop interconnection."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..lmi.analysis import DwellTimeSpec

COND_LIMIT = 1e12


class NearSingularCompletion(RuntimeError):
    """Completion ``I - X Y`` is too ill-conditioned to invert reliably."""


class SingularReconstruction(RuntimeError):
    """A matrix that must be inverted to recover controller matrices is near singular."""


def _mat(M, name: str) -> np.ndarray:
    a = np.atleast_2d(np.asarray(M, dtype=float))
    if a.ndim != 2:
        raise ValueError(f"{name} must be a matrix")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


@dataclass(frozen=True)
class ImpulsivePlant:
    """Open loop ``dx = A x + B u, y = C x`` with jumps ``x+ = A_J x + B_J u_J, y_J = C_J x``."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    A_J: np.ndarray
    B_J: np.ndarray
    C_J: np.ndarray
    dwell: DwellTimeSpec

    def __post_init__(self):
        for name in ("A", "B", "C", "A_J", "B_J", "C_J"):
            object.__setattr__(self, name, _mat(getattr(self, name), name))
        n = self.A.shape[0]
        checks = [
            (self.A.shape == (n, n), "A must be square"),
            (self.B.shape[0] == n, "B must have n rows"),
            (self.C.shape[1] == n, "C must have n columns"),
            (self.A_J.shape == (n, n), "A_J must be n x n"),
            (self.B_J.shape[0] == n, "B_J must have n rows"),
            (self.C_J.shape[1] == n, "C_J must have n columns"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ValueError(f"dimension mismatch: {msg}")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def dims(self) -> tuple[int, int, int, int]:
        """``(p, q, p_J, q_J)``: flow input/output and jump input/output widths."""
        return self.B.shape[1], self.C.shape[0], self.B_J.shape[1], self.C_J.shape[0]

    def with_dwell(self, dwell: DwellTimeSpec) -> "ImpulsivePlant":
        return ImpulsivePlant(self.A, self.B, self.C, self.A_J, self.B_J, self.C_J, dwell)

    def with_tmax(self, t_max: float) -> "ImpulsivePlant":
        return self.with_dwell(self.dwell.with_tmax(t_max))


def kernel_basis(M, rtol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis of ``ker M`` (columns); ``(ncols, 0)`` when the kernel is trivial."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    ncols = M.shape[1]
    if M.size == 0:
        return np.eye(ncols)
    _, s, vt = np.linalg.svd(M)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > rtol * smax)) if smax > 0 else 0
    return vt[rank:].T.copy()


class ControllerForm(str, enum.Enum):
    RATIONAL = "RationalClosedForm"
    GRID = "GridInterpolated"
    CONSTANT = "Constant"


def _split(theta: np.ndarray, nc: int) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    return theta[..., :nc, :nc], theta[..., :nc, nc:], theta[..., nc:, :nc], theta[..., nc:, nc:]


class ClockController:
    """Clock-scheduled controller given by its parameter blocks.

    ``flow(taus)`` returns a stack of ``[[A_c, B_c], [C_c, D_c]]`` for clock
    values in ``[0, t_max]``; ``jump(taus)`` the jump analogue on
    ``[t_min, t_max]``.  Both accept 1-d arrays.
    """

    def __init__(self, order: int, flow: Callable[[np.ndarray], np.ndarray],
                 jump: Callable[[np.ndarray], np.ndarray], dwell: DwellTimeSpec,
                 form: ControllerForm = ControllerForm.RATIONAL):
        self.order = int(order)
        self._flow = flow
        self._jump = jump
        self.dwell = dwell
        self.form = form

    def flow(self, taus) -> np.ndarray:
        return np.asarray(self._flow(np.atleast_1d(np.asarray(taus, dtype=float))))

    def jump(self, taus) -> np.ndarray:
        return np.asarray(self._jump(np.atleast_1d(np.asarray(taus, dtype=float))))

    def flow_blocks(self, tau: float):
        """``(A_c, B_c, C_c, D_c)`` at a single clock value."""
        return _split(self.flow([tau])[0], self.order)

    def jump_blocks(self, tau: float):
        return _split(self.jump([tau])[0], self.order)

    def max_increment(self, grid_size: int = 1000) -> float:
        """Largest entry change between adjacent grid samples (continuity check)."""
        tf = self.dwell.flow_grid(grid_size)
        tj = self.dwell.jump_grid(grid_size)
        worst = 0.0
        for vals in (self.flow(tf), self.jump(tj)):
            if not np.all(np.isfinite(vals)):
                return float("inf")
            worst = max(worst, float(np.abs(np.diff(vals, axis=0)).max(initial=0.0)))
        return worst


@dataclass(frozen=True)
class LtiController:
    """Constant controller ``[[A_c, B_c], [C_c, D_c]]`` and its jump analogue."""

    theta: np.ndarray
    theta_J: np.ndarray
    order: int

    @property
    def blocks(self):
        return _split(self.theta, self.order)

    @property
    def jump_blocks(self):
        return _split(self.theta_J, self.order)


def _interconnection(A, B, C, nc):
    """``(A0, Bt, Ct)`` with closed loop ``A0 + Bt Theta Ct``."""
    n = A.shape[0]
    p, q = B.shape[1], C.shape[0]
    A0 = np.zeros((n + nc, n + nc))
    A0[:n, :n] = A
    Bt = np.zeros((n + nc, nc + p))
    Bt[:n, nc:] = B
    Bt[n:, :nc] = np.eye(nc)
    Ct = np.zeros((nc + q, n + nc))
    Ct[:nc, n:] = np.eye(nc)
    Ct[nc:, :n] = C
    return A0, Bt, Ct


class ClosedLoop:
    """Closed-loop impulsive system with clock-dependent flow and jump matrices.

    ``flow(taus)`` and ``jump(taus)`` return stacks of ``(size, size)`` matrices.
    """

    def __init__(self, flow: Callable, jump: Callable, size: int, dwell: DwellTimeSpec):
        self._flow = flow
        self._jump = jump
        self.size = int(size)
        self.dwell = dwell

    def flow(self, taus) -> np.ndarray:
        return self._flow(np.atleast_1d(np.asarray(taus, dtype=float)))

    def jump(self, taus) -> np.ndarray:
        return self._jump(np.atleast_1d(np.asarray(taus, dtype=float)))

    @classmethod
    def constant(cls, A, AJ, dwell: DwellTimeSpec) -> "ClosedLoop":
        A = np.atleast_2d(np.asarray(A, dtype=float))
        AJ = np.atleast_2d(np.asarray(AJ, dtype=float))

        def rep(M):
            return lambda t: np.broadcast_to(M, (len(t),) + M.shape).copy()

        return cls(rep(A), rep(AJ), A.shape[0], dwell)

    @classmethod
    def from_polys(cls, A, AJ, dwell: DwellTimeSpec) -> "ClosedLoop":
        """From :class:`PolyMat` flow and jump maps."""
        return cls(A.eval_grid, AJ.eval_grid, A.rows, dwell)


def close_loop(plant: ImpulsivePlant, ctrl: ClockController | LtiController) -> ClosedLoop:
    """Interconnect ``plant`` with ``ctrl``; the closed-loop state is ``(x, x_c)``."""
    nc = ctrl.order
    p, q, pJ, qJ = plant.dims
    A0, Bt, Ct = _interconnection(plant.A, plant.B, plant.C, nc)
    J0, BJt, CJt = _interconnection(plant.A_J, plant.B_J, plant.C_J, nc)
    size = plant.n + nc
    if isinstance(ctrl, LtiController):
        if ctrl.theta.shape != (nc + p, nc + q) or ctrl.theta_J.shape != (nc + pJ, nc + qJ):
            raise ValueError("controller dimensions do not match the plant")
        return ClosedLoop.constant(A0 + Bt @ ctrl.theta @ Ct, J0 + BJt @ ctrl.theta_J @ CJt,
                                   plant.dwell)
    th = ctrl.flow([0.0])[0]
    thJ = ctrl.jump([plant.dwell.t_max])[0]
    if th.shape != (nc + p, nc + q) or thJ.shape != (nc + pJ, nc + qJ):
        raise ValueError("controller dimensions do not match the plant")

    def flow(t):
        return A0 + Bt @ ctrl.flow(t) @ Ct

    def jump(t):
        return J0 + BJt @ ctrl.jump(t) @ CJt

    return ClosedLoop(flow, jump, size, plant.dwell)


def checked_solve(M: np.ndarray, rhs: np.ndarray, what: str,
                  exc: type[Exception] = SingularReconstruction) -> np.ndarray:
    """``M^{-1} rhs`` (stacked) with a condition-number guard."""
    c = np.linalg.cond(M)
    if not np.all(np.isfinite(c)) or np.max(c) > COND_LIMIT:
        raise exc(f"{what} is near singular (cond {np.max(c):.3e})")
    return np.linalg.solve(M, rhs)
