"""Sampled-data plants with a zero-order hold, viewed as impulsive systems.

The held input becomes an extra state that is reset at every sampling
instant, which turns the sampled-data loop into an impulsive plant.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lmi.analysis import DwellTimeSpec
from .sdp import SolverOptions
from .synth.elim import synth_elim_ltv
from .synth.plant import ImpulsivePlant, _mat
from .synth.result import SynthResult

__all__ = ["SampledDataPlant", "lift_sampled", "unheld_plant", "synth_sampled",
           "oscillator_example"]


@dataclass(frozen=True)
class SampledDataPlant:
    """``dx = A x + B u`` with ``u`` held between samples and ``y_J(k) = C_J x(t_k^-)``."""

    A: np.ndarray
    B: np.ndarray
    C_J: np.ndarray
    dwell: DwellTimeSpec

    def __post_init__(self):
        for name in ("A", "B", "C_J"):
            object.__setattr__(self, name, _mat(getattr(self, name), name))
        n = self.A.shape[0]
        if self.A.shape != (n, n) or self.B.shape[0] != n or self.C_J.shape[1] != n:
            raise ValueError("dimension mismatch: need A n x n, B n x p, C_J q_J x n")

    @property
    def n(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    def with_tmax(self, t_max: float) -> "SampledDataPlant":
        return SampledDataPlant(self.A, self.B, self.C_J, self.dwell.with_tmax(t_max))


def lift_sampled(sd: SampledDataPlant) -> ImpulsivePlant:
    """Impulsive plant with state ``(x, u)``; the controller writes the new hold value at jumps."""
    n, p = sd.n, sd.p
    N = n + p
    A = np.zeros((N, N))
    A[:n, :n] = sd.A
    A[:n, n:] = sd.B
    AJ = np.zeros((N, N))
    AJ[:n, :n] = np.eye(n)
    BJ = np.zeros((N, p))
    BJ[n:, :] = np.eye(p)
    CJ = np.hstack([sd.C_J, np.zeros((sd.C_J.shape[0], p))])
    # no flow input and no flow measurement: single zero column / row
    return ImpulsivePlant(A, np.zeros((N, 1)), np.zeros((1, N)), AJ, BJ, CJ, sd.dwell)


def unheld_plant(sd: SampledDataPlant) -> ImpulsivePlant:
    """Same sensing without the hold: ``u`` is a free continuous input.

    The plant has no continuous measurement and an identity jump without
    jump input; only the samples ``C_J x(t_k^-)`` reach the controller.
    """
    n = sd.n
    return ImpulsivePlant(sd.A, sd.B, np.zeros((1, n)), np.eye(n), np.zeros((n, 1)), sd.C_J,
                          sd.dwell)


def synth_sampled(sd: SampledDataPlant, x_degree: int = 4, mult_degree: int = 2,
                  eps: float = 0.1, opts: SolverOptions | None = None) -> SynthResult:
    """Structured elimination conditions for the held loop.

    On the lifted plant the flow projections are full (no flow input or
    measurement) and the jump projections reduce to
    ``diag(V_J, I)^T (diag(X_1(0), 0) - X(tau)) diag(V_J, I) < 0`` and
    ``Y_1(0) - Y_1(tau) > 0``.
    """
    return synth_elim_ltv(lift_sampled(sd), x_degree, mult_degree, eps, opts)


def oscillator_example(alpha: float, t_min: float = 0.25, t_max: float = 0.3) -> SampledDataPlant:
    """Rotating unstable oscillator sampled through its first state."""
    A = np.array([[0.5, alpha], [-alpha, 0.5]])
    return SampledDataPlant(A, np.array([[0.0], [1.0]]), np.array([[1.0, 0.0]]),
                            DwellTimeSpec(t_min, t_max))
