"""Pointwise re-verification of closed-loop Lyapunov certificates."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..lmi.analysis import GridMargins, lyapunov_grid_margins
from ..polymat import PolyMat
from .plant import ClosedLoop


@dataclass(frozen=True)
class Certificate:
    """Clock-dependent certificate ``X(tau)`` with its derivative, both vectorized."""

    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def from_poly(cls, X: PolyMat) -> "Certificate":
        return cls(X.eval_grid, X.derivative().eval_grid)

    @classmethod
    def constant(cls, X) -> "Certificate":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return cls.from_poly(PolyMat.constant(X))


@dataclass
class VerificationReport:
    """Grid extremes of the three Lyapunov conditions.

    The conditions are homogeneous in the certificate, so ``scale`` is the
    positive factor applied before comparing against ``+-eps/2``; a strict
    certificate can always be scaled to clear the threshold.
    """

    raw: GridMargins
    scale: float
    eps: float
    grid_size: int

    @property
    def scaled(self) -> GridMargins:
        s = self.scale
        return GridMargins(s * self.raw.x_min, s * self.raw.flow_max, s * self.raw.jump_max)

    @property
    def passed(self) -> bool:
        return self.raw.strict and self.scaled.passes(self.eps)

    @property
    def margin(self) -> float:
        """Smallest raw slack over the three conditions (positive when strict)."""
        return min(self.raw.x_min, -self.raw.flow_max, -self.raw.jump_max)

    @property
    def failing(self) -> str | None:
        return None if self.passed else self.raw.worst()


def verify_certificate(cl: ClosedLoop, cert: Certificate, grid_size: int = 1000,
                       eps: float = 0.1) -> VerificationReport:
    """Check positivity, flow decrease and jump decrease of ``cert`` for ``cl`` on a grid."""
    X0 = cert.value(np.array([0.0]))
    if X0.shape[-1] != cl.size:
        raise ValueError(f"certificate size {X0.shape[-1]} does not match closed loop {cl.size}")
    raw = lyapunov_grid_margins(cl.flow, cl.jump, cert.value, cert.derivative, cl.dwell, grid_size)
    scale = 1.0
    if raw.strict and not raw.passes(eps):
        scale = eps / min(raw.x_min, -raw.flow_max, -raw.jump_max)
    return VerificationReport(raw, scale, eps, grid_size)
