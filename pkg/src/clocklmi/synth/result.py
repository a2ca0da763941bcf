from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

from ..lmi.relax import CompiledProgram
from ..sdp import SdpSolution, SolverOptions, Status, check_residuals, solve


@dataclass
class SynthResult:
    """Outcome of one synthesis SDP."""

    status: Status
    margin: float
    variables: Any
    nvars: int
    ndecision: int
    condition_margins: dict = field(default_factory=dict)
    solution: SdpSolution | None = None
    program: CompiledProgram | None = None

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE


def solve_program(cp: CompiledProgram, opts: SolverOptions | None):
    sol = solve(cp.problem, opts)
    rep = check_residuals(cp.problem, sol)
    cond: dict = {}
    for name, mg in zip(rep.names, rep.margins):
        key = name.split("/")[0]
        cond[key] = min(cond.get(key, math.inf), mg)
    return sol, cond
