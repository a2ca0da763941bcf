"""Semidefinite feasibility problems: assembly, solution and SDPA exchange."""
from .problem import (Block, ResidualReport, SdpProblem, SdpSolution, SolverOptions, Status,
                      check_residuals)
from .sdpa import export_sdpa, parse_sdpa


def solve(p: SdpProblem, opts: SolverOptions | None = None) -> SdpSolution:
    """Solve ``p``; feasibility problems (zero objective) maximize the block margin."""
    opts = opts or SolverOptions()
    if not p.blocks:
        raise ValueError("problem has no blocks")
    if p.total_size > opts.size_cap:
        raise ValueError(f"total block dimension {p.total_size} exceeds cap {opts.size_cap}")
    if opts.backend == "cvxopt":
        from .cvxopt_backend import solve_cvxopt
        return solve_cvxopt(p, opts)
    from .ipm import solve_ipm
    return solve_ipm(p, opts)


__all__ = ["Block", "ResidualReport", "SdpProblem", "SdpSolution", "SolverOptions", "Status",
           "check_residuals", "export_sdpa", "parse_sdpa", "solve"]
