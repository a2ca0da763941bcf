"""Clock-dependent LMI conditions compiled to semidefinite programs."""
from .analysis import (RHO_GRID, AnalysisResult, DwellTimeSpec, GridMargins, analyze_clock_lyapunov,
                       analyze_svariable, lyapunov_grid_margins, svariable_grid_margins, sweep_rho)
from .expr import AffPoly, Program, bmat
from .relax import ClockConstraint, Relaxation, compile_program, relax_interval_negativity

__all__ = ["AffPoly", "AnalysisResult", "ClockConstraint", "DwellTimeSpec", "GridMargins",
           "Program", "RHO_GRID", "Relaxation", "analyze_clock_lyapunov", "analyze_svariable",
           "bmat", "compile_program", "lyapunov_grid_margins", "relax_interval_negativity",
           "svariable_grid_margins", "sweep_rho"]
