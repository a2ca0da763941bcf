"""Design-then-verify runs shared by the command line and the test-suite.

A design only counts as feasible when the reconstructed closed loop passes
the pointwise certificate check.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .lmi.analysis import RHO_GRID, analyze_clock_lyapunov
from .sampled import SampledDataPlant, lift_sampled, unheld_plant
from .sdp import SolverOptions, Status
from .sim import estimate_decay, sample_dwell, simulate
from .synth import (Certificate, ClosedLoop, NearSingularCompletion, PointwiseInfeasible,
                    SingularReconstruction, close_loop, ltv_certificate, reconstruct_from_xy,
                    reconstruct_ltv_controller, synth_elim_ltv, synth_transform_ltv,
                    verify_certificate)
from .synth.lti import lti_certificate, reconstruct_lti_controller, synth_lti
from .synth.plant import ImpulsivePlant

log = logging.getLogger(__name__)

MODES = ("analyze", "synth-ltv-transform", "synth-ltv-elim", "synth-lti", "sampled",
         "ltv", "lti", "ltv+hold", "lti+hold")
SWEEP_MODES = ("ltv", "lti", "ltv+hold", "lti+hold")


@dataclass
class DesignSettings:
    x_degree: int = 4
    mult_degree: int = 2
    eps: float = 0.1
    rho_grid: Sequence[float] = RHO_GRID
    grid_points: int = 201
    verify_grid: int = 1000
    solver: SolverOptions | None = None


@dataclass
class DesignOutcome:
    """Result of one design at a fixed ``t_max``."""

    status: Status
    verified: bool
    margin: float
    verify_margin: float = float("nan")
    closed_loop: ClosedLoop | None = None
    certificate: Certificate | None = None
    plant: ImpulsivePlant | None = None
    rho: float | None = None
    detail: str = ""
    problem: object = None  # SdpProblem of the (last) solve, for export
    extra: dict = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status is Status.FEASIBLE and self.verified


def resolve_plant(source, mode: str) -> ImpulsivePlant:
    """Impulsive plant a mode works on.

    A sampled-data source is lifted (held input) for the ``+hold`` modes and
    the named synthesis modes, and used without hold for ``ltv`` and ``lti``.
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {', '.join(MODES)}")
    if isinstance(source, SampledDataPlant):
        if mode in ("ltv", "lti"):
            return unheld_plant(source)
        if mode == "analyze":
            raise ValueError("analyze mode needs an impulsive plant")
        return lift_sampled(source)
    if mode in ("ltv+hold", "lti+hold", "sampled"):
        raise ValueError(f"mode {mode!r} needs a sampled-data plant")
    return source


def with_tmax(source, t_max: float):
    return source.with_tmax(t_max)


def _verify(cl, cert, s: DesignSettings):
    rep = verify_certificate(cl, cert, s.verify_grid, s.eps)
    return rep.passed, rep.margin, rep


def design(source, mode: str, s: DesignSettings | None = None,
           rho_order: Sequence[float] | None = None) -> DesignOutcome:
    """Run the design for ``mode`` at the source's current dwell range and verify it."""
    s = s or DesignSettings()
    plant = resolve_plant(source, mode)
    route = {"synth-ltv-elim": "elim", "ltv": "elim", "ltv+hold": "elim", "sampled": "elim",
             "synth-ltv-transform": "transform", "synth-lti": "lti", "lti": "lti",
             "lti+hold": "lti", "analyze": "analyze"}[mode]
    if route == "analyze":
        return _design_analyze(plant, s)
    if route == "elim":
        return _design_elim(plant, s)
    if route == "transform":
        return _design_transform(plant, s)
    return _design_lti(plant, s, rho_order)


def _design_analyze(plant: ImpulsivePlant, s: DesignSettings) -> DesignOutcome:
    r = analyze_clock_lyapunov(plant.A, plant.A_J, plant.dwell, s.x_degree, s.mult_degree, s.eps,
                               s.solver, verify_grid=0)
    out = DesignOutcome(r.status, False, r.margin, plant=plant, problem=r.problem,
                        detail=r.solution.message if r.solution else "")
    if r.feasible:
        cl = ClosedLoop.constant(plant.A, plant.A_J, plant.dwell)
        cert = Certificate.from_poly(r.X)
        out.verified, out.verify_margin, _ = _verify(cl, cert, s)
        out.closed_loop, out.certificate = cl, cert
    return out


def _design_elim(plant: ImpulsivePlant, s: DesignSettings) -> DesignOutcome:
    r = synth_elim_ltv(plant, s.x_degree, s.mult_degree, s.eps, s.solver)
    out = DesignOutcome(r.status, False, r.margin, plant=plant, problem=r.program.problem,
                        detail=r.solution.message)
    if r.feasible:
        X, Y = r.variables
        try:
            ctrl = reconstruct_from_xy(X, Y, plant, s.grid_points)
        except (PointwiseInfeasible, NearSingularCompletion, SingularReconstruction) as exc:
            out.detail = f"reconstruction failed: {exc}"
            return out
        cl = close_loop(plant, ctrl)
        cert = Certificate(*ltv_certificate(X, Y))
        out.verified, out.verify_margin, _ = _verify(cl, cert, s)
        out.closed_loop, out.certificate = cl, cert
        out.extra["controller"] = ctrl
    return out


def _design_transform(plant: ImpulsivePlant, s: DesignSettings) -> DesignOutcome:
    r = synth_transform_ltv(plant, s.x_degree, s.mult_degree, s.eps, s.solver)
    out = DesignOutcome(r.status, False, r.margin, plant=plant, problem=r.program.problem,
                        detail=r.solution.message)
    if r.feasible:
        try:
            ctrl = reconstruct_ltv_controller(r.variables, plant)
        except (NearSingularCompletion, SingularReconstruction) as exc:
            out.detail = f"reconstruction failed: {exc}"
            return out
        cl = close_loop(plant, ctrl)
        cert = Certificate(*ltv_certificate(r.variables.X, r.variables.Y))
        out.verified, out.verify_margin, _ = _verify(cl, cert, s)
        out.closed_loop, out.certificate = cl, cert
        out.extra["controller"] = ctrl
    return out


def _design_lti(plant: ImpulsivePlant, s: DesignSettings,
                rho_order: Sequence[float] | None) -> DesignOutcome:
    """Try ``rho`` values in order; the first verified design wins."""
    last = None
    for rho in (rho_order if rho_order is not None else s.rho_grid):
        r = synth_lti(plant, s.x_degree, s.mult_degree, s.eps, rho, s.solver)
        out = DesignOutcome(r.status, False, r.margin, plant=plant, rho=float(rho),
                            problem=r.program.problem, detail=r.solution.message)
        last = out
        if not r.feasible:
            continue
        try:
            ctrl = reconstruct_lti_controller(r.variables, plant)
        except SingularReconstruction as exc:
            out.detail = f"reconstruction failed: {exc}"
            continue
        cl = close_loop(plant, ctrl)
        calX, *_ = lti_certificate(r.variables)
        cert = Certificate.from_poly(calX)
        out.verified, out.verify_margin, _ = _verify(cl, cert, s)
        out.closed_loop, out.certificate = cl, cert
        out.extra["controller"] = ctrl
        if out.verified:
            return out
    return last


def rho_priority(grid: Sequence[float], last: float | None) -> list[float]:
    """Grid reordered to start at ``last`` and fan out to its neighbours."""
    grid = list(grid)
    if last is None or last not in grid:
        return grid
    i = grid.index(last)
    order = [grid[i]]
    for k in range(1, len(grid)):
        for j in (i + k, i - k):
            if 0 <= j < len(grid):
                order.append(grid[j])
    return order


@dataclass
class MonteCarloReport:
    gammas: np.ndarray
    ratios: np.ndarray
    diverged: int

    @property
    def passed(self) -> bool:
        return self.diverged == 0 and bool(np.all(self.gammas > 0)) and bool(
            np.all(self.ratios <= 1e-2))


def monte_carlo(cl: ClosedLoop, seeds: Sequence[int], horizon_factor: float = 50.0,
                step: float | None = None, x0=None) -> MonteCarloReport:
    """Simulate ``cl`` under seeded random dwell sequences over ``horizon_factor * t_max``."""
    dwell = cl.dwell
    horizon = horizon_factor * dwell.t_max
    step = step or dwell.t_min / 50
    gammas, ratios, div = [], [], 0
    for seed in seeds:
        rng = np.random.default_rng(10_000 + int(seed))
        x = rng.standard_normal(cl.size) if x0 is None else np.asarray(x0, dtype=float)
        seq = sample_dwell(dwell, horizon, seed)
        tr = simulate(cl.flow, cl.jump, x, seq, step, horizon)
        if tr.diverged:
            div += 1
            gammas.append(-math.inf)
            ratios.append(math.inf)
            continue
        gammas.append(estimate_decay(tr).gamma_hat)
        ratios.append(float(np.linalg.norm(tr.final_state) / np.linalg.norm(x)))
    return MonteCarloReport(np.array(gammas), np.array(ratios), div)
