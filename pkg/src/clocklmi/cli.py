"""Command-line driver: plant files, bisection on ``t_max`` and alpha sweeps."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .lmi.analysis import RHO_GRID, DwellTimeSpec
from .pipeline import (MODES, SWEEP_MODES, DesignOutcome, DesignSettings, design, monte_carlo,
                       rho_priority)
from .sampled import SampledDataPlant, oscillator_example
from .sdp import export_sdpa
from .synth.plant import ImpulsivePlant

log = logging.getLogger("clocklmi")

CSV_COLUMNS = ["alpha", "mode", "tmax_star", "probes", "margin", "wall_seconds", "status"]


class PlantFileError(ValueError):
    """Schema or dimension problem in a plant file."""

    def __init__(self, message: str, field_name: str | None = None, line: int | None = None):
        where = []
        if field_name is not None:
            where.append(f"field {field_name!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.field_name = field_name
        self.line = line


class NoFeasiblePoint(RuntimeError):
    pass


# plant files ------------------------------------------------------------------

def _field_line(text: str, name: str) -> int | None:
    m = re.search(r'"%s"\s*:' % re.escape(name), text)
    return text.count("\n", 0, m.start()) + 1 if m else None


def _matrix(data: dict, name: str, text: str, required: bool = True):
    if name not in data:
        if required:
            raise PlantFileError("missing required field", name, None)
        return None
    v = data[name]
    line = _field_line(text, name)
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise PlantFileError("expected a non-empty list of rows", name, line)
    widths = {len(r) for r in v}
    if len(widths) != 1 or 0 in widths:
        raise PlantFileError(f"rows have unequal or zero lengths {sorted(widths)}", name, line)
    try:
        a = np.array(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise PlantFileError(f"non-numeric entry ({exc})", name, line) from None
    if not np.all(np.isfinite(a)):
        raise PlantFileError("non-finite entry", name, line)
    return a


def _number(data: dict, name: str, text: str, default=None) -> float:
    if name not in data:
        if default is None:
            raise PlantFileError("missing required field", name)
        return default
    v = data[name]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise PlantFileError("expected a number", name, _field_line(text, name))
    return float(v)


def parse_plant_text(text: str, t_min: float | None = None, t_max: float | None = None):
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise PlantFileError(f"invalid JSON: {exc.msg}", None, exc.lineno) from None
    if not isinstance(data, dict):
        raise PlantFileError("top level must be an object")
    kind = data.get("type")
    if kind is None:
        kind = "impulsive" if "C" in data else "sampled"
    if kind not in ("impulsive", "sampled"):
        raise PlantFileError("must be 'impulsive' or 'sampled'", "type", _field_line(text, "type"))
    tmin = _number(data, "t_min", text, t_min)
    tmax = _number(data, "t_max", text, t_max if t_max is not None else 10 * tmin)
    try:
        dwell = DwellTimeSpec(tmin, tmax)
    except ValueError as exc:
        raise PlantFileError(str(exc), "t_min") from None
    A = _matrix(data, "A", text)
    n = A.shape[0]
    try:
        if kind == "sampled":
            return SampledDataPlant(A, _matrix(data, "B", text), _matrix(data, "C_J", text), dwell)
        # absent input/output matrices mean "none": a single zero column or row
        B = _matrix(data, "B", text, False)
        C = _matrix(data, "C", text, False)
        AJ = _matrix(data, "A_J", text)
        BJ = _matrix(data, "B_J", text, False)
        CJ = _matrix(data, "C_J", text, False)
        return ImpulsivePlant(A, np.zeros((n, 1)) if B is None else B,
                              np.zeros((1, n)) if C is None else C, AJ,
                              np.zeros((n, 1)) if BJ is None else BJ,
                              np.zeros((1, n)) if CJ is None else CJ, dwell)
    except ValueError as exc:
        if isinstance(exc, PlantFileError):
            raise
        raise PlantFileError(str(exc)) from None


def parse_plant_file(path, t_min: float | None = None, t_max: float | None = None):
    """Read a JSON plant; ``t_min`` and ``t_max`` fill in absent fields."""
    text = Path(path).read_text()
    return parse_plant_text(text, t_min, t_max)


# jobs -----------------------------------------------------------------------------

@dataclass
class JobConfig:
    mode: str = "ltv"
    plant_path: str | None = None
    alpha: float | None = None
    t_min: float | None = None
    bisect_lo: float | None = None
    bisect_hi: float | None = None
    bisect_tol: float = 1e-2
    x_degree: int = 4
    mult_degree: int = 2
    eps: float = 0.1
    rho_grid: Sequence[float] = RHO_GRID
    grid_points: int = 201
    verify_grid: int = 1000
    seeds: int = 0
    out: str | None = None
    export_sdpa: str | None = None
    max_doublings: int = 6
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.bisect_tol > 0:
            raise ValueError("bisection tolerance must be positive")
        if (self.plant_path is None) == (self.alpha is None):
            raise ValueError("give exactly one of a plant file or the builtin example alpha")

    def source(self):
        if self.alpha is not None:
            tmin = self.t_min if self.t_min is not None else 0.25
            return oscillator_example(self.alpha, tmin, 10 * tmin)
        return parse_plant_file(self.plant_path, self.t_min)

    def settings(self) -> DesignSettings:
        return DesignSettings(self.x_degree, self.mult_degree, self.eps, tuple(self.rho_grid),
                              self.grid_points, self.verify_grid)

    def bracket(self, t_min: float) -> tuple[float, float]:
        lo = self.bisect_lo if self.bisect_lo is not None else t_min + 0.01
        hi = self.bisect_hi if self.bisect_hi is not None else 10 * t_min
        if not lo > t_min:
            raise ValueError(f"bracket low end {lo} must exceed t_min {t_min}")
        if not hi > lo:
            raise ValueError("bracket high end must exceed the low end")
        return lo, hi


@dataclass
class Probe:
    t_max: float
    status: str
    verified: bool
    margin: float
    verify_margin: float
    seconds: float
    rho: float | None = None
    detail: str = ""


@dataclass
class BisectionResult:
    tmax_star: float
    probes: list[Probe]
    status: str
    margin: float
    wall_seconds: float
    outcome: DesignOutcome | None = None
    simulation: object = None


def run_bisection(cfg: JobConfig, source=None) -> BisectionResult:
    """Largest verified-feasible ``t_max`` up to ``cfg.bisect_tol``."""
    source = source if source is not None else cfg.source()
    t_min = source.dwell.t_min
    lo, hi = cfg.bracket(t_min)
    s = cfg.settings()
    probes: list[Probe] = []
    state = {"rho": None}
    best: dict = {}
    start = time.perf_counter()

    def probe(T: float) -> bool:
        t0 = time.perf_counter()
        src = source.with_tmax(T)
        order = rho_priority(s.rho_grid, state["rho"])
        out = design(src, cfg.mode, s, rho_order=order)
        if out.feasible and out.rho is not None:
            state["rho"] = out.rho
        pr = Probe(T, str(out.status), out.verified, out.margin, out.verify_margin,
                   time.perf_counter() - t0, out.rho, out.detail)
        probes.append(pr)
        log.info("probe %s t_max=%.6g status=%s verified=%s margin=%.3g (%.1fs)", cfg.mode, T,
                 pr.status, pr.verified, pr.margin, pr.seconds)
        if cfg.export_sdpa and out.problem is not None:
            d = Path(cfg.export_sdpa)
            d.mkdir(parents=True, exist_ok=True)
            (d / f"{cfg.mode}_T{T:.6f}.dat-s").write_text(export_sdpa(out.problem))
        if out.feasible:
            best["T"], best["out"] = T, out
        return out.feasible

    if not probe(lo):
        wall = time.perf_counter() - start
        return BisectionResult(math.nan, probes, "NoFeasiblePoint", math.nan, wall)
    doublings = 0
    while probe(hi):
        lo = hi
        doublings += 1
        if doublings > cfg.max_doublings:
            wall = time.perf_counter() - start
            out = best["out"]
            return BisectionResult(lo, probes, "BracketCapReached", out.verify_margin, wall, out)
        hi *= 2.0
    while hi - lo > cfg.bisect_tol:
        mid = 0.5 * (lo + hi)
        if probe(mid):
            lo = mid
        else:
            hi = mid
    out = best["out"]
    res = BisectionResult(lo, probes, "ok", out.verify_margin, time.perf_counter() - start, out)
    if cfg.seeds > 0 and out.closed_loop is not None:
        mc = monte_carlo(out.closed_loop, range(cfg.seeds))
        res.simulation = mc
        if not mc.passed:
            res.status = "SimulationFailed"
    return res


def _job(args) -> dict:
    cfg, alpha = args
    res = run_bisection(cfg)
    return {"alpha": alpha, "mode": cfg.mode, "tmax_star": res.tmax_star,
            "probes": len(res.probes), "margin": res.margin,
            "wall_seconds": round(res.wall_seconds, 3), "status": res.status}


def run_sweep(cfg: JobConfig, alphas: Sequence[float], modes: Sequence[str],
              workers: int = 1) -> list[dict]:
    """One bisection per ``(alpha, mode)``; rows are ordered by alpha then mode."""
    if not alphas:
        raise ValueError("alpha list is empty")
    jobs = [(replace(cfg, alpha=float(a), mode=m, plant_path=None), float(a))
            for a in alphas for m in modes]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(_job, jobs))
    else:
        rows = [_job(j) for j in jobs]
    return rows


def write_rows(rows: list[dict], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


# entry point ------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="clocklmi", description=(
        "Clock-dependent output-feedback design for impulsive systems: bisection on the "
        "largest admissible dwell time and alpha sweeps."))
    p.add_argument("--mode", nargs="+", default=["ltv"], choices=MODES,
                   help="design mode(s); several modes run a sweep")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--plant", help="JSON plant file")
    src.add_argument("--paper-example", nargs="+", type=float, metavar="ALPHA",
                     help="builtin oscillator example for the given alpha value(s)")
    p.add_argument("--tmin", type=float, default=None)
    p.add_argument("--bisect-lo", type=float, default=None)
    p.add_argument("--bisect-hi", type=float, default=None)
    p.add_argument("--bisect-tol", type=float, default=1e-2)
    p.add_argument("--degree", type=int, default=4)
    p.add_argument("--mult-degree", type=int, default=2)
    p.add_argument("--eps", type=float, default=0.1)
    p.add_argument("--rho-grid", type=float, nargs="+", default=list(RHO_GRID))
    p.add_argument("--grid-points", type=int, default=201)
    p.add_argument("--seeds", type=int, default=0,
                   help="Monte-Carlo simulations of the final design (0 skips)")
    p.add_argument("--out", help="CSV output path")
    p.add_argument("--export-sdpa", metavar="DIR", help="write every probe SDP in SDPA format")
    p.add_argument("--verify-grid", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(message)s")
    alphas = args.paper_example or [None]
    base = dict(plant_path=args.plant, t_min=args.tmin, bisect_lo=args.bisect_lo,
                bisect_hi=args.bisect_hi, bisect_tol=args.bisect_tol, x_degree=args.degree,
                mult_degree=args.mult_degree, eps=args.eps, rho_grid=tuple(args.rho_grid),
                grid_points=args.grid_points, verify_grid=args.verify_grid, seeds=args.seeds,
                out=args.out, export_sdpa=args.export_sdpa)
    try:
        if len(alphas) > 1 or len(args.mode) > 1:
            if args.plant:
                raise ValueError("sweeps need --paper-example")
            cfg = JobConfig(mode=args.mode[0], alpha=alphas[0], **base)
            rows = run_sweep(cfg, alphas, args.mode, args.workers)
        else:
            cfg = JobConfig(mode=args.mode[0], alpha=alphas[0], **base)
            res = run_bisection(cfg)
            for pr in res.probes:
                print(f"probe t_max={pr.t_max:.6f} status={pr.status} verified={pr.verified} "
                      f"margin={pr.margin:.4g} verify_margin={pr.verify_margin:.4g} "
                      f"rho={pr.rho} seconds={pr.seconds:.2f}")
            rows = [{"alpha": alphas[0] if alphas[0] is not None else "", "mode": cfg.mode,
                     "tmax_star": res.tmax_star, "probes": len(res.probes), "margin": res.margin,
                     "wall_seconds": round(res.wall_seconds, 3), "status": res.status}]
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    w = csv.DictWriter(sys.stdout, fieldnames=CSV_COLUMNS)
    w.writeheader()
    for r in rows:
        w.writerow(r)
    if args.out:
        write_rows(rows, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
