"""Simulation of impulsive systems under admissible jump sequences."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .lmi.analysis import DwellTimeSpec

__all__ = ["DwellSequence", "Trajectory", "DecayEstimate", "sample_dwell", "simulate",
           "estimate_decay", "scalar_oracle", "FLOW", "PRE_JUMP", "POST_JUMP"]

FLOW, PRE_JUMP, POST_JUMP = 0, -1, 1
_DIVERGED = 1e150


@dataclass(frozen=True)
class DwellSequence:
    """Gaps between consecutive jumps; jump ``k`` happens at ``sum(gaps[:k + 1])``."""

    gaps: np.ndarray
    dwell: DwellTimeSpec | None = None

    def __post_init__(self):
        g = np.asarray(self.gaps, dtype=float).ravel()
        if g.size and not np.all(g > 0):
            raise ValueError("gaps must be positive")
        if self.dwell is not None and g.size:
            tol = 1e-12 * self.dwell.t_max
            if g.min() < self.dwell.t_min - tol or g.max() > self.dwell.t_max + tol:
                raise ValueError("gap outside the dwell-time range")
        g.setflags(write=False)
        object.__setattr__(self, "gaps", g)

    @property
    def jump_times(self) -> np.ndarray:
        return np.cumsum(self.gaps)

    @classmethod
    def periodic(cls, gap: float, count: int) -> "DwellSequence":
        return cls(np.full(count, float(gap)))


def sample_dwell(dwell: DwellTimeSpec, horizon: float, seed=None) -> DwellSequence:
    """Uniform i.i.d. gaps on ``[t_min, t_max]`` until they cover ``horizon``."""
    if not horizon > 0:
        raise ValueError("horizon must be positive")
    rng = np.random.default_rng(seed)
    chunk = int(math.ceil(horizon / dwell.t_min)) + 1
    gaps = rng.uniform(dwell.t_min, dwell.t_max, size=chunk)
    k = int(np.searchsorted(np.cumsum(gaps), horizon)) + 1
    return DwellSequence(gaps[:k], dwell)


@dataclass
class Trajectory:
    """Samples of a simulated trajectory.

    ``flags`` marks ordinary flow samples (0), the state just before a jump
    (-1) and just after it (+1); jump samples share their time stamp.
    """

    times: np.ndarray
    states: np.ndarray
    flags: np.ndarray
    diverged: bool = False

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.states, axis=1)

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]

    def jumps(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """``(time, pre, post)`` for every jump."""
        pre = np.flatnonzero(self.flags == PRE_JUMP)
        return [(float(self.times[i]), self.states[i], self.states[i + 1]) for i in pre
                if i + 1 < self.flags.size and self.flags[i + 1] == POST_JUMP]

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time", "pre_post_flag"] + [f"x{i}" for i in range(n)] + ["norm"])
            for t, f, x, nx in zip(self.times, self.flags, self.states, self.norms):
                w.writerow([repr(float(t)), int(f)] + [repr(float(v)) for v in x] + [repr(float(nx))])


def simulate(flow: Callable, jump: Callable, x0, seq: DwellSequence, step: float,
             horizon: float | None = None) -> Trajectory:
    """Integrate ``x' = flow(theta) x`` between jumps and apply ``x+ = jump(theta-) x``.

    ``flow`` and ``jump`` map an array of clock values to a stack of matrices
    (for example the methods of a closed loop).  The last step of each
    interval is shortened to land on the jump instant.  Jumps at or after
    ``horizon`` (default: the end of the sequence) are not applied.
    """
    if not step > 0:
        raise ValueError("step must be positive")
    if seq.dwell is not None and step > seq.dwell.t_min / 10 * (1 + 1e-12):
        raise ValueError("step must not exceed t_min / 10")
    x = np.array(x0, dtype=float).ravel()
    n = x.size
    gaps = seq.gaps
    end = float(np.sum(gaps)) if horizon is None else float(horizon)
    times, states, flags = [np.array([0.0])], [x[None, :].copy()], [np.array([FLOW])]
    t0 = 0.0
    diverged = False
    # every interval restarts the clock at 0, so one table on the half-step grid serves all
    longest = float(gaps.max(initial=0.0))
    nmax = int(math.floor(longest / step * (1 + 1e-12)))
    table = np.ascontiguousarray(flow(np.arange(2 * nmax + 1) * (step / 2.0)), dtype=float)
    jumps = np.ascontiguousarray(jump(gaps), dtype=float) if gaps.size else None
    for i, g in enumerate(gaps):
        if t0 >= end:
            break
        span = min(g, end - t0)
        nfull = int(math.floor(span / step * (1 + 1e-12)))
        rem = span - nfull * step
        if rem <= 1e-12 * span:
            rem = 0.0
        out = np.empty((nfull + 1, n))
        kernels.rk4_steps(table[:2 * nfull + 1], x, nfull, step, out)
        seg_t = t0 + np.arange(1, nfull + 1) * step
        seg_x = out[1:]
        x = out[-1].copy()
        if rem > 0:
            a = flow(np.array([nfull * step, nfull * step + rem / 2.0, span]))
            a = np.ascontiguousarray(a, dtype=float)
            x = np.asarray(kernels.rk4_step(a[0], a[1], a[2], x, rem))
            seg_t = np.append(seg_t, t0 + span)
            seg_x = np.vstack([seg_x, x])
        bad = ~np.all(np.isfinite(seg_x), axis=1) | (np.abs(seg_x).max(axis=1, initial=0.0)
                                                      > _DIVERGED)
        if np.any(bad):
            cut = int(np.argmax(bad))
            times.append(seg_t[:cut])
            states.append(seg_x[:cut])
            flags.append(np.zeros(cut, dtype=int))
            diverged = True
            break
        seg_f = np.zeros(seg_t.size, dtype=int)
        reached_jump = span == g and t0 + g < end * (1 - 1e-12)
        if reached_jump:
            seg_f[-1] = PRE_JUMP
            x = jumps[i] @ x
            seg_t = np.append(seg_t, t0 + g)
            seg_x = np.vstack([seg_x, x])
            seg_f = np.append(seg_f, POST_JUMP)
        times.append(seg_t)
        states.append(seg_x)
        flags.append(seg_f)
        t0 += span
    return Trajectory(np.concatenate(times), np.vstack(states), np.concatenate(flags), diverged)


@dataclass(frozen=True)
class DecayEstimate:
    """Fit ``||x(t)|| ~ m_hat * exp(-gamma_hat * t)``."""

    gamma_hat: float
    m_hat: float
    r2: float
    zero_trajectory: bool = False


def estimate_decay(traj: Trajectory, keep: float = 0.8) -> DecayEstimate:
    """Least squares on ``log ||x||`` over the last ``keep`` fraction of samples.

    A trajectory that reaches (numerically) zero is reported with
    ``gamma_hat = inf`` and ``zero_trajectory`` set.
    """
    t, nx = traj.times, traj.norms
    if t.size < 20:
        raise ValueError("need at least 20 samples")
    if not np.all(np.isfinite(nx)):
        raise ValueError("trajectory has non-finite samples")
    if nx[0] == 0:
        raise ValueError("initial state is zero")
    start = int(math.floor((1.0 - keep) * t.size))
    t, nx = t[start:], nx[start:]
    if np.any(nx < 1e-300):
        return DecayEstimate(math.inf, 0.0, 1.0, zero_trajectory=True)
    y = np.log(nx)
    slope, icpt = np.polyfit(t, y, 1)
    resid = y - (slope * t + icpt)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else 1.0 - float(np.sum(resid ** 2)) / ss_tot
    return DecayEstimate(float(-slope), float(math.exp(icpt)), r2)


def scalar_oracle(a: float, c: float, dwell: DwellTimeSpec) -> bool:
    """Worst-case contraction ``|c| exp(a T) < 1`` of the scalar jump-to-jump map."""
    if c == 0:
        return True
    T = dwell.t_max if a >= 0 else dwell.t_min
    return abs(c) * math.exp(a * T) < 1.0
