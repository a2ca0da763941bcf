import numpy as np
import pytest
from scipy.linalg import expm

from clocklmi.lmi.analysis import DwellTimeSpec
from clocklmi.sampled import (SampledDataPlant, lift_sampled, oscillator_example, synth_sampled,
                              unheld_plant)
from clocklmi.sim import POST_JUMP, PRE_JUMP, DwellSequence, simulate
from clocklmi.synth import LtiController, close_loop, kernel_basis, synth_elim_ltv
from clocklmi.synth.elim import elim_program

DW = DwellTimeSpec(0.25, 0.3)


def test_lift_structure():
    sd = oscillator_example(2.0)
    pl = lift_sampled(sd)
    assert pl.n == 3
    assert np.array_equal(pl.A, [[0.5, 2.0, 0.0], [-2.0, 0.5, 1.0], [0.0, 0.0, 0.0]])
    assert np.array_equal(pl.A_J, np.diag([1.0, 1.0, 0.0]))
    assert np.array_equal(pl.B_J, [[0.0], [0.0], [1.0]])
    assert np.array_equal(pl.C_J, [[1.0, 0.0, 0.0]])
    assert not pl.B.any() and not pl.C.any()


def test_lift_zero_input_matrix():
    A = np.array([[0.0, 1.0], [-1.0, 0.0]])
    pl = lift_sampled(SampledDataPlant(A, np.zeros((2, 1)), [[1.0, 0.0]], DW))
    expected = np.zeros((3, 3))
    expected[:2, :2] = A
    assert np.array_equal(pl.A, expected)


def test_unheld_plant_structure():
    sd = oscillator_example(1.0)
    pl = unheld_plant(sd)
    assert np.array_equal(pl.A, sd.A) and np.array_equal(pl.B, sd.B)
    assert np.array_equal(pl.A_J, np.eye(2)) and np.array_equal(pl.C_J, sd.C_J)
    assert not pl.B_J.any() and not pl.C.any()


def test_sampled_plant_validation():
    with pytest.raises(ValueError):
        SampledDataPlant(np.eye(2), np.zeros((3, 1)), [[1.0, 0.0]], DW)


def test_projected_jump_conditions_match_structured_forms():
    sd = oscillator_example(1.0)
    pl = lift_sampled(sd)
    n, p = sd.n, sd.p
    VJ = kernel_basis(sd.C_J)
    VJ_lift = np.block([[VJ, np.zeros((n, p))], [np.zeros((p, VJ.shape[1])), np.eye(p)]])
    UJ_lift = np.vstack([np.eye(n), np.zeros((p, n))])
    eye = np.eye(n + p)
    bases = (eye, eye, UJ_lift, VJ_lift)
    prog, (X, Y), cons = elim_program(pl, 4, 0.1, bases)
    by_name = {c.name: c for c in cons}
    rng = np.random.default_rng(0)
    for _ in range(5):
        y = rng.standard_normal(prog.nvars)
        Xv, Yv = X.value(y), Y.value(y)
        X0, Y0 = Xv.eval(0.0), Yv.eval(0.0)
        for s in rng.uniform(pl.dwell.t_min / pl.dwell.t_max, 1.0, 10):
            Xs, Ys = Xv.eval(s), Yv.eval(s)
            lhs = by_name["jump_x"].expr.value(y).eval(s)
            top = np.zeros((n + p, n + p))
            top[:n, :n] = X0[:n, :n]
            rhs = VJ_lift.T @ (top - Xs) @ VJ_lift
            assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, np.abs(rhs).max()))
            lhs = by_name["jump_y"].expr.value(y).eval(s)
            rhs = -(Y0[:n, :n] - Ys[:n, :n])
            assert np.allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, np.abs(rhs).max()))


def test_oscillator_alpha_one_feasible():
    r = synth_sampled(oscillator_example(1.0, 0.25, 0.3))
    assert r.feasible
    X, Y = r.variables
    assert X.rows == 3 and Y.rows == 3


def test_stable_plant_feasible():
    sd = SampledDataPlant(-np.eye(2), np.array([[1.0], [2.0]]), np.eye(2), DW)
    assert synth_sampled(sd).feasible


def test_equivalence_with_generic_elimination():
    cases = [oscillator_example(1.0),
             SampledDataPlant(np.eye(2), np.zeros((2, 1)), [[1.0, 0.0]], DW)]
    statuses = []
    for sd in cases:
        a = synth_sampled(sd).status
        assert a is synth_elim_ltv(lift_sampled(sd)).status
        statuses.append(a)
    assert statuses[0] is not statuses[1]  # one feasible, one not


def test_hold_semantics_in_simulation(rng):
    sd = oscillator_example(1.0)
    pl = lift_sampled(sd)
    nc = pl.n
    ctrl = LtiController(rng.standard_normal((nc + 1, nc + 1)) * 0.3,
                         rng.standard_normal((nc + 1, nc + 1)) * 0.3, nc)
    cl = close_loop(pl, ctrl)
    seq = DwellSequence(rng.uniform(0.25, 0.3, 12), sd.dwell)
    x0 = rng.standard_normal(cl.size)
    tr = simulate(cl.flow, cl.jump, x0, seq, 1e-3)
    u = tr.states[:, sd.n]
    # u is exactly constant between a post-jump sample and the next pre-jump sample
    starts = np.r_[0, np.flatnonzero(tr.flags == POST_JUMP)]
    ends = np.r_[np.flatnonzero(tr.flags == PRE_JUMP), tr.flags.size - 1]
    for a, b in zip(starts, ends):
        assert np.all(u[a:b + 1] == u[a])
    # plant state matches the exact zero-order-hold transition
    M = np.zeros((3, 3))
    M[:2, :2], M[:2, 2:] = sd.A, sd.B
    for (t, pre, _), gap, (_, _, post) in zip(tr.jumps()[1:], seq.gaps[1:], tr.jumps()[:-1]):
        z = expm(M * gap) @ post[:3]
        assert np.allclose(pre[:3], z, rtol=1e-9, atol=1e-9)
