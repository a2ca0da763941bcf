import numpy as np
import pytest

from clocklmi.lmi.analysis import (DwellTimeSpec, analyze_clock_lyapunov, analyze_svariable,
                                   lyapunov_grid_margins)
from clocklmi.lmi.expr import AffPoly, Program
from clocklmi.lmi.relax import (ClockConstraint, compile_program, relax_interval_negativity,
                                sos_degrees)
from clocklmi.polymat import PolyMat, gram_realize
from clocklmi.sdp import Status, solve


def const_constraint(coeffs, interval, eps):
    """Constraint on a fixed polynomial matrix (no decision variables)."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim == 1:
        c = c[:, None, None]
    T = c[..., None]  # width 1: constant column only
    return ClockConstraint(AffPoly(T), interval, eps)


def feasible(c: ClockConstraint) -> bool:
    prog = Program()
    prog.scalar()  # one dummy decision variable
    cp = compile_program(prog, [c], 2)
    return solve(cp.problem).status is Status.FEASIBLE


def test_relax_scalar_examples():
    assert feasible(const_constraint([-2.0, 1.0], (0.0, 1.0), 0.1))
    assert not feasible(const_constraint([-0.5, 1.0], (0.0, 1.0), 0.1))


def test_relax_matrix_example_against_grid():
    c = np.zeros((2, 2, 2))
    c[0] = [[-3.0, 1.0], [1.0, -1.0]]
    c[1, 0, 0] = 1.0
    taus = np.linspace(0, 1, 1000)
    lam = [np.linalg.eigvalsh(c[0] + t * c[1])[-1] for t in taus]
    assert max(lam) < -0.01  # grid oracle
    assert feasible(const_constraint(c, (0.0, 1.0), 0.01))


def test_relaxation_identity_holds():
    # -F - eps I = S0 + g S1 coefficientwise with the returned Gram blocks
    prog = Program()
    x = prog.scalar()
    F = x + AffPoly.const(PolyMat(np.array([-1.0, 0.5]).reshape(2, 1, 1)), nvars=1)
    c = ClockConstraint(F, (0.2, 0.9), 0.05)
    r = relax_interval_negativity(c, 2, prog.nvars)
    y = np.zeros(prog.nvars + r.nnew)
    y[0] = -1.0
    G0, G1 = r.grams(y)
    S0, S1 = gram_realize(G0), gram_realize(G1)
    for tau in np.linspace(0, 2, 7):
        g = (tau - 0.2) * (0.9 - tau)
        lhs = -(-1.0 + 0.5 * tau - 1.0) - 0.05
        assert S0.eval(tau)[0, 0] + g * S1.eval(tau)[0, 0] == pytest.approx(lhs, abs=1e-12)


def test_sos_degree_rule():
    assert sos_degrees(4, 2) == (2, 1)
    assert sos_degrees(3, 2) == (2, 1)
    assert sos_degrees(6, 2) == (3, 2)  # multiplier raised to deg S0 - 2
    with pytest.raises(ValueError):
        sos_degrees(4, 1)


def test_clock_constraint_validation():
    with pytest.raises(ValueError):
        const_constraint([1.0], (1.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        const_constraint([1.0], (-1.0, 1.0), 0.1)
    with pytest.raises(ValueError):
        ClockConstraint(AffPoly.const(np.array([[0.0, 1.0], [0.0, 0.0]])), (0, 1), 0.1)


def test_lyapunov_scalar_stable():
    r = analyze_clock_lyapunov(-1.0, 0.5, DwellTimeSpec(0.25, 1.0), x_degree=2)
    assert r.feasible
    assert r.grid.passes(0.1)
    assert r.X.degree <= 2


def test_lyapunov_scalar_tightness_bracket():
    dw = lambda T: DwellTimeSpec(0.1, T)  # noqa: E731
    assert analyze_clock_lyapunov(1.0, 0.5, dw(0.6), 6, 2, 1e-3).feasible
    assert not analyze_clock_lyapunov(1.0, 0.5, dw(0.75), 6, 2, 1e-3).feasible


def test_lyapunov_marginal_identity_jump_infeasible():
    r = analyze_clock_lyapunov(np.zeros((2, 2)), np.eye(2), DwellTimeSpec(0.25, 1.0), 4)
    assert r.status is not Status.FEASIBLE


def test_feasible_result_passes_grid_check():
    r = analyze_clock_lyapunov(np.array([[-1.0, 2.0], [0.0, -1.0]]), 0.5 * np.eye(2),
                               DwellTimeSpec(0.25, 1.0))
    assert r.feasible
    g = r.grid
    assert g.x_min >= 0.05 and g.flow_max <= -0.05 and g.jump_max <= -0.05


def test_condition_margins_reported():
    r = analyze_clock_lyapunov(1.0, 0.5, DwellTimeSpec(0.1, 0.9), 4)
    assert set(r.condition_margins) == {"positivity", "flow", "jump"}
    assert r.weakest_condition in r.condition_margins


def test_svariable_examples():
    assert analyze_svariable(-1.0, 0.5, DwellTimeSpec(0.25, 1.0), rho=0.1).feasible
    ok = [analyze_svariable(-np.eye(2), 0.9 * np.eye(2), DwellTimeSpec(0.25, 1.0), rho=r).feasible
          for r in (0.01, 0.1, 1.0)]
    assert any(ok)
    with pytest.raises(ValueError):
        analyze_svariable(-1.0, 0.5, DwellTimeSpec(0.25, 1.0), rho=0.0)


def test_svariable_infeasible_when_lemma1_is():
    dw = DwellTimeSpec(0.25, 1.0)
    for rho in (0.01, 1.0, 100.0):
        assert not analyze_svariable(np.zeros((2, 2)), np.eye(2), dw, rho=rho).feasible


def random_stable_system(rng, n=2):
    A = rng.standard_normal((n, n))
    A -= (np.linalg.eigvals(A).real.max() + rng.uniform(0.2, 1.0)) * np.eye(n)
    AJ = rng.standard_normal((n, n))
    AJ *= rng.uniform(0.5, 1.3) / np.linalg.norm(AJ, 2)
    return A, AJ


def test_monotonicity_in_tmax():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(20):
        A, AJ = random_stable_system(rng)
        hi = analyze_clock_lyapunov(A, AJ, DwellTimeSpec(0.2, 1.2), 4, 2, 0.01)
        if hi.feasible:
            checked += 1
            assert analyze_clock_lyapunov(A, AJ, DwellTimeSpec(0.2, 0.7), 4, 2, 0.01).feasible
    assert checked >= 5


def test_svariable_implies_lyapunov():
    rng = np.random.default_rng(5)
    hits = 0
    for _ in range(8):
        A, AJ = random_stable_system(rng)
        dw = DwellTimeSpec(0.25, 1.0)
        if analyze_svariable(A, AJ, dw, rho=0.1, eps=0.01).feasible:
            hits += 1
            assert analyze_clock_lyapunov(A, AJ, dw, eps=0.01).feasible
    assert hits >= 2


def test_grid_margins_scalar_hand_certificate():
    dw = DwellTimeSpec(0.25, 1.0)
    one = lambda t: np.ones((len(t), 1, 1))  # noqa: E731
    zero = lambda t: np.zeros((len(t), 1, 1))  # noqa: E731
    g = lyapunov_grid_margins(lambda t: -one(t), lambda t: 0.5 * one(t), one, zero, dw, 50)
    assert g.flow_max == pytest.approx(-2.0) and g.jump_max == pytest.approx(-0.75)


def test_polymat_system_input():
    A = PolyMat(np.array([[[-1.0]], [[-0.5]]]))
    r = analyze_clock_lyapunov(A, 0.5, DwellTimeSpec(0.25, 1.0), 2)
    assert r.feasible
