import cmath
import math

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, settings
from hypothesis import strategies as st

from kerr_ring.exceptions import DegenerateState
from kerr_ring.model import ModelParams
from kerr_ring.semiclassical import (
    SemiclassicalState,
    Trajectory,
    asymmetry_ratio,
    branch_rows,
    eom_rhs,
    find_steady_states,
    integrate,
    state_equation_residuals,
    steady_state_residual,
    sweep_drive,
    sweep_parameter,
)


def symbolic_rhs(state, p):
    """Independent oracle: Wirtinger derivative of the classical energy plus damping and drive."""
    a, ac, b, bc = sy.symbols("a ac b bc")
    j = sy.nsimplify(p.j_re) + sy.I * sy.nsimplify(p.j_im)
    jc = sy.nsimplify(p.j_re) - sy.I * sy.nsimplify(p.j_im)
    d, e = sy.nsimplify(p.delta), sy.nsimplify(p.epsilon_eff)
    ua, ub, v = (sy.nsimplify(x) for x in (p.u_a, p.u_b, p.v))
    energy = (
        (d + e) * a * ac
        + (d - e) * b * bc
        + ua / 2 * (a * ac) ** 2
        + ub / 2 * (b * bc) ** 2
        + v * a * ac * b * bc
        - (j * a * bc + jc * ac * b)
    )
    g = sy.nsimplify(p.gamma) / 2
    sk = sy.sqrt(sy.nsimplify(p.kappa))
    da = -sy.I * sy.diff(energy, ac) - g * a + sk * sy.nsimplify(p.f_a)
    db = -sy.I * sy.diff(energy, bc) - g * b + sk * sy.nsimplify(p.f_b)
    subs = {a: state.alpha, ac: state.alpha.conjugate(), b: state.beta, bc: state.beta.conjugate()}
    return complex(sy.N(da.subs(subs))), complex(sy.N(db.subs(subs)))


def test_rhs_at_undriven_origin(ring):
    assert eom_rhs(SemiclassicalState(0, 0), ring) == (0, 0)


def test_rhs_drive_only(ring):
    p = ring.with_drive(1.3).replace(kappa=2.0)
    da, db = eom_rhs(SemiclassicalState(0, 0), p)
    assert da == pytest.approx(math.sqrt(2) * 1.3)
    assert db == pytest.approx(math.sqrt(2) * 1.3)


def test_rhs_hand_value(ring):
    da, db = eom_rhs(SemiclassicalState(1.0, 0.0), ring)
    assert da == pytest.approx(-1 + 2.9j, abs=1e-14)
    assert db == pytest.approx(0.1j, abs=1e-14)
    assert (da, db) == pytest.approx(symbolic_rhs(SemiclassicalState(1.0, 0.0), ring), abs=1e-14)


@settings(max_examples=25, deadline=None)
@given(
    st.complex_numbers(max_magnitude=3),
    st.complex_numbers(max_magnitude=3),
    st.floats(-0.5, 0.5),
    st.floats(-0.3, 0.3),
    st.floats(0, 3),
)
def test_rhs_matches_symbolic_oracle(alpha, beta, j_im, eps, f):
    p = ModelParams(delta=-2.0, epsilon=eps, u_a=0.6, u_b=0.4, v=0.1, j_re=0.1, j_im=j_im, gamma=2.0, f_a=f, f_b=0.5 * f)
    state = SemiclassicalState(alpha, beta)
    assert eom_rhs(state, p) == pytest.approx(symbolic_rhs(state, p), abs=1e-10)


def test_main_text_convention_doubles_splitting():
    s = SemiclassicalState(1.0, 1.0)
    p = ModelParams(epsilon=0.2, gamma=0.0)
    twice = eom_rhs(s, p.replace(eom_convention="main_text"))
    assert twice == pytest.approx(eom_rhs(s, p.replace(epsilon=0.4)))


@settings(max_examples=30, deadline=None)
@given(st.complex_numbers(max_magnitude=3), st.complex_numbers(max_magnitude=3))
def test_conjugate_pair_consistency(alpha, beta):
    # the conjugate equations follow from conjugating the amplitude equations with J -> J*, F -> F*
    p = ModelParams(delta=-3.5, u_a=0.6, u_b=0.6, v=0.1, j_re=0.1, j_im=0.1, gamma=2.0, f_a=1.0, f_b=1.0)
    da, db = eom_rhs(SemiclassicalState(alpha, beta), p)
    ac, bc = alpha.conjugate(), beta.conjugate()
    na, nb = abs(alpha) ** 2, abs(beta) ** 2
    dac = (1j * (p.delta + p.u_a * na + p.v * nb) - 1.0) * ac - 1j * p.j * bc + p.f_a
    dbc = (1j * (p.delta + p.u_b * nb + p.v * na) - 1.0) * bc - 1j * p.j.conjugate() * ac + p.f_b
    assert abs(da.conjugate() - dac) < 1e-12
    assert abs(db.conjugate() - dbc) < 1e-12


def test_residual_examples(ring):
    assert steady_state_residual(SemiclassicalState(0, 0), ring) == 0
    assert steady_state_residual(SemiclassicalState(0, 0), ring.with_drive(1.0)) == pytest.approx(math.sqrt(2))


def test_undriven_decay(ring):
    traj = integrate(SemiclassicalState(2 + 1j, -1.5j), ring, 20.0)
    total = traj.n_alpha + traj.n_beta
    assert np.all(np.diff(total) <= 1e-12)
    assert total[-1] < 1e-10


def test_integrate_is_deterministic(ring):
    s0 = SemiclassicalState.from_populations(6, 0)
    a = integrate(s0, ring.with_drive(2.7), 30.0)
    b = integrate(s0, ring.with_drive(2.7), 30.0)
    assert np.array_equal(a.alpha, b.alpha) and np.array_equal(a.times, b.times)


def test_integrate_rejects_nonpositive_time(ring):
    with pytest.raises(ValueError):
        integrate(SemiclassicalState(0, 0), ring, 0.0)


def test_integrate_uniform_samples(ring):
    traj = integrate(SemiclassicalState(1, 0), ring, 5.0, n_samples=11)
    assert len(traj) == 11
    assert traj.times[-1] == pytest.approx(5.0)


def test_trajectory_invariants():
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 0.0]), np.zeros(2), np.zeros(2), 0.0)
    with pytest.raises(ValueError):
        Trajectory(np.array([0.0, 1.0]), np.zeros(3), np.zeros(2), 0.0)


def test_endpoint_residual_agrees(ring):
    p = ring.with_drive(1.0)
    traj = integrate(SemiclassicalState(0, 0), p, 60.0)
    assert traj.final_residual == pytest.approx(steady_state_residual(traj.final, p))
    assert traj.final_residual < 1e-8


@pytest.mark.parametrize("na, nb, expected", [(2.0, 2.0, 0.0), (6.0, 0.0, 1.0), (0.0, 3.0, -1.0)])
def test_asymmetry_ratio(na, nb, expected):
    assert asymmetry_ratio(SemiclassicalState.from_populations(na, nb)) == pytest.approx(expected)


def test_asymmetry_ratio_degenerate():
    with pytest.raises(DegenerateState):
        asymmetry_ratio(SemiclassicalState(0, 0))


@given(st.complex_numbers(max_magnitude=10), st.complex_numbers(max_magnitude=10))
def test_asymmetry_ratio_bounded(a, b):
    s = SemiclassicalState(a, b)
    if s.n_alpha + s.n_beta > 0:
        assert -1 <= asymmetry_ratio(s) <= 1


def test_undriven_fixed_point_is_origin(ring):
    points = find_steady_states(ring)
    assert len(points) == 1
    assert abs(points[0].state.alpha) + abs(points[0].state.beta) < 1e-14
    assert points[0].is_stable


def cubic_populations(p, f):
    """Closed-form single-mode populations from kappa F^2 = n((D + U n)^2 + g^2/4)."""
    d, u, g = p.delta, p.u_a, p.gamma
    roots = np.roots([u * u, 2 * d * u, d * d + g * g / 4, -p.kappa * f * f])
    return np.sort(roots[np.abs(roots.imag) < 1e-9].real)


@pytest.mark.parametrize("f", [0.5, 2.2, 2.6, 2.7, 3.0, 3.3, 4.0])
def test_single_mode_matches_cubic(ring, f):
    p = ring.replace(j_re=0.0, v=0.0, f_a=f, f_b=0.0)
    points = find_steady_states(p)
    got = np.sort([fp.n_alpha for fp in points])
    assert all(fp.n_beta < 1e-20 for fp in points)
    np.testing.assert_allclose(got, cubic_populations(p, f), rtol=1e-8)


def test_decoupled_modes_are_products(ring):
    p = ring.replace(j_re=0.0, v=0.0, f_a=2.6, f_b=2.2)
    na = cubic_populations(p, 2.6)
    nb = cubic_populations(p, 2.2)
    expected = sorted((x, y) for x in na for y in nb)
    got = sorted((fp.n_alpha, fp.n_beta) for fp in find_steady_states(p))
    np.testing.assert_allclose(got, expected, rtol=1e-8)


def test_fixed_points_satisfy_state_equations(ring):
    for fp in find_steady_states(ring.replace(j_im=0.1).with_drive(2.8)):
        assert fp.residual_norm <= 1e-12
        assert max(state_equation_residuals(fp.state, ring.replace(j_im=0.1).with_drive(2.8))) < 1e-8


def test_swap_symmetry_of_solution_set(ring):
    points = find_steady_states(ring.with_drive(3.0))
    pops = {(round(fp.n_alpha, 8), round(fp.n_beta, 8)) for fp in points}
    assert pops == {(b, a) for a, b in pops}
    assert len(points) > 1


def test_multistable_window_has_two_stable_points(ring):
    points = find_steady_states(ring.with_drive(2.8))
    assert sum(fp.is_stable for fp in points) >= 2


def test_find_steady_states_deterministic(ring):
    a = find_steady_states(ring.with_drive(3.0), seed=3)
    b = find_steady_states(ring.with_drive(3.0), seed=3)
    assert [fp.state for fp in a] == [fp.state for fp in b]


def test_find_steady_states_rejects_zero_starts(ring):
    with pytest.raises(ValueError):
        find_steady_states(ring, n_starts=0)


def test_sweep_zero_drive(ring):
    out = sweep_drive(ring, [0.0])
    assert len(out) == 1 and len(out[0][1]) == 1


def test_sweep_count_rises_and_falls(ring):
    counts = [len(points) for _, points in sweep_drive(ring, np.linspace(0, 5, 26))]
    assert counts[0] == 1 and counts[-1] == 1
    assert max(counts) > 1


def test_sweep_parameter_rejects_unknown(ring):
    with pytest.raises(ValueError):
        sweep_parameter(ring, "kappa", [1.0])


def test_branch_rows_layout(ring):
    rows = branch_rows(sweep_drive(ring, [1.0]))
    assert len(rows) == 1
    x, ra, ia, rb, ib, na, nb, stab = rows[0]
    assert na == pytest.approx(ra * ra + ia * ia)
    assert stab == "stable"


def test_phase_of_from_populations():
    s = SemiclassicalState.from_populations(6.0, 0.0)
    assert cmath.phase(s.alpha) == 0 and s.n_alpha == pytest.approx(6.0)
