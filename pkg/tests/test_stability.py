import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tumourgrowth.radial import RadialParams, q_rhs
from tumourgrowth.specialfn import bessel_I
from tumourgrowth.stability import (C2, C3, F0_FULL, PHASE_COLUMNS, PerturbParams, X, Y,
                                    compute_F1, critical_apoptosis, critical_apoptosis_root,
                                    delta_rate, perturbation_constants, phase_diagram,
                                    shape_growth_rate, shape_growth_rate_direct, sign_checks,
                                    zeta)

FIG1 = dict(R=13.0, P=0.1, D=1.0, beta_gamma=0.1)


def pp_of(l=2, **kw):
    base = dict(FIG1)
    base.update(kw)
    return PerturbParams(l, RadialParams(**base))


draw = st.fixed_dictionaries({
    "d": st.sampled_from([2, 3]), "l": st.integers(1, 6), "q": st.floats(0.05, 13.0),
    "lam": st.floats(0.0, 1.0), "chi": st.floats(0.0, 2.0), "P": st.floats(0.0, 0.5),
    "D": st.floats(0.5, 2.0), "bg": st.floats(0.01, 0.5),
})


def from_draw(p):
    return p["q"], PerturbParams(p["l"], RadialParams(d=p["d"], R=13.0, P=p["P"], D=p["D"],
                                                      chi_phi=p["chi"], lam=p["lam"],
                                                      beta_gamma=p["bg"]))


def test_zeta():
    assert zeta(2, 2) == -4
    assert zeta(2, 3) == -6
    assert zeta(0, 2) == 0 and zeta(0, 3) == 0
    with pytest.raises(ValueError):
        zeta(1, 4)
    with pytest.raises(ValueError):
        zeta(-1, 2)


def test_domain_errors():
    pp = pp_of()
    for q in (0.0, -1.0, 13.5):
        with pytest.raises(ValueError):
            compute_F1(q, pp)
        with pytest.raises(ValueError):
            shape_growth_rate(q, 0.0, pp)
    with pytest.raises(ValueError):
        PerturbParams(0, RadialParams(**FIG1))


@given(draw)
@settings(max_examples=200, deadline=None)
def test_root_consistency(p):
    q, pp = from_draw(p)
    A = critical_apoptosis(q, pp)
    assert abs(shape_growth_rate(q, A, pp)) <= 1e-10 * max(1.0, abs(A))


@given(draw, st.floats(-2.0, 2.0))
@settings(max_examples=100, deadline=None)
def test_two_routes_agree(p, A):
    # closed form against the interface linear system and velocity law
    q, pp = from_draw(p)
    a = shape_growth_rate(q, A, pp)
    b = shape_growth_rate_direct(q, A, pp)
    assert abs(a - b) <= 1e-9 * max(1.0, abs(a))


@given(draw, st.floats(-2.0, 2.0))
@settings(max_examples=100, deadline=None)
def test_relative_rate_is_delta_rate_minus_radius_rate(p, A):
    q, pp = from_draw(p)
    r = pp.radial.with_(A=A)
    lhs = delta_rate(q, A, pp) - q_rhs(q, r) / q
    rhs = shape_growth_rate(q, A, pp)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(rhs))


@given(draw)
@settings(max_examples=100, deadline=None)
def test_F1_closed_form_matches_linear_system(p):
    q, pp = from_draw(p)
    closed = compute_F1(q, pp)
    system = perturbation_constants(q, pp)["F1"]
    assert abs(closed - system) <= 1e-9 * max(1.0, abs(system))


def test_F1_lambda_scaling():
    for d in (2, 3):
        for q in (0.5, 2.0, 9.0):
            f_a = compute_F1(q, pp_of(d=d, lam=0.1))
            f_b = compute_F1(q, pp_of(d=d, lam=0.6))
            assert abs(f_b / f_a - 2.2 / 1.2) < 1e-12


def test_F1_unit_D_reduction():
    for q in (0.3, 1.0, 4.0):
        for lam in (0.0, 0.5):
            pp = pp_of(lam=lam)
            i0, i1 = bessel_I(0, q), bessel_I(1, q)
            expect = (-(1 + 2 * lam) * q ** 3 * C2(q) * (i0 / i1)
                      / (4 + q * bessel_I(3, q) / bessel_I(2, q)))
            assert abs(compute_F1(q, pp) - expect) < 1e-12 * abs(expect)


def test_F1_continuous_at_branch_switch():
    for d in (2, 3):
        pp = pp_of(d=d)
        eps = np.finfo(float).eps
        lo = compute_F1(1e-2 * (1 - eps), pp)
        hi = compute_F1(1e-2 * (1 + eps), pp)
        assert np.isfinite(lo) and abs(lo - hi) < 1e-9


def test_full_F0_is_small_correction():
    pp = pp_of()
    for q in (1.0, 3.0):
        a = shape_growth_rate(q, 0.0, pp)
        b = shape_growth_rate(q, 0.0, pp, F0_FULL)
        assert a != b
        assert abs(a - b) < 1e-2 * max(1.0, abs(a))
    A = critical_apoptosis(2.0, pp, f0_mode=F0_FULL)
    assert abs(shape_growth_rate(2.0, A, pp, F0_FULL)) < 1e-10


@given(draw, st.floats(-3.0, 3.0), st.floats(-3.0, 3.0))
@settings(max_examples=50, deadline=None)
def test_growth_rate_affine_in_A(p, A1, A2):
    q, pp = from_draw(p)
    diff = shape_growth_rate(q, A2, pp) - shape_growth_rate(q, A1, pp)
    slope = pp.l / pp.d
    assert abs(diff - slope * (A2 - A1)) <= 1e-10 * max(1.0, abs(diff))


def test_curvature_term_vanishes_for_l1():
    pp = pp_of(l=1, P=0.0, chi_phi=0.0, beta_gamma=0.3)
    pp_no = pp_of(l=1, P=0.0, chi_phi=0.0, beta_gamma=0.0)
    for q in (0.5, 3.0):
        assert shape_growth_rate(q, 0.2, pp) == pytest.approx(shape_growth_rate(q, 0.2, pp_no), abs=1e-14)


@given(draw)
@settings(max_examples=100, deadline=None)
def test_lambda_affinity(p):
    q, pp = from_draw(p)
    lam = pp.radial.lam

    def ac(x):
        return critical_apoptosis(q, PerturbParams(pp.l, pp.radial.with_(lam=x)))

    a0, a1 = ac(0.0), ac(1.0)
    assert abs(ac(lam) - a0 - lam * (a1 - a0)) <= 1e-12 * max(1.0, abs(a0), abs(a1))


def test_chi_at_twice_P_is_lambda_independent():
    for lam in (0.0, 0.3, 0.9):
        pp = pp_of(chi_phi=0.2, lam=lam)
        for q in (0.5, 3.0, 13.0):
            assert abs(critical_apoptosis(q, pp) - 0.3 / q ** 3) < 1e-12 * (0.3 / q ** 3)


def test_bisection_oracle():
    for d in (2, 3):
        pp = pp_of(d=d)
        A = critical_apoptosis(5.0, pp)
        assert abs(A - critical_apoptosis_root(5.0, pp)) < 1e-8


def test_general_parameters_route_through_system():
    pp = PerturbParams(2, RadialParams(d=2, R=13.0, P=0.1, C=2.0, chi_phi=0.5, lam=0.1))
    assert not pp.normalised
    A = critical_apoptosis(1.5, pp)
    assert abs(shape_growth_rate(1.5, A, pp)) < 1e-10
    assert abs(shape_growth_rate(1.5, 0.3, pp) - shape_growth_rate_direct(1.5, 0.3, pp)) < 1e-10
    with pytest.raises(ValueError):
        critical_apoptosis(1.5, pp, form="printed")


def test_printed_3d_form():
    # agrees with the derived root when P = 0 and in 2D; differs in 3D otherwise
    for q in (0.5, 4.0):
        assert critical_apoptosis(q, pp_of(d=2), "printed") == critical_apoptosis(q, pp_of(d=2))
        zero_p = pp_of(d=3, P=0.0, chi_phi=0.4)
        assert critical_apoptosis(q, zero_p, "printed") == pytest.approx(
            critical_apoptosis(q, zero_p), rel=1e-14)
        pp = pp_of(d=3, chi_phi=0.3, lam=0.5)
        assert critical_apoptosis(q, pp, "printed") != critical_apoptosis(q, pp)
    with pytest.raises(ValueError):
        critical_apoptosis(1.0, pp_of(), form="typeset")


def test_stabilising_transport_2d():
    q_grid = np.linspace(0.01, 13.0, 300)
    rows = phase_diagram(q_grid, [0.0, 0.3, 0.7], [0.0], pp_of())
    ac = np.array([r[-1] for r in rows]).reshape(3, -1)
    assert np.all(np.diff(ac, axis=0) > 0)


def test_phase_diagram_layout():
    rows = phase_diagram([1.0, 2.0], [0.0, 0.5], [0.1, 0.3], pp_of())
    assert len(rows) == 8
    assert all(len(r) == len(PHASE_COLUMNS) for r in rows)
    assert [r[1] for r in rows[:4]] == [0.0] * 4
    assert phase_diagram([1.0], [], [0.1], pp_of()) == []


@pytest.mark.parametrize("q", [0.01, 1.0, 13.0])
def test_sign_checks_points(q):
    rep = sign_checks([q])
    assert rep.all_pass and not rep.violations
    assert all(np.isfinite(v) for v in rep.rows[0][1:5])


def test_positive_auxiliaries():
    for q in np.geomspace(1e-3, 13.0, 50):
        assert C2(q) > 0 and C3(q) > 0 and X(q) > 0 and Y(q) > 0


def test_sign_checks_report_violation():
    rep = sign_checks([1.0])
    bad = rep.rows[0][:5] + (False,) + rep.rows[0][6:]
    rep.rows.append(bad)
    assert not rep.all_pass and rep.violations == [bad]
