"""Linear stability of the radial tumour under mode-l shape perturbations.

Conventions: the unperturbed radius is q, the perturbed interface is
r = q + delta * Z with Z a mode-l eigenfunction of the Laplace-Beltrami
operator on the unit (d-1)-sphere.  The healthy-side perturbation is
U = F0 r^l + F1 r^(-l) (2D) or F0 r^l + F1 r^(-l-1) (3D).

Two routes to the shape growth rate (q/delta) d(delta/q)/dt are provided:

* ``shape_growth_rate`` evaluates the simplified closed form in terms of
  a_d, F0, F1 (F1 from its closed form under the C = sigma_inf = 1
  normalisation, else from the linear interface system);
* ``shape_growth_rate_direct`` solves the interface system for F0..F3 and
  evaluates -mu*_rr(q) - W_r(q) - q'/q straight from the linearised
  velocity law.  It shares no algebra with the first route.

``critical_apoptosis`` has two forms.  ``"derived"`` is the exact root of
the growth rate (affine in A).  ``"printed"`` is the typeset 3D expression
whose last factor reads (chi - (1 + D - D/l) P); it reproduces the
published critical-apoptosis curves but is not a root of the growth rate
when P != 0 in 3D.  In 2D both forms agree.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .radial import RadialParams, radial_coefficients, q_rhs
from .specialfn import Family, bessel_I, bessel_ratio, coth_minus_inv

F0_NEGLECT = "neglect"
F0_FULL = "full"


def zeta(l: int, d: int) -> int:
    if l < 0:
        raise ValueError("l must be nonnegative")
    if d == 2:
        return -l * l
    if d == 3:
        return -l * (l + 1)
    raise ValueError("d must be 2 or 3")


@dataclass(frozen=True)
class PerturbParams:
    l: int
    radial: RadialParams

    def __post_init__(self):
        if self.l < 1:
            raise ValueError("mode l must be >= 1")

    @property
    def d(self) -> int:
        return self.radial.d

    @property
    def zeta(self) -> int:
        return zeta(self.l, self.d)

    @property
    def normalised(self) -> bool:
        r = self.radial
        return r.C == 1.0 and r.sigma_inf == 1.0


@dataclass
class StabilityResult:
    q: float
    F1: float
    growth_rate: float
    A_c: float


def _check(q: float, pp: PerturbParams) -> None:
    if not (0.0 < q <= pp.radial.R):
        raise ValueError(f"q={q} must lie in (0, R={pp.radial.R}]")


# --- normalised closed forms (C = Lambda = sigma_inf = 1) ---------------------

def C2(q: float, R: float = 13.0, D: float = 1.0) -> float:
    rho1 = bessel_ratio(0, q)
    return D * rho1 / (D - q * math.log(q / R) * rho1)


def C3(q: float, R: float = 13.0, D: float = 1.0) -> float:
    cm = coth_minus_inv(q)
    return D * cm / (D + q * (R - q) / R * cm)


def _G2(q: float, l: int, D: float) -> float:
    rho_l = bessel_ratio(l, q)
    num = 1.0 / bessel_ratio(0, q) + (1.0 - D) / D * (l / q + rho_l)
    return num / (D * l + l + q * rho_l)


def _G3(q: float, l: int, D: float) -> float:
    rho_l = bessel_ratio(l, q, Family.SPHERICAL)
    num = 1.0 / coth_minus_inv(q) + (1.0 - D) / D * (rho_l + l / q)
    return num / ((l + 1) * D + l + q * rho_l)


def X(q: float, R: float = 13.0) -> float:
    """2D auxiliary at D = 1, l = 2."""
    return _G2(q, 2, 1.0)


def Y(q: float, R: float = 13.0) -> float:
    """3D auxiliary at D = 1, l = 2 (ratio i_3/i_2 = I_{7/2}/I_{5/2})."""
    return _G3(q, 2, 1.0)


def _F1_closed(q: float, pp: PerturbParams) -> float:
    r = pp.radial
    l = pp.l
    amp = 1.0 + 2.0 * r.lam
    if pp.d == 2:
        return -amp * q ** (l + 1) * C2(q, r.R, r.D) * _G2(q, l, r.D)
    return -amp * q ** (l + 2) * C3(q, r.R, r.D) * _G3(q, l, r.D)


# --- interface linear system --------------------------------------------------

def perturbation_constants(q: float, pp: PerturbParams, f0_mode: str = F0_NEGLECT) -> dict:
    """Solve the linearised interface conditions for F0, F1, V(q) = F2*I_l, F3.

    Unknown vector is (F1, Vq, F3); F0 is either zero or -F1 R^(-2l) (2D),
    -F1 R^(-2l-1) (3D).  V is scaled by its value at q so large Lambda*q
    does not overflow.
    """
    _check(q, pp)
    r = pp.radial
    l, d = pp.l, pp.d
    co = radial_coefficients(q, r)
    lam_ = co.Lambda
    x = lam_ * q
    if d == 2:
        dlogV = lam_ * (l / x + bessel_ratio(l, x))      # Lambda I_l'(x)/I_l(x)
        f1_pow, f1_dpow = q ** (-l), -l * q ** (-l - 1)
        jump_rhs = (r.D - 1.0) * co.a / q
        base_flux = co.b * lam_ * bessel_I(1, x)            # (sigma_T*)'(q)
        sigT = co.b * bessel_I(0, x)
        curv = 0.5 * r.beta_gamma * (l * l - 1) / (q * q)
        f0_ratio = -r.R ** (-2 * l)
    else:
        dlogV = lam_ * (l / x + bessel_ratio(l, x, Family.SPHERICAL))
        f1_pow, f1_dpow = q ** (-l - 1), -(l + 1) * q ** (-l - 2)
        jump_rhs = (1.0 - r.D) * co.a / (q * q)
        base_flux = co.b * math.sinh(x) * x * coth_minus_inv(x) / (q * q)
        sigT = co.b * math.sinh(x) / q
        curv = 0.5 * r.beta_gamma * (l + 2) * (l - 1) / (q * q)
        f0_ratio = -r.R ** (-2 * l - 1)
    if f0_mode == F0_NEGLECT:
        f0_ratio = 0.0
    elif f0_mode != F0_FULL:
        raise ValueError(f"unknown f0_mode {f0_mode!r}")
    pc = r.P / r.C
    k = r.chi_phi - pc
    # rows: sigma jump, curvature law, flux (sigma_T - D sigma_H)_rr = D U_r - V_r
    M = np.array([
        [f0_ratio * q ** l + f1_pow, -1.0, 0.0],
        [0.0, k, q ** l],
        [r.D * (l * f0_ratio * q ** (l - 1) + f1_dpow), -dlogV, 0.0],
    ])
    rhs = np.array([
        jump_rhs,
        curv - k * base_flux - r.A / d * q,
        r.C * sigT,
    ])
    F1, Vq, F3 = np.linalg.solve(M, rhs)
    return {"F0": f0_ratio * F1, "F1": F1, "Vq": Vq, "F3": F3, "dlogV": dlogV,
            "a": co.a, "b": co.b, "sigma_T": sigT, "sigma_T_r": base_flux}


def compute_F1(q: float, pp: PerturbParams, f0_mode: str = F0_NEGLECT) -> float:
    """F1 from its closed form under the normalisation, else from the linear system."""
    _check(q, pp)
    if f0_mode == F0_NEGLECT and pp.normalised:
        return _F1_closed(q, pp)
    return perturbation_constants(q, pp, f0_mode)["F1"]


def shape_growth_rate(q: float, A: float, pp: PerturbParams, f0_mode: str = F0_NEGLECT) -> float:
    """(q/delta) d(delta/q)/dt from the simplified closed form.

    The apoptosis rate A passed here overrides ``pp.radial.A``.
    """
    _check(q, pp)
    r = pp.radial
    l, d = pp.l, pp.d
    pc = r.P / r.C
    chi = r.chi_phi
    a = radial_coefficients(q, r).a
    F1 = compute_F1(q, pp, f0_mode)
    if f0_mode == F0_NEGLECT:
        F0 = 0.0
    else:
        F0 = -F1 * r.R ** (-2 * l if d == 2 else -2 * l - 1)
    f0_term = F0 * q ** (l - 1) * (l * chi + l * (r.D - 1.0) * pc)
    if d == 2:
        return (l * A / 2.0 + a / q ** 2 * (l * chi - (l + 2 * r.D) * pc)
                - r.beta_gamma * l * (l * l - 1) / (2.0 * q ** 3)
                + f0_term + F1 / q ** (l + 1) * (l * chi - (l + l * r.D) * pc))
    return (l * A / 3.0 - a / q ** 3 * (l * chi - (l + 3 * r.D) * pc)
            - r.beta_gamma * l * (l + 2) * (l - 1) / (2.0 * q ** 3)
            + f0_term + F1 / q ** (l + 2) * (l * chi - (l + l * r.D + r.D) * pc))


def shape_growth_rate_direct(q: float, A: float, pp: PerturbParams,
                             f0_mode: str = F0_NEGLECT) -> float:
    """Same quantity, straight from delta'/delta = -mu*_rr(q) - W_r(q) minus q'/q."""
    r = pp.radial.with_(A=A)
    pp = PerturbParams(pp.l, r)
    k = perturbation_constants(q, pp, f0_mode)
    l, d = pp.l, pp.d
    lam_ = r.Lambda
    x = lam_ * q
    pc = r.P / r.C
    if d == 2:
        # I_0'' = I_0 - I_1/x
        mu_rr = A / 2.0 - pc * k["b"] * lam_ ** 2 * (bessel_I(0, x) - bessel_I(1, x) / x)
    else:
        # f = sinh(Lambda r)/r solves f'' + 2 f'/r = Lambda^2 f
        mu_rr = A / 3.0 - pc * k["b"] * (lam_ ** 2 * math.sinh(x) / q) + pc * 2.0 / q * k["sigma_T_r"]
    W_r = l * k["F3"] * q ** (l - 1) - pc * k["Vq"] * k["dlogV"]
    return -mu_rr - W_r - q_rhs(q, r) / q


def delta_rate(q: float, A: float, pp: PerturbParams, f0_mode: str = F0_NEGLECT) -> float:
    """(1/delta) d delta/dt, evaluated from its own closed form (not via q'/q)."""
    _check(q, pp)
    r = pp.radial
    l, d = pp.l, pp.d
    pc = r.P / r.C
    chi = r.chi_phi
    a = radial_coefficients(q, r).a
    F1 = compute_F1(q, pp, f0_mode)
    F0 = 0.0 if f0_mode == F0_NEGLECT else -F1 * r.R ** (-2 * l if d == 2 else -2 * l - 1)
    f0_term = F0 * q ** (l - 1) * (l * chi + l * (r.D - 1.0) * pc)
    if d == 2:
        return (A / 2.0 * (l - 1) + a / q ** 2 * (l * chi - (l + r.D) * pc)
                - r.beta_gamma * l * (l * l - 1) / (2.0 * q ** 3)
                + f0_term + F1 / q ** (l + 1) * (l * chi - (l + l * r.D) * pc))
    return (A / 3.0 * (l - 1) - a / q ** 3 * (l * chi - (l + 2 * r.D) * pc)
            - r.beta_gamma * l * (l + 2) * (l - 1) / (2.0 * q ** 3)
            + f0_term + F1 / q ** (l + 2) * (l * chi - (l + l * r.D + r.D) * pc))


def critical_apoptosis(q: float, pp: PerturbParams, form: str = "derived",
                       f0_mode: str = F0_NEGLECT) -> float:
    """Apoptosis rate at which the relative perturbation delta/q is stationary."""
    _check(q, pp)
    r = pp.radial
    l, d = pp.l, pp.d
    if form not in ("derived", "printed"):
        raise ValueError("form must be 'derived' or 'printed'")
    if not pp.normalised or f0_mode != F0_NEGLECT:
        if form == "printed":
            raise ValueError("the printed closed form assumes C = sigma_inf = 1 and F0 = 0")
        # growth rate is affine in A with slope l/d
        return -d / l * shape_growth_rate(q, 0.0, pp, f0_mode)
    amp = 1.0 + 2.0 * r.lam
    P, D, chi = r.P, r.D, r.chi_phi
    if d == 2:
        c2 = C2(q, r.R, D)
        return (r.beta_gamma * (l * l - 1) / q ** 3
                + amp * 2.0 * c2 * ((1.0 + 2.0 * D / l) * P - chi) / (D * q)
                + amp * 2.0 * c2 * (chi - (1.0 + D) * P) * _G2(q, l, D))
    c3 = C3(q, r.R, D)
    tail = 1.0 + D + D / l if form == "derived" else 1.0 + D - D / l
    return (r.beta_gamma * 3.0 * (l + 2) * (l - 1) / (2.0 * q ** 3)
            + amp * 3.0 * c3 * ((1.0 + 3.0 * D / l) * P - chi) / (D * q)
            + amp * 3.0 * c3 * (chi - tail * P) * _G3(q, l, D))


def critical_apoptosis_root(q: float, pp: PerturbParams, lo: float = 0.0, hi: float = 10.0,
                            tol: float = 1e-10, f0_mode: str = F0_NEGLECT) -> float:
    """Bisection on A for shape_growth_rate = 0; the bracket is widened if needed."""
    g = lambda A: shape_growth_rate(q, A, pp, f0_mode)
    glo, ghi = g(lo), g(hi)
    while glo * ghi > 0:
        lo, hi = lo - 2 * (hi - lo), hi + 2 * (hi - lo)
        glo, ghi = g(lo), g(hi)
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if (gm > 0) == (ghi > 0):
            hi, ghi = mid, gm
        else:
            lo, glo = mid, gm
    return 0.5 * (lo + hi)


def stability_result(q: float, A: float, pp: PerturbParams, form: str = "derived") -> StabilityResult:
    return StabilityResult(q, compute_F1(q, pp), shape_growth_rate(q, A, pp),
                           critical_apoptosis(q, pp, form))


# --- sweeps -------------------------------------------------------------------

PHASE_COLUMNS = ("q", "lambda", "chi_phi", "d", "l", "A_c")


def phase_diagram(q_grid, lambdas, chis, pp: PerturbParams, form: str = "derived") -> list[tuple]:
    """Rows (q, lambda, chi_phi, d, l, A_c) over the grid, lambda-major."""
    rows = []
    for lam in lambdas:
        for chi in chis:
            sub = PerturbParams(pp.l, pp.radial.with_(lam=float(lam), chi_phi=float(chi)))
            for q in q_grid:
                rows.append((float(q), float(lam), float(chi), pp.d, pp.l,
                             critical_apoptosis(float(q), sub, form)))
    return rows


SIGN_COLUMNS = ("q", "C2", "C3", "X", "Y", "check1", "check2", "check3")


@dataclass
class SignReport:
    rows: list
    ratio_min: float
    ratio_max: float

    @property
    def all_pass(self) -> bool:
        return all(row[5] and row[6] and row[7] and min(row[1:5]) > 0 for row in self.rows)

    @property
    def violations(self) -> list:
        return [row for row in self.rows
                if not (row[5] and row[6] and row[7] and min(row[1:5]) > 0)]


def sign_checks(q_grid, R: float = 13.0) -> SignReport:
    """Positivity of C2, C3, X, Y and the three inequalities on the grid.

    check1: X - 1/q < 0; check2: Y - 1/q < 0; check3: 1/(4q) - 0.15 Y > 0.
    Also records the range of (0.25/q - 0.15 Y)/(1/q - Y) over the grid.
    """
    rows = []
    ratios = []
    for q in q_grid:
        q = float(q)
        c2, c3, xx, yy = C2(q, R), C3(q, R), X(q, R), Y(q, R)
        rows.append((q, c2, c3, xx, yy, xx - 1 / q < 0, yy - 1 / q < 0,
                     0.25 / q - 0.15 * yy > 0))
        ratios.append((0.25 / q - 0.15 * yy) / (1 / q - yy))
    ratios = np.asarray(ratios) if ratios else np.array([np.nan])
    return SignReport(rows, float(np.min(ratios)), float(np.max(ratios)))
