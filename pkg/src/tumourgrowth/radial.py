"""Radially symmetric sharp-interface solutions and the tumour-radius ODE.

The nutrient is sigma_T inside the tumour (r < q) and sigma_H in the healthy
shell q < r < R, with sigma_H(R) = sigma_inf, a jump sigma_T - sigma_H = 2*lam
at r = q and flux continuity sigma_T' = D sigma_H'.  The chemical potential
mu_T lives in the tumour only.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .specialfn import bessel_I, coth_minus_inv

Q_MIN = 1e-6


@dataclass(frozen=True)
class RadialParams:
    d: int = 2
    R: float = 13.0
    sigma_inf: float = 1.0
    P: float = 0.1
    A: float = 0.0
    C: float = 1.0
    D: float = 1.0
    chi_phi: float = 0.0
    lam: float = 0.0
    beta_gamma: float = 0.1
    # "consistent" uses P/C in the 2D mu constant; "printed" reproduces the
    # P/Lambda factor as typeset.  They coincide when C = 1.
    c2_form: str = "consistent"

    def __post_init__(self):
        if self.d not in (2, 3):
            raise ValueError("d must be 2 or 3")
        if self.C <= 0:
            raise ValueError("C must be positive so that Lambda = sqrt(C) is real")
        if self.D <= 0 or self.R <= 0:
            raise ValueError("D and R must be positive")
        if self.c2_form not in ("consistent", "printed"):
            raise ValueError("c2_form must be 'consistent' or 'printed'")

    @property
    def Lambda(self) -> float:
        return math.sqrt(self.C)

    def with_(self, **kw) -> "RadialParams":
        return replace(self, **kw)


@dataclass(frozen=True)
class RadialCoefficients:
    Lambda: float
    a: float
    b: float
    c: float


def _check_q(q: float, p: RadialParams) -> None:
    # q = R is the limit of a vanishing healthy shell; the formulas stay finite there
    if not (0.0 < q <= p.R):
        raise ValueError(f"interface radius q={q} must lie in (0, R={p.R}]")


def _x_coth_minus_one(x: float) -> float:
    # x*coth(x) - 1, accurate for small x
    return x * coth_minus_inv(x)


def radial_coefficients(q: float, p: RadialParams) -> RadialCoefficients:
    _check_q(q, p)
    lam_ = p.Lambda
    s = p.sigma_inf + 2.0 * p.lam
    x = lam_ * q
    if p.d == 2:
        i0 = bessel_I(0, x)
        i1 = bessel_I(1, x)
        denom = p.D * i0 - x * math.log(q / p.R) * i1
        a = x * i1 * s / denom
        b = p.D * s / denom
        pc = p.P / p.C if p.c2_form == "consistent" else p.P / lam_
        c = (-p.A / 4.0 * q * q + p.beta_gamma / (2.0 * q) + p.chi_phi * p.lam
             + (pc - p.chi_phi) * b * i0)
    else:
        g = _x_coth_minus_one(x)
        denom = (p.R - q) * g + p.D * p.R
        a = -s * p.R * q * g / denom
        b = s / math.sinh(x) * p.D * p.R * q / denom
        c = (-p.A / 6.0 * q * q + p.beta_gamma / q + p.chi_phi * p.lam
             + (p.P / p.C - p.chi_phi) * b * math.sinh(x) / q)
    return RadialCoefficients(lam_, a, b, c)


def _sinh_over_r(lam_: float, r: float) -> float:
    if r == 0.0:
        return lam_
    return math.sinh(lam_ * r) / r


def radial_fields(r: float, q: float, p: RadialParams) -> tuple[float, float]:
    """(sigma, mu_T) at radius r.  mu is NaN in the healthy region."""
    if not (0.0 <= r <= p.R):
        raise ValueError(f"r={r} outside [0, R]")
    co = radial_coefficients(q, p)
    lam_ = co.Lambda
    if r < q:
        if p.d == 2:
            core = bessel_I(0, lam_ * r)
            mu = p.A / 4.0 * r * r - p.P / p.C * co.b * core + co.c
        else:
            core = _sinh_over_r(lam_, r)
            mu = p.A / 6.0 * r * r - p.P / p.C * co.b * core + co.c
        return co.b * core, mu
    if r == p.R:
        return p.sigma_inf, math.nan
    if p.d == 2:
        sig = p.sigma_inf + co.a * (math.log(r) - math.log(p.R))
    else:
        sig = p.sigma_inf + co.a * (1.0 / r - 1.0 / p.R)
    return sig, math.nan


def interface_values(q: float, p: RadialParams) -> dict:
    """One-sided limits at r = q: sigma_T, sigma_H and mu_T."""
    co = radial_coefficients(q, p)
    lam_ = co.Lambda
    if p.d == 2:
        core = bessel_I(0, lam_ * q)
        mu = p.A / 4.0 * q * q - p.P / p.C * co.b * core + co.c
        sig_h = p.sigma_inf + co.a * math.log(q / p.R)
    else:
        core = math.sinh(lam_ * q) / q
        mu = p.A / 6.0 * q * q - p.P / p.C * co.b * core + co.c
        sig_h = p.sigma_inf + co.a * (1.0 / q - 1.0 / p.R)
    return {"sigma_T": co.b * core, "sigma_H": sig_h, "mu_T": mu}


def q_rhs(q: float, p: RadialParams) -> float:
    """dq/dt for the radial tumour."""
    co = radial_coefficients(q, p)
    lam_ = co.Lambda
    x = lam_ * q
    if p.d == 2:
        return -p.A / 2.0 * q + p.P / lam_ * co.b * bessel_I(1, x)
    # Lambda cosh(x)/q - sinh(x)/q^2 == sinh(x) (x coth x - 1) / q^2
    return -p.A / 3.0 * q + co.b * p.P / p.C * math.sinh(x) * _x_coth_minus_one(x) / (q * q)


@dataclass
class RadiusHistory:
    t: np.ndarray
    q: np.ndarray
    event: str | None = None


def integrate_q(q0: float, p: RadialParams, t_end: float, dt: float = 1e-3,
                q_min: float = Q_MIN) -> RadiusHistory:
    """Classical RK4 on dq/dt; stops with an event flag if q leaves (q_min, R - q_min)."""
    _check_q(q0, p)
    if dt <= 0 or t_end < 0:
        raise ValueError("need dt > 0 and t_end >= 0")
    n = int(math.ceil(t_end / dt - 1e-12))
    ts = [0.0]
    qs = [float(q0)]
    lo, hi = q_min, p.R - q_min
    q = float(q0)
    event = None

    def f(y):
        if not (lo < y < hi):
            raise _LeftDomain
        return q_rhs(y, p)

    for k in range(n):
        h = min(dt, t_end - k * dt)
        try:
            k1 = f(q)
            k2 = f(q + 0.5 * h * k1)
            k3 = f(q + 0.5 * h * k2)
            k4 = f(q + h * k3)
        except _LeftDomain:
            event = "left_domain"
            break
        q = q + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        if not (lo < q < hi):
            event = "left_domain"
            break
        ts.append(ts[-1] + h)
        qs.append(q)
    return RadiusHistory(np.array(ts), np.array(qs), event)


class _LeftDomain(Exception):
    pass


# --- growing-circle benchmark ---------------------------------------------

def growing_circle_sigma_rho(rho, R: float = 10.0, sigma_R: float = 2.0):
    rho = np.asarray(rho, dtype=float)
    return sigma_R / (1.0 - 2.0 * math.sqrt(2.0) * rho * np.log(rho / R))


@dataclass
class GrowingCircleExact:
    t: np.ndarray
    rho: np.ndarray
    R: float = 10.0
    sigma_R: float = 2.0
    event: str | None = None

    @property
    def sigma_rho(self) -> np.ndarray:
        return growing_circle_sigma_rho(self.rho, self.R, self.sigma_R)

    def rho_at(self, t) -> np.ndarray:
        return np.interp(t, self.t, self.rho)

    def sigma(self, r, t) -> np.ndarray:
        """Sharp-interface nutrient at radius r and time t."""
        r = np.asarray(r, dtype=float)
        rho = float(self.rho_at(t))
        srho = float(growing_circle_sigma_rho(rho, self.R, self.sigma_R))
        with np.errstate(divide="ignore", invalid="ignore"):
            outer = self.sigma_R - np.log(r / self.R) / math.log(rho / self.R) * (self.sigma_R - srho)
        return np.where(r <= rho, srho, outer)


def growing_circle_exact(t_grid, R: float = 10.0, sigma_R: float = 2.0, rho0: float = 0.25,
                         substeps: int = 20) -> GrowingCircleExact:
    """Integrate rho' = sqrt(2) sigma_rho(rho) by RK4 on the given time grid."""
    if not (0.0 < rho0 < R):
        raise ValueError("rho0 must lie in (0, R)")
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.ndim != 1 or t_grid.size == 0 or np.any(np.diff(t_grid) < 0):
        raise ValueError("t_grid must be a nondecreasing 1D array")

    def f(rho):
        return math.sqrt(2.0) * float(growing_circle_sigma_rho(rho, R, sigma_R))

    rho = float(rho0)
    out = [rho]
    event = None
    t_prev = t_grid[0]
    for t_next in t_grid[1:]:
        h = (t_next - t_prev) / substeps
        for _ in range(substeps):
            k1 = f(rho)
            k2 = f(rho + 0.5 * h * k1)
            k3 = f(rho + 0.5 * h * k2)
            k4 = f(rho + h * k3)
            rho = rho + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            if rho >= R:
                event = "reached_R"
                break
        if event:
            break
        out.append(rho)
        t_prev = t_next
    return GrowingCircleExact(t_grid[: len(out)], np.array(out), R, sigma_R, event)
