"""Modified Bessel functions of the first kind and related ratios.

Only integer and half-integer orders are supported; that is all the radial
solutions and the perturbation analysis ever need.
"""
from __future__ import annotations

import math
from enum import Enum

import numpy as np

SERIES_MAX_X = 15.0
_CF_MAX_ITER = 20000
_TINY = 1e-300


class Family(str, Enum):
    CYLINDRICAL = "cylindrical"
    SPHERICAL = "spherical"


def _check_order(nu: float) -> float:
    nu = float(nu)
    twice = 2.0 * nu
    if nu < 0 or twice != round(twice):
        raise ValueError(f"order must be a nonnegative integer or half-integer, got {nu}")
    return nu


def gamma_int_or_half(z: float) -> float:
    """Gamma(z) for z a positive integer or half-integer."""
    if z <= 0:
        raise ValueError("z must be positive")
    if float(z).is_integer():
        return float(math.factorial(int(z) - 1))
    if not float(2 * z).is_integer():
        raise ValueError(f"z must be an integer or half-integer, got {z}")
    n = int(z - 0.5)  # z = n + 1/2
    return math.factorial(2 * n) * math.sqrt(math.pi) / (4 ** n * math.factorial(n))


def bessel_I(nu: float, x: float) -> float:
    """I_nu(x) by direct summation of the power series.

    All terms are positive so the sum is free of cancellation; it is only
    limited by overflow of the individual terms (x up to roughly 700).
    """
    nu = _check_order(nu)
    x = float(x)
    if x < 0:
        raise ValueError("bessel_I is only defined here for x >= 0")
    if x == 0.0:
        return 1.0 if nu == 0 else 0.0
    half = 0.5 * x
    # first term (x/2)^nu / Gamma(nu+1) in log space to avoid overflow of each factor
    log_t = nu * math.log(half) - math.lgamma(nu + 1.0) if nu > 60 else None
    term = math.exp(log_t) if log_t is not None else half ** nu / gamma_int_or_half(nu + 1.0)
    total = term
    q = half * half
    k = 0
    while True:
        k += 1
        term *= q / (k * (k + nu))
        total += term
        if term < 1e-17 * total:
            break
    return total


def spherical_i(l: int, x: float) -> float:
    """Modified spherical Bessel function i_l(x) = sqrt(pi/(2x)) I_{l+1/2}(x).

    Upward recurrence from the sinh/cosh closed forms where it is stable
    (x > l), otherwise the series x^l/(2l+1)!! * sum (x^2/2)^k / (k! (2l+3)...(2l+2k+1)).
    """
    if l < 0 or int(l) != l:
        raise ValueError("l must be a nonnegative integer")
    l = int(l)
    x = float(x)
    if x < 0:
        raise ValueError("spherical_i is only defined here for x >= 0")
    if x == 0.0:
        return 1.0 if l == 0 else 0.0
    if x > l and x > 0.5:
        i_prev = math.sinh(x) / x
        if l == 0:
            return i_prev
        i_cur = (x * math.cosh(x) - math.sinh(x)) / (x * x)
        for n in range(1, l):
            i_prev, i_cur = i_cur, i_prev - (2 * n + 1) / x * i_cur
        return i_cur
    dfact = 1.0
    for m in range(1, 2 * l + 2, 2):
        dfact *= m
    term = x ** l / dfact
    total = term
    q = 0.5 * x * x
    k = 0
    while True:
        k += 1
        term *= q / (k * (2 * l + 2 * k + 1))
        total += term
        if term < 1e-17 * total:
            break
    return total


def _ratio_cf(nu: float, x: float) -> float:
    """I_{nu+1}(x)/I_nu(x) from the Gauss continued fraction (modified Lentz).

    ratio = 1 / (b_0 + 1 / (b_1 + 1 / (b_2 + ...))),  b_k = 2 (nu + 1 + k) / x
    """
    f = 2.0 * (nu + 1.0) / x
    c = f
    d = 0.0
    for k in range(1, _CF_MAX_ITER):
        b = 2.0 * (nu + 1.0 + k) / x
        d = b + d
        if d == 0.0:
            d = _TINY
        c = b + 1.0 / c
        if c == 0.0:
            c = _TINY
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            return 1.0 / f
    raise RuntimeError(f"continued fraction did not converge for nu={nu}, x={x}")


def bessel_ratio(l: int, x: float, family: Family | str = Family.CYLINDRICAL) -> float:
    """I_{l+1}(x)/I_l(x) (cylindrical) or i_{l+1}(x)/i_l(x) (spherical).

    The spherical ratio equals I_{l+3/2}/I_{l+1/2}.
    """
    family = Family(family)
    if l < 0 or int(l) != l:
        raise ValueError("l must be a nonnegative integer")
    x = float(x)
    if x <= 0:
        raise ValueError("bessel_ratio requires x > 0")
    nu = float(l) if family is Family.CYLINDRICAL else l + 0.5
    if x <= SERIES_MAX_X:
        return bessel_I(nu + 1.0, x) / bessel_I(nu, x)
    return _ratio_cf(nu, x)


def coth_minus_inv(q: float) -> float:
    """coth(q) - 1/q, with a Taylor branch below q = 1e-2."""
    q = float(q)
    if q <= 0:
        raise ValueError("coth_minus_inv requires q > 0")
    if q < 1e-2:
        q2 = q * q
        return q * (1.0 / 3.0 - q2 * (1.0 / 45.0 - q2 * (2.0 / 945.0 - q2 / 4725.0)))
    return 1.0 / math.tanh(q) - 1.0 / q


# vectorised conveniences used by the stability sweeps
bessel_I_vec = np.vectorize(bessel_I, otypes=[float])
bessel_ratio_vec = np.vectorize(bessel_ratio, otypes=[float], excluded={"family"})
