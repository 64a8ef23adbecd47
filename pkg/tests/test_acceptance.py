"""One check per acceptance criterion; each prints a PASS/FAIL line via criterion_report."""
import math

import numpy as np
import pytest

from tumourgrowth import mesh as fem
from tumourgrowth import phasefield as pf
from tumourgrowth.experiments import (darcy_ordering, growing_circle, is_decreasing,
                                      jump_run)
from tumourgrowth.phasefield import ModelParams
from tumourgrowth.radial import RadialParams, interface_values, radial_coefficients, radial_fields
from tumourgrowth.specialfn import Family, bessel_I, bessel_ratio, spherical_i
from tumourgrowth.stability import (PerturbParams, critical_apoptosis, phase_diagram,
                                    shape_growth_rate, sign_checks)

from oracles import RATIOS_CYL, RATIOS_SPH, bvp_a3, d1, d2, mu, sig


# --- 1: growing circle ---------------------------------------------------------

@pytest.mark.slow
def test_c1_growing_circle_convergence(criterion_report):
    eps_list = (0.1, 0.075, 0.05)
    runs = [growing_circle(eps, eps / 2, tau=5e-4) for eps in eps_list]
    errs = [r.max_error for r in runs]
    ok = is_decreasing(errs) and errs[-1] <= 0.05
    detail = ", ".join(f"eps={e}: {x:.4f}" for e, x in zip(eps_list, errs))
    assert criterion_report("C1 growing-circle convergence", ok, f"max radius error {detail}")


# --- 2: nutrient jump --------------------------------------------------------------

@pytest.mark.slow
def test_c2_nutrient_jump(criterion_report):
    target = 0.14
    fine, _ = jump_run(0.01, 0.07)
    j = {lam: jump_run(0.02, lam)[0] for lam in (0.0, 0.03, 0.07, 0.09)}
    coarse, _ = jump_run(0.04, 0.07)
    rel_fine = abs(fine - target) / target
    rel_desk = abs(j[0.07] - target) / target
    improves = abs(j[0.07] - target) < abs(coarse - target)
    ordered = j[0.09] > j[0.07] > j[0.03] > j[0.0]
    # "approximately zero": within the desk-scale tolerance of the jump itself
    near_zero = abs(j[0.0]) <= 0.25 * target
    ok = rel_fine <= 0.15 and rel_desk <= 0.25 and improves and ordered and near_zero
    detail = (f"eps=0.01: {fine:.4f} ({100 * rel_fine:.1f}%), eps=0.02: {j[0.07]:.4f} "
              f"({100 * rel_desk:.1f}%), eps=0.04: {coarse:.4f}; lam 0.09/0.07/0.03/0: "
              f"{j[0.09]:.4f}/{j[0.07]:.4f}/{j[0.03]:.4f}/{j[0.0]:.4f}")
    assert criterion_report("C2 nutrient jump law", ok, detail)


# --- 3: stability master consistency --------------------------------------------

def test_c3_stability_root_consistency(criterion_report):
    rng = np.random.default_rng(20240)
    worst = 0.0
    for _ in range(200):
        d = int(rng.choice([2, 3]))
        l = int(rng.integers(1, 7))
        pp = PerturbParams(l, RadialParams(d=d, R=13.0, C=1.0, sigma_inf=1.0,
                                           P=rng.uniform(0.0, 0.5), D=rng.uniform(0.5, 2.0),
                                           chi_phi=rng.uniform(0.0, 2.0),
                                           lam=rng.uniform(0.0, 1.0),
                                           beta_gamma=rng.uniform(0.01, 0.5)))
        q = rng.uniform(0.05, 13.0)
        worst = max(worst, abs(shape_growth_rate(q, critical_apoptosis(q, pp), pp)))
    ok = worst <= 1e-10
    assert criterion_report("C3 stability root consistency", ok,
                            f"max |growth rate at A_c| = {worst:.2e} over 200 draws")


# --- 4: stability diagram --------------------------------------------------------

def lambda_trend(d, chi, form):
    pp = PerturbParams(2, RadialParams(d=d, R=13.0, P=0.1, D=1.0, beta_gamma=0.1))
    rows = phase_diagram(np.linspace(0.2, 13.0, 200), [0.0, 0.25, 0.5], [chi], pp, form)
    a = np.array([r[-1] for r in rows]).reshape(3, -1)
    return np.diff(a, axis=0)


def test_c4_stability_diagram(criterion_report):
    panels = [("a", 2, 0.0, +1), ("b", 3, 0.0, +1), ("c", 2, 0.1, +1), ("c", 2, 0.3, -1),
              ("d", 3, 0.3, +1), ("d", 3, 1.7, -1)]
    results = []
    for name, d, chi, sign in panels:
        diff = lambda_trend(d, chi, "printed")
        results.append((name, chi, bool(np.all(sign * diff > 0))))
    ok = all(r[2] for r in results)
    derived = lambda_trend(3, 0.3, "derived")
    detail = (" ".join(f"({n}) chi={c}: {'ok' if good else 'no'}" for n, c, good in results)
              + f"; root form in (d) chi=0.3: diff in [{derived.min():.4f}, {derived.max():.4f}]")
    assert criterion_report("C4 stability diagram trends", ok, detail)


# --- 5: sign checks ----------------------------------------------------------------

def test_c5_sign_checks(criterion_report):
    grid = sign_checks(np.linspace(0.013, 13.0, 1000))
    ratio = sign_checks(np.linspace(0.01, 13.0, 1000))
    # bounds are stated to three decimals
    in_range = round(ratio.ratio_min, 3) >= 0.400 and round(ratio.ratio_max, 3) <= 1.459
    ok = grid.all_pass and len(grid.rows) == 1000 and in_range
    detail = (f"{len(grid.rows) - len(grid.violations)}/1000 points pass; ratio in "
              f"[{ratio.ratio_min:.7f}, {ratio.ratio_max:.7f}]")
    assert criterion_report("C5 sign checks", ok, detail)


# --- 6: radial oracle --------------------------------------------------------------

def one_sided6(f, r, h):
    # sixth-order one-sided first derivative; h < 0 looks left
    c = (-49 / 20, 6.0, -15 / 2, 20 / 3, -15 / 4, 6 / 5, -1 / 6)
    return sum(ck * f(r + k * h) for k, ck in enumerate(c)) / h


def radial_residuals(p, q):
    out = []
    f = lambda x: sig(x, q, p)
    g = lambda x: mu(x, q, p)
    h = min(q, 1.0 / math.sqrt(p.C)) / 100
    for r in np.linspace(0.05 * q, 0.95 * q, 10):
        scale = max(1.0, abs(p.C * f(r)))
        out.append(abs(d2(f, r, h) + (p.d - 1) / r * d1(f, r, h) - p.C * f(r)) / scale)
        scale = max(1.0, abs(p.P * f(r)))
        out.append(abs(d2(g, r, h) + (p.d - 1) / r * d1(g, r, h) + p.P * f(r) - p.A) / scale)
    h = (p.R - q) / 100
    for r in np.linspace(q + 0.05 * (p.R - q), p.R - 0.05 * (p.R - q), 10):
        out.append(abs(d2(f, r, h) + (p.d - 1) / r * d1(f, r, h)))
    iv = interface_values(q, p)
    s_in = sig(q * (1 - 1e-15), q, p)
    out.append(abs(s_in - sig(q, q, p) - 2 * p.lam))
    hq = 2e-3 * min(q, p.R - q)
    left = one_sided6(f, q * (1 - 1e-15), -hq)
    right = one_sided6(f, q, hq)
    out.append(abs(left - p.D * right) / max(1.0, abs(left)))
    law = p.beta_gamma * (p.d - 1) / q - p.chi_phi * (iv["sigma_T"] + iv["sigma_H"])
    out.append(abs(2 * mu(q * (1 - 1e-15), q, p) - law) / max(1.0, abs(law)))
    return max(out)


def test_c6_radial_oracle(criterion_report):
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        p = RadialParams(d=int(rng.choice([2, 3])), R=rng.uniform(5.0, 15.0),
                         sigma_inf=rng.uniform(0.2, 2.0), P=rng.uniform(0.0, 0.5),
                         A=rng.uniform(0.0, 0.5), C=rng.uniform(0.25, 4.0),
                         D=rng.uniform(0.2, 3.0), chi_phi=rng.uniform(0.0, 2.0),
                         lam=rng.uniform(0.0, 0.5), beta_gamma=rng.uniform(0.01, 0.5))
        worst = max(worst, radial_residuals(p, rng.uniform(0.2, 0.8) * p.R))
    a3 = radial_coefficients(1.0, RadialParams(d=3, R=13.0, D=1.0, C=1.0, sigma_inf=1.0)).a
    coarse, fine = bvp_a3(13_000), bvp_a3(26_000)
    bvp = fine + (fine - coarse) / 3.0
    ok = worst <= 1e-8 and abs(bvp - a3) <= 1e-6
    assert criterion_report("C6 radial oracle", ok,
                            f"max scaled residual {worst:.2e}; |a3 - BVP| = {abs(bvp - a3):.2e}")


# --- 7: scheme invariants ----------------------------------------------------------

def desk_band(eps=0.05, h_max=0.25):
    base = fem.build_mesh(fem.Rect(-1, 1, -1, 1), h_max)
    dist = pf.perturbed_circle_distance(0.5, 0.08, 3)
    mesh = fem.refine_to_function(base, lambda x: pf.obstacle_profile(dist(x), eps), eps / 2,
                                  h_max, eps)
    return base, mesh, dist


def fixed_mesh_run(params, step, n=100, tau=1e-3):
    _, m, dist = desk_band(params.eps)
    s = pf.initial_state(m, dist, params)
    scale = float(m.lumped @ np.abs(s.phi))
    m0 = pf.mass(m, s.phi)
    e_old = pf.energy(m, s.phi, params.beta, params.eps)
    stats = dict(mass=0.0, rise=-math.inf, bound=0.0, kkt=0.0)
    for _ in range(n):
        s = step(s, params, tau)
        e = pf.energy(m, s.phi, params.beta, params.eps)
        stats["mass"] = max(stats["mass"], abs(pf.mass(m, s.phi) - m0) / scale)
        stats["rise"] = max(stats["rise"], (e - e_old) / max(1.0, e_old))
        stats["bound"] = max(stats["bound"], float(np.abs(s.phi).max()))
        stats["kkt"] = max(stats["kkt"], s.info.kkt)
        e_old = e
    return stats


def adaptive_run(params, step, n=100, tau=1e-3):
    base, m, dist = desk_band(params.eps)
    s = pf.initial_state(m, dist, params)
    stats = dict(bound=0.0, kkt=0.0)

    def cb(k, st):
        stats["bound"] = max(stats["bound"], float(np.abs(st.phi).max()))
        stats["kkt"] = max(stats["kkt"], st.info.kkt)

    pf.run(s, lambda st: step(st, params, tau), n, base,
           pf.AdaptConfig(params.eps / 2, 0.25, params.eps), cb)
    return stats


@pytest.mark.slow
def test_c7_scheme_invariants(criterion_report):
    zero = ModelParams(P=0.0, A=0.0, C=0.0, chi_phi=0.0, lam=0.0, beta=0.1, eps=0.05)
    degenerate = fixed_mesh_run(zero, pf.step_cristini)
    constant = fixed_mesh_run(zero.with_(K=0.0, rho_S=2.0), pf.step_darcy)
    full = adaptive_run(ModelParams(P=0.1, A=0.0, C=2.0, chi_phi=5.0, lam=0.07, eps=0.05),
                        pf.step_cristini)
    darcy = adaptive_run(ModelParams(P=0.1, C=1.0, chi_phi=1.0, lam=0.03, K=0.01, alpha=2 / 3,
                                     rho_S=2.0, m0=1.0, eps=0.05), pf.step_darcy)
    runs = (degenerate, constant, full, darcy)
    mass = max(degenerate["mass"], constant["mass"])
    rise = max(degenerate["rise"], constant["rise"])
    bound = max(r["bound"] for r in runs)
    kkt = max(r["kkt"] for r in runs)
    ok = mass <= 1e-12 and rise <= 1e-12 and bound <= 1.0 and kkt <= 1e-8
    detail = (f"mass drift {mass:.1e}, max energy rise {rise:.1e}, max |phi| {bound!r}, "
              f"max KKT {kkt:.1e}")
    assert criterion_report("C7 scheme invariants", ok, detail)


# --- 8: Darcy ordering -------------------------------------------------------------

@pytest.mark.slow
def test_c8_darcy_ordering(criterion_report):
    h_min = 0.01
    res = darcy_ordering(eps=0.01, h_min=h_min, cases=("no_darcy", "case2", "case3"))
    r = {k: v.radius_mean for k, v in res.items()}
    m32 = r["case3"] - r["case2"]
    m2n = r["case2"] - r["no_darcy"]
    ok = m32 >= -h_min and m2n >= -h_min
    detail = (f"radius case3 {r['case3']:.4f}, case2 {r['case2']:.4f}, no-flow "
              f"{r['no_darcy']:.4f}; margins {m32:+.4f}, {m2n:+.4f} (tolerance {h_min})")
    assert criterion_report("C8 Darcy density ordering", ok, detail)


# --- 9: special functions ----------------------------------------------------------

def rel(a, b):
    return abs(a - b) / abs(b)


def test_c9_special_functions(criterion_report):
    rec = max(rel(bessel_I(a - 1, x) - bessel_I(a + 1, x), 2 * a / x * bessel_I(a, x))
              for a in range(1, 7) for x in (0.5, 1.0, 5.0, 10.0))
    h = 1e-6
    der = max(rel((bessel_I(0, x + h) - bessel_I(0, x - h)) / (2 * h), bessel_I(1, x))
              for x in (0.3, 1.0, 4.0, 12.0, 30.0))
    sph = max(rel(spherical_i(l, x), math.sqrt(math.pi / (2 * x)) * bessel_I(l + 0.5, x))
              for l in range(7) for x in np.linspace(0.1, 30.0, 60))
    ratio = max(max(rel(bessel_ratio(l, x), RATIOS_CYL[(l, x)]),
                    rel(bessel_ratio(l, x, Family.SPHERICAL), RATIOS_SPH[(l, x)]))
                for l, x in RATIOS_CYL)
    xs = np.linspace(0.05, 40.0, 400)
    mono = all(np.all(np.diff([bessel_I(l, x) for x in xs]) > 0) for l in range(6))
    ok = rec <= 1e-10 and der <= 1e-6 and sph <= 1e-10 and ratio <= 1e-10 and mono
    detail = (f"recurrence {rec:.1e}, derivative {der:.1e}, spherical {sph:.1e}, "
              f"ratios to x=700 {ratio:.1e}, monotone {mono}")
    assert criterion_report("C9 special functions", ok, detail)
