"""Experiment drivers shared by the command line and the acceptance tests."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import mesh as fem
from .phasefield import (AdaptConfig, Diagnostics, FieldState, ModelParams, circle_distance,
                         diagnostics, initial_growing_circle, initial_state, obstacle_profile,
                         perturbed_circle_distance, run, step_cristini, step_darcy,
                         step_growing_circle)
from .radial import growing_circle_exact

# fixed parameter sets of the published experiments
JUMP_PARAMS = ModelParams(P=0.1, chi_phi=5.0, A=0.0, D=1.0, beta=0.1, C=2.0, sigma_B=1.0)
DARCY_PARAMS = ModelParams(P=0.1, A=0.0, C=1.0, chi_phi=10.0, beta=0.1, m0=1.0, K=0.01,
                           lam=0.03, D=1.0, sigma_B=1.0, rho_S=2.0)
DARCY_CASES = {"no_darcy": dict(K=0.0, alpha=0.0), "case1": dict(alpha=0.0),
               "case2": dict(alpha=2.0 / 3.0), "case3": dict(alpha=-2.0 / 3.0)}


def make_domain(kind: str, size: float):
    if kind == "rect":
        return fem.Rect(-size, size, -size, size)
    if kind == "disk":
        return fem.Disk(size)
    raise ValueError(f"unknown domain {kind!r}")


@dataclass
class SimResult:
    state: FieldState
    diagnostics: list = field(default_factory=list)
    steps: int = 0
    max_kkt: float = 0.0
    max_vi_iterations: int = 0


def simulate(params: ModelParams, domain, h_min: float, h_max: float, tau: float, t_end: float,
             dist_fn, darcy: bool = False, buffer: float | None = None, margin: float | None = None,
             probe=None, probe_n: int = 4000, diag_every: int = 10, startup_substeps: int = 1,
             on_step: Callable[[int, FieldState], None] | None = None) -> SimResult:
    """Adaptive run of the degenerate-mobility scheme or of its Darcy extension.

    With startup_substeps > 1 the first interval of length tau is covered by
    that many equal substeps.  The Darcy transport term is explicit and starts
    from mu = 0, so the first step sees (mu + chi sigma) |grad phi|^2 of order
    chi / eps^2 in the band; a full coarse step can then have no admissible
    solution.
    """
    buffer = params.eps if buffer is None else buffer
    cfg = AdaptConfig(h_min, h_max, buffer, margin)
    base = fem.build_mesh(domain, h_max)
    mesh = fem.refine_to_function(base, lambda x: obstacle_profile(dist_fn(x), params.eps),
                                  h_min, h_max, buffer)
    state = initial_state(mesh, dist_fn, params)
    n_steps = int(round(t_end / tau))
    out = SimResult(state)
    out.diagnostics.append(diagnostics(state, params.beta, params.eps, probe, probe_n))

    stepper = step_darcy if darcy else step_cristini

    def step(s):
        return stepper(s, params, tau)

    def cb(k, s):
        out.max_kkt = max(out.max_kkt, s.info.kkt)
        out.max_vi_iterations = max(out.max_vi_iterations, s.info.vi_iterations)
        if k % diag_every == 0 or k == n_steps:
            out.diagnostics.append(diagnostics(s, params.beta, params.eps, probe, probe_n))
        if on_step is not None:
            on_step(k, s)

    first = 0
    if startup_substeps > 1 and n_steps > 0:
        sub = tau / startup_substeps
        state = run(state, lambda s: stepper(s, params, sub), startup_substeps, base, cfg)
        state.t = tau
        cb(1, state)
        first = 1
    out.state = run(state, step, n_steps - first, base, cfg,
                    lambda k, s: cb(k + first, s))
    out.steps = n_steps
    return out


def initial_distance(shape: str = "circle", radius: float = 2.0, amp: float = 0.1,
                     mode: int = 2, phase: float = 0.0):
    if shape == "circle":
        return circle_distance((0.0, 0.0), radius)
    if shape == "perturbed":
        return perturbed_circle_distance(radius, amp, mode, phase)
    raise ValueError(f"unknown initial shape {shape!r}")


def jump_run(eps: float, lam: float, h_min: float | None = None, tau: float = 0.02,
             t_end: float = 4.0, size: float = 12.5, h_max: float = 1.0,
             radius: float = 2.0, params: ModelParams = JUMP_PARAMS) -> tuple[float, SimResult]:
    """Nutrient jump across the band at t_end for a circular tumour of the given radius."""
    h_min = eps if h_min is None else h_min
    params = params.with_(eps=eps, lam=lam)
    probe = ((0.0, 0.0), (2.0 * radius, 0.0))
    res = simulate(params, fem.Rect(-size, size, -size, size), h_min, h_max, tau, t_end,
                   circle_distance((0.0, 0.0), radius), probe=probe,
                   diag_every=max(1, int(round(t_end / tau))))
    jump = res.diagnostics[-1].sigma_jump
    return (math.nan if jump is None else jump), res


def darcy_ordering(eps: float = 0.01, h_min: float | None = None, tau: float = 0.01,
                   t_end: float = 1.5, size: float = 6.25, h_max: float = 0.5,
                   shape: str = "perturbed", startup_substeps: int = 10,
                   cases=None) -> dict:
    """Final diagnostics of the no-flow run and the density cases (all by default)."""
    h_min = eps if h_min is None else h_min
    dist = initial_distance(shape)
    out = {}
    for name in DARCY_CASES if cases is None else cases:
        params = DARCY_PARAMS.with_(eps=eps, **DARCY_CASES[name])
        res = simulate(params, fem.Rect(-size, size, -size, size), h_min, h_max, tau, t_end,
                       dist, darcy=True, diag_every=max(1, int(round(t_end / tau))),
                       startup_substeps=startup_substeps)
        out[name] = res.diagnostics[-1]
    return out


# --- growing-circle benchmark ----------------------------------------------------

@dataclass
class CircleResult:
    eps: float
    t: np.ndarray
    radius: np.ndarray
    exact: np.ndarray
    profile_r: np.ndarray
    profile_fem: np.ndarray
    profile_exact: np.ndarray
    profile_time: float
    max_kkt: float
    n_vertices: int

    @property
    def error(self) -> np.ndarray:
        return np.abs(self.radius - self.exact)

    @property
    def max_error(self) -> float:
        return float(np.max(self.error))

    @property
    def profile_error(self) -> float:
        return float(np.max(np.abs(self.profile_fem - self.profile_exact)))


def growing_circle(eps: float, h_min: float, tau: float = 5e-4, t_end: float = 0.4,
                   h_max: float = 0.25, radius: float = 2.0, rho0: float = 0.25,
                   R_exact: float = 10.0, sigma_R: float = 2.0, sample_every: int = 20,
                   profile_time: float = 0.1, buffer: float | None = None,
                   on_step: Callable[[int, FieldState], None] | None = None) -> CircleResult:
    """Diffuse benchmark on a disk with the sharp-interface radius as reference."""
    n_steps = int(round(t_end / tau))
    exact = growing_circle_exact(np.linspace(0.0, t_end, n_steps + 1), R_exact, sigma_R, rho0)
    if exact.event:
        raise ValueError("exact radius reaches R_exact before t_end")
    buffer = max(2.0 * eps, 0.1) if buffer is None else buffer
    cfg = AdaptConfig(h_min, h_max, buffer)
    base = fem.build_mesh(fem.Disk(radius), h_max)
    mesh = fem.refine_to_function(
        base, lambda x: obstacle_profile(rho0 - np.hypot(x[:, 0], x[:, 1]), eps),
        h_min, h_max, buffer)
    state = initial_growing_circle(mesh, eps, rho0, exact.sigma)
    ts = [0.0]
    rs = [fem.zero_level_radius(mesh, state.phi)["mean_radius"]]
    k_profile = int(round(profile_time / tau))
    prof = {}
    kkt = [0.0]

    def cb(k, s):
        kkt[0] = max(kkt[0], s.info.kkt)
        if k % sample_every == 0 or k == n_steps:
            ts.append(s.t)
            rs.append(fem.zero_level_radius(s.mesh, s.phi)["mean_radius"])
        if k == k_profile:
            samp = fem.line_sample(s.mesh, s.sigma, (0.0, 0.0), (radius, 0.0), 400)
            prof["r"] = samp[:, 0]
            prof["fem"] = samp[:, 1]
            prof["exact"] = exact.sigma(samp[:, 0], s.t)
        if on_step is not None:
            on_step(k, s)

    state = run(state, lambda s: step_growing_circle(s, eps, tau, exact.sigma), n_steps,
                base, cfg, cb)
    t = np.array(ts)
    if not prof:
        prof = {"r": np.array([]), "fem": np.array([]), "exact": np.array([])}
    return CircleResult(eps, t, np.array(rs), exact.rho_at(t), prof["r"], prof["fem"],
                        prof["exact"], profile_time, kkt[0], state.mesh.n_vertices)


def is_decreasing(values) -> bool:
    v = list(values)
    return all(b < a for a, b in zip(v, v[1:]))
