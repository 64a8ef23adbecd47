"""Time stepping for the diffuse-interface tumour model and its diagnostics.

Three steppers share one structure: a coupled (phi, mu) obstacle solve with
lagged nutrient, followed by a linear solve for the new nutrient (and, for
the Darcy variant, the pressure):

* ``step_cristini``: degenerate mobility 0.5 (1 + phi_old)^2, source
  (P sigma_old - A)(phi + 1), nutrient with diffusivity D(phi), active
  transport lam and consumption C (phi + 1)/2;
* ``step_darcy``: constant mobility m0, density-weighted source terms,
  explicit Darcy transport and a pressure Poisson problem (p = 0 on the
  boundary);
* ``step_growing_circle``: the reduced benchmark with mobility 1 and the
  interface-concentrated source/sink (4 sqrt 2 / pi)(1 - phi^2)/eps.

All inner products on the right are lumped; stiffness coefficients are
element averages of nodal values.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import mesh as fem
from .mesh import Mesh
from .solvers import CHStepProblem, VIResult, solve_ch_step_vi, solve_dirichlet

GROWING_CIRCLE_WEIGHT = 4.0 * math.sqrt(2.0) / math.pi
JUMP_DELTA = 1e-3
MOBILITY_FLOOR = 1e-12


@dataclass(frozen=True)
class ModelParams:
    P: float = 0.1
    A: float = 0.0
    C: float = 2.0
    D: float = 1.0
    chi_phi: float = 5.0
    lam: float = 0.0
    beta: float = 0.1
    eps: float = 0.01
    K: float = 0.0
    alpha: float = 0.0
    rho_S: float = 2.0
    sigma_B: float = 1.0
    m0: float = 1.0
    potential: str = "obstacle"

    def __post_init__(self):
        for name in ("P", "A", "C", "chi_phi", "lam", "K"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")
        for name in ("eps", "beta", "D", "m0"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if abs(self.alpha) > self.rho_S:
            raise ValueError("|alpha| must not exceed rho_S")
        if self.potential not in ("obstacle", "well"):
            raise ValueError("potential must be 'obstacle' or 'well'")

    def with_(self, **kw) -> "ModelParams":
        return replace(self, **kw)


@dataclass
class StepInfo:
    vi_iterations: int = 0
    kkt: float = 0.0
    residual_a: float = 0.0


@dataclass
class FieldState:
    mesh: Mesh
    phi: np.ndarray
    mu: np.ndarray
    sigma: np.ndarray
    p: np.ndarray
    t: float = 0.0
    info: StepInfo | None = field(default=None, repr=False)

    def __post_init__(self):
        n = self.mesh.n_vertices
        for name in ("phi", "mu", "sigma", "p"):
            if getattr(self, name).shape != (n,):
                raise ValueError(f"{name} has wrong length")

    def fields(self) -> dict:
        return {"phi": self.phi, "mu": self.mu, "sigma": self.sigma, "p": self.p}


@dataclass
class Diagnostics:
    t: float
    mass: float
    energy: float
    radius_mean: float
    radius_min: float
    radius_max: float
    sigma_jump: float | None

    def row(self) -> tuple:
        nan = float("nan")
        return (self.t, self.mass, self.energy, self.radius_mean, self.radius_min,
                self.radius_max, nan if self.sigma_jump is None else self.sigma_jump)


TIMESERIES_COLUMNS = ("t", "mass", "energy", "radius_mean", "radius_min", "radius_max", "sigma_jump")


# --- operators ------------------------------------------------------------------

def laplacian(mesh: Mesh) -> sp.csr_matrix:
    op = mesh.__dict__.get("_laplacian")
    if op is None:
        op = fem.assemble_stiffness(mesh, 1.0)
        mesh.__dict__["_laplacian"] = op
    return op


def diffusivity(phi: np.ndarray, D: float) -> np.ndarray:
    return 0.5 * (1.0 + D) + 0.5 * phi * (1.0 - D)


def mobility(phi: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + phi) ** 2


def mobility_stiffness(mesh: Mesh, phi: np.ndarray) -> sp.csr_matrix:
    """Stiffness with the element-averaged degenerate mobility; averages below MOBILITY_FLOOR count as zero."""
    m = mesh.element_average(mobility(phi))
    m[m < MOBILITY_FLOOR] = 0.0
    return mesh.csr(m[:, None, None] * mesh._local_stiffness)


def solve_sigma(mesh: Mesh, phi: np.ndarray, params: ModelParams, tol: float = 1e-10,
                x0: np.ndarray | None = None) -> np.ndarray:
    """(D(phi) grad s, grad v)_h + C/2 (s (phi+1), v)_h = lam (D(phi) grad phi, grad v)_h, s = sigma_B on the boundary."""
    KD = fem.assemble_stiffness(mesh, diffusivity(phi, params.D))
    S = KD + sp.diags(0.5 * params.C * mesh.lumped * (phi + 1.0))
    rhs = params.lam * (KD @ phi)
    return solve_dirichlet(S, rhs, mesh.boundary, params.sigma_B, tol=tol, x0=x0)


def _obstacle_step(mesh: Mesh, phi_old, K_mob, s, f, g, beta_eps, beta_over_eps, tau, vi_tol):
    prob = CHStepProblem(mass=mesh.lumped, K_mob=K_mob, L=beta_eps * laplacian(mesh),
                         phi_old=phi_old, tau=tau, g=g, s=s, f=f, c=beta_over_eps)
    return solve_ch_step_vi(prob, tol=vi_tol)


def _well_step(mesh: Mesh, phi_old, K_mob, s, f, g_extra, beta, eps, tau):
    """Smooth double-well (phi^2-1)^2/4 with one Newton linearisation of psi' about phi_old."""
    n = mesh.n_vertices
    M = mesh.lumped
    L = beta * eps * laplacian(mesh)
    dpsi = phi_old ** 3 - phi_old
    d2psi = 3.0 * phi_old ** 2 - 1.0
    top = sp.hstack([sp.diags(M / tau - M * s), K_mob])
    bot = sp.hstack([L + sp.diags(beta / eps * M * d2psi), sp.diags(-M)])
    rhs = np.concatenate([M * phi_old / tau + f,
                          M * (beta / eps * (d2psi * phi_old - dpsi) - g_extra)])
    x = spla.spsolve(sp.vstack([top, bot], format="csc"), rhs)
    return VIResult(x[:n], x[n:], 1, 0.0, 0.0, np.zeros(n, bool), np.zeros(n, bool))


def step_cristini(state: FieldState, params: ModelParams, tau: float,
                  vi_tol: float = 1e-8, lin_tol: float = 1e-10) -> FieldState:
    if not tau > 0:
        raise ValueError("tau must be positive")
    mesh = state.mesh
    M = mesh.lumped
    K_mob = mobility_stiffness(mesh, state.phi)
    s = params.P * state.sigma - params.A
    if params.potential == "obstacle":
        g = params.beta / params.eps * state.phi + params.chi_phi * state.sigma
        res = _obstacle_step(mesh, state.phi, K_mob, s, M * s, g, params.beta * params.eps,
                             params.beta / params.eps, tau, vi_tol)
    else:
        res = _well_step(mesh, state.phi, K_mob, s, M * s, params.chi_phi * state.sigma,
                         params.beta, params.eps, tau)
    sigma = solve_sigma(mesh, res.phi, params, lin_tol, x0=state.sigma)
    return FieldState(mesh, res.phi, res.mu, sigma, np.zeros(mesh.n_vertices), state.t + tau,
                      StepInfo(res.iterations, res.kkt, res.residual_a))


def darcy_transport(mesh: Mesh, phi: np.ndarray, p: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Lumped (grad p . grad phi - w |grad phi|^2, eta)_h with elementwise gradients."""
    gphi = mesh.gradient(phi)
    gp = mesh.gradient(p)
    a3 = mesh.areas / 3.0
    dot = np.einsum("mk,mk->m", gp, gphi)
    sq = np.einsum("mk,mk->m", gphi, gphi)
    t = mesh.triangles
    out = np.bincount(t.ravel(), np.repeat(a3 * dot, 3), minlength=mesh.n_vertices)
    out -= w * np.bincount(t.ravel(), np.repeat(a3 * sq, 3), minlength=mesh.n_vertices)
    return out


def solve_pressure(mesh: Mesh, phi, mu, sigma, params: ModelParams, tol: float = 1e-10,
                   x0: np.ndarray | None = None) -> np.ndarray:
    """(grad p, grad v) = ((mu + chi sigma) grad phi, grad v)_h + alpha/(2K) ((P sigma - A)(phi+1), v)_h, p = 0 on the boundary."""
    if params.K == 0.0:
        return np.zeros(mesh.n_vertices)
    w = mu + params.chi_phi * sigma
    rhs = fem.assemble_stiffness(mesh, w) @ phi
    rhs += params.alpha / (2.0 * params.K) * mesh.lumped * (params.P * sigma - params.A) * (phi + 1.0)
    return solve_dirichlet(laplacian(mesh), rhs, mesh.boundary, 0.0, tol=tol, x0=x0)


def step_darcy(state: FieldState, params: ModelParams, tau: float,
               vi_tol: float = 1e-8, lin_tol: float = 1e-10) -> FieldState:
    if not tau > 0:
        raise ValueError("tau must be positive")
    mesh = state.mesh
    M = mesh.lumped
    K_mob = params.m0 * laplacian(mesh)
    growth = params.P * state.sigma - params.A
    s = 0.5 * params.rho_S * growth
    f = M * s - 0.5 * params.alpha * M * state.phi * growth * (state.phi + 1.0)
    if params.K > 0.0:
        w = state.mu + params.chi_phi * state.sigma
        f = f + params.K * darcy_transport(mesh, state.phi, state.p, w)
    g = params.beta / params.eps * state.phi + params.chi_phi * state.sigma
    res = _obstacle_step(mesh, state.phi, K_mob, s, f, g, params.beta * params.eps,
                         params.beta / params.eps, tau, vi_tol)
    sigma = solve_sigma(mesh, res.phi, params, lin_tol, x0=state.sigma)
    p = solve_pressure(mesh, res.phi, res.mu, sigma, params, lin_tol, x0=state.p)
    return FieldState(mesh, res.phi, res.mu, sigma, p, state.t + tau,
                      StepInfo(res.iterations, res.kkt, res.residual_a))


def growing_circle_sigma_solve(mesh: Mesh, phi: np.ndarray, eps: float, boundary_values,
                               tol: float = 1e-10, x0=None) -> np.ndarray:
    k = GROWING_CIRCLE_WEIGHT / eps
    S = laplacian(mesh) + sp.diags(k * mesh.lumped * (1.0 - phi ** 2))
    return solve_dirichlet(S, np.zeros(mesh.n_vertices), mesh.boundary, boundary_values, tol=tol, x0=x0)


def step_growing_circle(state: FieldState, eps: float, tau: float,
                        sigma_D: Callable[[np.ndarray, float], np.ndarray],
                        vi_tol: float = 1e-8, lin_tol: float = 1e-10) -> FieldState:
    """Reduced benchmark step; sigma_D(r, t) gives the Dirichlet data at radius r."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    mesh = state.mesh
    M = mesh.lumped
    k = GROWING_CIRCLE_WEIGHT / eps
    f = M * k * (1.0 - state.phi ** 2) * state.sigma
    res = _obstacle_step(mesh, state.phi, laplacian(mesh), 0.0, f, state.phi / eps,
                         eps, 1.0 / eps, tau, vi_tol)
    t = state.t + tau
    bvals = _boundary_data(mesh, sigma_D, t)
    sigma = growing_circle_sigma_solve(mesh, res.phi, eps, bvals, lin_tol, x0=state.sigma)
    return FieldState(mesh, res.phi, res.mu, sigma, np.zeros(mesh.n_vertices), t,
                      StepInfo(res.iterations, res.kkt, res.residual_a))


def _boundary_data(mesh: Mesh, sigma_D, t: float) -> np.ndarray:
    c = mesh.domain.centroid
    r = np.hypot(mesh.vertices[:, 0] - c[0], mesh.vertices[:, 1] - c[1])
    vals = np.zeros(mesh.n_vertices)
    vals[mesh.boundary] = sigma_D(r[mesh.boundary], t)
    return vals


def tau_safeguard(h_min: float, beta: float, eps: float, m_max: float) -> float:
    """Advisory step bound h_min^2 / (4 beta eps m_max) for the explicit transport terms."""
    return h_min ** 2 / (4.0 * beta * eps * m_max)


# --- initial data -----------------------------------------------------------------

def obstacle_profile(dist: np.ndarray, eps: float) -> np.ndarray:
    """sin(d/eps) clipped to the band |d| <= pi eps/2; d > 0 inside the tumour."""
    return np.sin(np.clip(np.asarray(dist) / eps, -0.5 * math.pi, 0.5 * math.pi))


def circle_distance(center=(0.0, 0.0), radius: float = 1.0):
    cx, cy = center

    def dist(x: np.ndarray) -> np.ndarray:
        return radius - np.hypot(x[:, 0] - cx, x[:, 1] - cy)
    return dist


def perturbed_circle_distance(r0: float = 2.0, amp: float = 0.1, mode: int = 2,
                              phase: float = 0.0, center=(0.0, 0.0)):
    """Approximate signed distance to r = r0 + amp cos(mode (theta - phase))."""
    cx, cy = center

    def dist(x: np.ndarray) -> np.ndarray:
        dx, dy = x[:, 0] - cx, x[:, 1] - cy
        r = np.hypot(dx, dy)
        th = np.arctan2(dy, dx)
        rb = r0 + amp * np.cos(mode * (th - phase))
        drb = -amp * mode * np.sin(mode * (th - phase))
        return (rb - r) / np.sqrt(1.0 + (drb / rb) ** 2)
    return dist


def initial_state(mesh: Mesh, dist_fn, params: ModelParams, sigma: bool = True) -> FieldState:
    phi = obstacle_profile(dist_fn(mesh.vertices), params.eps)
    n = mesh.n_vertices
    sig = solve_sigma(mesh, phi, params) if sigma else np.full(n, params.sigma_B)
    return FieldState(mesh, phi, np.zeros(n), sig, np.zeros(n), 0.0)


def initial_growing_circle(mesh: Mesh, eps: float, rho0: float, sigma_D) -> FieldState:
    phi = obstacle_profile(circle_distance(tuple(mesh.domain.centroid), rho0)(mesh.vertices), eps)
    n = mesh.n_vertices
    sig = growing_circle_sigma_solve(mesh, phi, eps, _boundary_data(mesh, sigma_D, 0.0))
    return FieldState(mesh, phi, np.zeros(n), sig, np.zeros(n), 0.0)


# --- diagnostics -------------------------------------------------------------------

def energy(mesh: Mesh, phi: np.ndarray, beta: float, eps: float) -> float:
    """Lumped Ginzburg-Landau energy with the obstacle potential (1 - phi^2)/2."""
    bulk = beta / eps * float(mesh.lumped @ (0.5 * (1.0 - phi ** 2)))
    g = mesh.gradient(phi)
    grad = 0.5 * beta * eps * float(mesh.areas @ np.einsum("mk,mk->m", g, g))
    return bulk + grad


def mass(mesh: Mesh, phi: np.ndarray) -> float:
    return float(mesh.lumped @ phi)


def sigma_jump_from_samples(phi_s: np.ndarray, sigma_s: np.ndarray,
                            delta: float = JUMP_DELTA) -> float | None:
    """sigma on the tumour edge of the band minus sigma on its healthy edge.

    Starting from the first sign change of phi along the probe, walk back to
    the nearest sample with |phi| > 1 - delta and forward to the next one; the
    jump is sigma(phi ~ +1 side) - sigma(phi ~ -1 side).  None if the probe
    does not cross a complete band.
    """
    # a crossing may land exactly on a sample with phi = 0
    idx = np.flatnonzero(((phi_s[:-1] > 0) & (phi_s[1:] <= 0)) | ((phi_s[:-1] < 0) & (phi_s[1:] >= 0)))
    if idx.size == 0:
        return None
    k = int(idx[0])
    pure = np.abs(phi_s) > 1.0 - delta
    before = np.flatnonzero(pure[: k + 1])
    after = np.flatnonzero(pure[k + 1:])
    if before.size == 0 or after.size == 0:
        return None
    i, j = int(before[-1]), k + 1 + int(after[0])
    if phi_s[i] > 0 and phi_s[j] < 0:
        return float(sigma_s[i] - sigma_s[j])
    if phi_s[i] < 0 and phi_s[j] > 0:
        return float(sigma_s[j] - sigma_s[i])
    return None


def sigma_jump(mesh: Mesh, phi, sigma, p0, p1, n: int = 2000, delta: float = JUMP_DELTA):
    a = fem.line_sample(mesh, phi, p0, p1, n)
    b = fem.line_sample(mesh, sigma, p0, p1, n)
    return sigma_jump_from_samples(a[:, 1], b[:, 1], delta)


def diagnostics(state: FieldState, beta: float, eps: float, probe=None, probe_n: int = 2000,
                center=None) -> Diagnostics:
    mesh = state.mesh
    try:
        rad = fem.zero_level_radius(mesh, state.phi, center)
    except fem.MeshError:
        rad = {"mean_radius": math.nan, "min": math.nan, "max": math.nan}
    jump = None
    if probe is not None:
        jump = sigma_jump(mesh, state.phi, state.sigma, probe[0], probe[1], probe_n)
    return Diagnostics(state.t, mass(mesh, state.phi), energy(mesh, state.phi, beta, eps),
                       rad["mean_radius"], rad["min"], rad["max"], jump)


# --- adaptive driver ----------------------------------------------------------------

@dataclass(frozen=True)
class AdaptConfig:
    h_min: float
    h_max: float
    buffer: float
    margin: float | None = None  # remesh when the band comes within margin of coarse cells

    def __post_init__(self):
        if not (0 < self.h_min < self.h_max):
            raise ValueError("need 0 < h_min < h_max")
        if self.buffer < 0:
            raise ValueError("buffer must be nonnegative")


def adapt(state: FieldState, base: Mesh, cfg: AdaptConfig, force: bool = False) -> FieldState:
    """Rebuild the mesh around the current band if it approaches the coarse region."""
    margin = 0.5 * cfg.buffer if cfg.margin is None else cfg.margin
    if not force and not fem.needs_adapt(state.mesh, state.phi, cfg.h_min, margin):
        return state
    new = fem.adapt_from_base(base, state.mesh, state.phi, cfg.h_min, cfg.h_max, cfg.buffer)
    vals = fem.transfer(state.mesh, new, state.fields())
    vals["phi"] = np.clip(vals["phi"], -1.0, 1.0)
    return FieldState(new, vals["phi"], vals["mu"], vals["sigma"], vals["p"], state.t, state.info)


def run(state: FieldState, step: Callable[[FieldState], FieldState], n_steps: int,
        base: Mesh | None = None, adapt_cfg: AdaptConfig | None = None,
        callback: Callable[[int, FieldState], None] | None = None) -> FieldState:
    """Advance n_steps; remesh between steps when an adaptivity config is given."""
    for k in range(1, n_steps + 1):
        state = step(state)
        if adapt_cfg is not None and base is not None:
            state = adapt(state, base, adapt_cfg)
        if callback is not None:
            callback(k, state)
    return state
