import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from tumourgrowth import mesh as fem
from tumourgrowth.solvers import (CHStepProblem, ConvergenceError, cg_solve, kkt_certificate,
                                  solve_ch_step_vi, solve_dirichlet, vi_residual,
                                  write_residual_log)


def small_mesh(h=0.1):
    return fem.build_mesh(fem.Rect(0, 1, 0, 1), h)


def test_cg_identity_one_iteration():
    b = np.array([1.0, -2.0, 3.0])
    log = []
    x = cg_solve(sp.identity(3, format="csr"), b, log=log)
    assert np.allclose(x, b) and log[-1][0] == 1


def test_cg_diagonal_two_iterations():
    A = sp.diags([2.0, 5.0])
    log = []
    x = cg_solve(A, np.array([1.0, 1.0]), jacobi=False, log=log)
    assert np.allclose(x, [0.5, 0.2], atol=1e-14) and log[-1][0] <= 2


def test_cg_zero_rhs():
    assert np.array_equal(cg_solve(sp.identity(4), np.zeros(4)), np.zeros(4))


def test_cg_reports_nonconvergence():
    m = small_mesh(0.05)
    A = fem.assemble_stiffness(m) + fem.assemble_lumped_mass(m)
    with pytest.raises(ConvergenceError) as err:
        cg_solve(A, np.ones(m.n_vertices), max_iter=2)
    assert err.value.iterations == 2 and err.value.residual > 0


def test_manufactured_bilinear():
    # xy is harmonic and reproduced exactly by the structured P1 Laplacian
    m = small_mesh(0.1)
    A = fem.assemble_stiffness(m)
    exact = m.vertices[:, 0] * m.vertices[:, 1]
    u = solve_dirichlet(A, np.zeros(m.n_vertices), m.boundary, exact, tol=1e-13)
    assert np.abs(u - exact).max() <= 1e-10


def test_cg_error_energy_norm_decreases():
    m = fem.refine_to_function(small_mesh(0.2), lambda x: np.clip((x[:, 0] - 0.4) / 0.05, -1, 1),
                               0.02, 0.2)
    A = (fem.assemble_stiffness(m) + fem.assemble_lumped_mass(m)).tocsr()
    rng = np.random.default_rng(1)
    x_true = rng.standard_normal(m.n_vertices)
    b = A @ x_true
    errs = []
    cg_solve(A, b, tol=1e-12, callback=lambda k, x: errs.append((x - x_true) @ (A @ (x - x_true))))
    assert len(errs) > 5
    assert all(b_ < a_ for a_, b_ in zip(errs, errs[1:]))


def test_cg_nullspace_mean_zero():
    m = small_mesh(0.1)
    A = fem.assemble_stiffness(m)
    rng = np.random.default_rng(2)
    b = rng.standard_normal(m.n_vertices)
    b -= b.mean()
    x = cg_solve(A, b, nullspace=True)
    assert abs(x.mean()) < 1e-12
    assert np.linalg.norm(A @ x - b) <= 1e-9 * np.linalg.norm(b)


def test_residual_log(tmp_path):
    log = []
    m = small_mesh(0.2)
    cg_solve(fem.assemble_stiffness(m) + fem.assemble_lumped_mass(m), np.ones(m.n_vertices), log=log)
    path = tmp_path / "log.csv"
    write_residual_log(path, log)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,residual" and len(lines) == len(log) + 1


def two_node(g, phi_old=(0.9, -0.9), tau=1.0, ell=0.1):
    lap = sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]]))
    return CHStepProblem(np.ones(2), lap, ell * lap, np.array(phi_old), tau, np.asarray(g, float))


def test_two_node_clamps_at_upper_bound():
    # unconstrained phi_1 = (0.9 + 1) / 1.4 > 1, so phi = (1, -1).  Mass
    # balance keeps one node inactive; the two KKT cases by hand are
    # node 2 inactive: mu = (0.2, 0.3), r_1 = -0.5 <= 0 at the upper bound
    # node 1 inactive: mu = (-0.3, -0.2), r_2 = 0.5 >= 0 at the lower bound
    prob = two_node([0.5, -0.5])
    res = solve_ch_step_vi(prob)
    assert np.array_equal(res.phi, [1.0, -1.0])
    r = vi_residual(prob, res.phi, res.mu)
    cases = [((0.2, 0.3), (-0.5, 0.0)), ((-0.3, -0.2), (0.0, 0.5))]
    assert any(np.allclose(res.mu, mu, atol=1e-12) and np.allclose(r, rr, atol=1e-12)
               for mu, rr in cases)
    assert res.kkt <= 1e-8


def test_two_node_interior():
    # weak forcing: phi_1 = (0.9 + 0.1) / 1.4 stays inside
    res = solve_ch_step_vi(two_node([0.05, -0.05]))
    assert res.phi == pytest.approx([1.0 / 1.4, -1.0 / 1.4], abs=1e-12)
    assert not res.active_upper.any() and not res.active_lower.any()


def ch_problem(m, phi_old, tau, eps=0.05, beta=0.1, seed=0):
    rng = np.random.default_rng(seed)
    g = -beta / eps * phi_old + 0.1 * rng.standard_normal(m.n_vertices)
    return CHStepProblem(m.lumped, fem.assemble_stiffness(m), beta * eps * fem.assemble_stiffness(m),
                         phi_old, tau, g, c=1.0)


def test_unconstrained_matches_linear_solve():
    m = small_mesh(0.1)
    phi_old = 0.3 * np.sin(3 * m.vertices[:, 0]) * np.cos(2 * m.vertices[:, 1])
    prob = ch_problem(m, phi_old, 1e-5)
    res = solve_ch_step_vi(prob)
    n = m.n_vertices
    M = sp.diags(prob.mass)
    A = sp.bmat([[M / prob.tau, prob.K_mob], [prob.L, -M]], format="csc")
    x = sp.linalg.spsolve(A, np.concatenate([prob.mass * phi_old / prob.tau, prob.mass * prob.g]))
    assert np.abs(res.phi - x[:n]).max() <= 1e-8
    assert np.abs(res.mu - x[n:]).max() <= 1e-6


def test_pure_phase_is_stationary():
    m = small_mesh(0.2)
    prob = ch_problem(m, np.ones(m.n_vertices), 0.1)
    res = solve_ch_step_vi(prob)
    assert np.array_equal(res.phi, np.ones(m.n_vertices))
    assert kkt_certificate(res.phi, vi_residual(prob, res.phi, res.mu)) <= 1e-8


@given(st.integers(0, 1000), st.floats(1e-4, 1e-2))
@settings(max_examples=15, deadline=None)
def test_bounded_and_kkt(seed, tau):
    m = small_mesh(0.1)
    rng = np.random.default_rng(seed)
    phi_old = np.clip(1.5 * rng.uniform(-1, 1, m.n_vertices), -1, 1)
    prob = ch_problem(m, phi_old, tau, seed=seed)
    res = solve_ch_step_vi(prob)
    assert np.all(np.abs(res.phi) <= 1.0)
    r = vi_residual(prob, res.phi, res.mu)
    assert kkt_certificate(res.phi, r) <= 1e-8
    assert res.residual_a <= 1e-8
    # lumped mass is conserved by (a) with zero sources
    assert abs(prob.mass @ (res.phi - phi_old)) <= 1e-12 * prob.mass.sum()


def test_resolve_from_other_start_is_unique():
    m = small_mesh(0.1)
    x = m.vertices
    phi_old = np.clip((0.35 - np.hypot(x[:, 0] - 0.5, x[:, 1] - 0.5)) / 0.1, -1, 1)
    prob = ch_problem(m, phi_old, 1e-3)
    a = solve_ch_step_vi(prob)
    rng = np.random.default_rng(5)
    up = rng.uniform(size=m.n_vertices) < 0.3
    lo = ~up & (rng.uniform(size=m.n_vertices) < 0.3)
    b = solve_ch_step_vi(prob, init_upper=up, init_lower=lo)
    assert np.abs(a.phi - b.phi).max() <= 1e-7


def test_degenerate_mobility_free_vertices():
    # zero mobility rows: phi follows (a) alone and (b) becomes an equality
    m = small_mesh(0.2)
    n = m.n_vertices
    phi_old = np.where(np.arange(n) < n // 2, -0.5, 0.5)
    prob = CHStepProblem(m.lumped, sp.csr_matrix((n, n)), 0.005 * fem.assemble_stiffness(m),
                         phi_old, 0.1, np.zeros(n), f=0.1 * m.lumped)
    res = solve_ch_step_vi(prob)
    assert np.allclose(res.phi, phi_old + 0.01, atol=1e-14)
    assert np.allclose(res.mu, (prob.L @ res.phi) / m.lumped, atol=1e-12)


def test_infeasible_step_is_reported():
    # every vertex wants phi = 3 and the component cannot hold it
    m = small_mesh(0.2)
    n = m.n_vertices
    prob = CHStepProblem(m.lumped, fem.assemble_stiffness(m), 0.01 * fem.assemble_stiffness(m),
                         np.zeros(n), 0.1, np.zeros(n), f=30.0 * m.lumped)
    with pytest.raises(ConvergenceError, match="infeasible"):
        solve_ch_step_vi(prob)


def test_ill_posed_source_is_reported():
    m = small_mesh(0.3)
    n = m.n_vertices
    prob = CHStepProblem(m.lumped, fem.assemble_stiffness(m), fem.assemble_stiffness(m),
                         np.zeros(n), 1.0, np.zeros(n), s=2.0)
    with pytest.raises(ConvergenceError, match="well posed"):
        solve_ch_step_vi(prob)
