"""Linear solvers and the obstacle-constrained Cahn-Hilliard step.

The coupled step solved by ``solve_ch_step_vi`` is, with lumped mass M
(a vector), for every vertex i:

    (a)  M (phi - phi_old)/tau + K_mob mu = M s phi + f
    (b)  r_i := (L phi - M mu - M g)_i,   r_i = 0 if |phi_i| < 1,
         r_i <= 0 if phi_i = 1,  r_i >= 0 if phi_i = -1,

which is the nodal form of the obstacle variational inequality once the
inner product is lumped.  It is solved by a primal-dual active set
iteration (a semismooth Newton method) with a sparse direct solve per
iteration, so an accepted solution satisfies (a) and (b) to round-off.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse import csgraph


SNAP = 1e-12
# relative width of the band in which the active-set prediction keeps the
# current status; exactly degenerate multipliers otherwise flip on round-off
HYSTERESIS = 1e-12


class ConvergenceError(RuntimeError):
    def __init__(self, msg: str, residual: float = float("nan"), iterations: int = 0):
        super().__init__(f"{msg} (residual {residual:.3e} after {iterations} iterations)")
        self.residual = residual
        self.iterations = iterations


# --- conjugate gradients ------------------------------------------------------

def _project(v: np.ndarray) -> np.ndarray:
    return v - v.mean()


def cg_solve(A, b: np.ndarray, tol: float = 1e-10, max_iter: int | None = None,
             x0: np.ndarray | None = None, jacobi: bool = True,
             nullspace: bool = False, log: list | None = None,
             callback=None) -> np.ndarray:
    """Preconditioned conjugate gradients for SPD (or semi-definite) A.

    Stops when ||b - A x||_2 <= tol ||b||_2.  With ``nullspace=True`` the
    constant vector is projected out of b, the residual and the iterates so
    the returned solution has zero mean.  Residual norms are appended to
    ``log`` as (iteration, residual) pairs if given; ``callback(k, x)`` sees
    every iterate.  Reductions are plain
    numpy dot products, so results are deterministic for a fixed build.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = max(10 * n, 100)
    if nullspace:
        b = _project(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if nullspace:
        x = _project(x)
    if jacobi:
        d = A.diagonal() if sp.issparse(A) else np.diag(A)
        dinv = np.where(d > 0, 1.0 / np.where(d > 0, d, 1.0), 1.0)
    else:
        dinv = None
    bnorm = np.linalg.norm(b)
    r = b - A @ x
    if nullspace:
        r = _project(r)
    res = np.linalg.norm(r)
    if log is not None:
        log.append((0, res))
    if bnorm == 0.0:
        return np.zeros(n)
    if res <= tol * bnorm:
        return x
    z = r * dinv if jacobi else r.copy()
    if nullspace:
        z = _project(z)
    p = z.copy()
    rz = r @ z
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            raise ConvergenceError("matrix is not positive definite on the search space", res, k)
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        if nullspace:
            r = _project(r)
        res = np.linalg.norm(r)
        if log is not None:
            log.append((k, res))
        if callback is not None:
            callback(k, x)
        if res <= tol * bnorm:
            return _project(x) if nullspace else x
        z = r * dinv if jacobi else r.copy()
        if nullspace:
            z = _project(z)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise ConvergenceError("cg did not converge", res / bnorm, max_iter)


def solve_dirichlet(A, rhs: np.ndarray, fixed: np.ndarray, values, tol: float = 1e-10,
                    log: list | None = None, x0: np.ndarray | None = None) -> np.ndarray:
    """Solve A u = rhs on the free vertices with u = values on the fixed ones."""
    A = sp.csr_matrix(A)
    n = A.shape[0]
    u = np.zeros(n)
    u[fixed] = values if np.isscalar(values) else np.asarray(values)[fixed]
    free = ~fixed
    Aff = A[free][:, free]
    b = rhs[free] - A[free][:, fixed] @ u[fixed]
    u[free] = cg_solve(Aff, b, tol=tol, log=log, x0=None if x0 is None else x0[free])
    return u


def write_residual_log(path, log) -> None:
    with open(path, "w") as f:
        f.write("iter,residual\n")
        for k, r in log:
            f.write(f"{k},{r:.17g}\n")


# --- obstacle step -------------------------------------------------------------

@dataclass
class CHStepProblem:
    """Data of one lumped obstacle Cahn-Hilliard step.

    mass: lumped mass vector M; K_mob: mobility stiffness; L: interface
    stiffness already scaled (e.g. beta*eps*A); s: nodal linear source
    coefficient in (a); f: remaining right side of (a); g: right side of (b)
    in chemical-potential units; c: scaling used to compare multiplier and
    constraint violation in the active-set prediction.
    """
    mass: np.ndarray
    K_mob: sp.spmatrix
    L: sp.spmatrix
    phi_old: np.ndarray
    tau: float
    g: np.ndarray
    s: np.ndarray | float = 0.0
    f: np.ndarray | float = 0.0
    c: float = 1.0

    @property
    def n(self) -> int:
        return len(self.mass)


@dataclass
class VIResult:
    phi: np.ndarray
    mu: np.ndarray
    iterations: int
    kkt: float
    residual_a: float
    active_upper: np.ndarray = field(repr=False)
    active_lower: np.ndarray = field(repr=False)


def vi_residual(prob: CHStepProblem, phi: np.ndarray, mu: np.ndarray) -> np.ndarray:
    """Residual of (b) divided by the lumped mass (chemical-potential units)."""
    return (prob.L @ phi - prob.mass * mu - prob.mass * prob.g) / prob.mass


def residual_a(prob: CHStepProblem, phi: np.ndarray, mu: np.ndarray) -> float:
    """Max-norm of (a) divided by the lumped mass, relative to the size of its terms."""
    M = prob.mass
    s = np.broadcast_to(prob.s, M.shape)
    f = np.broadcast_to(prob.f, M.shape)
    lhs = M * (phi - prob.phi_old) / prob.tau + prob.K_mob @ mu
    rhs = M * s * phi + f
    scale = max(1.0, np.max(np.abs(M * prob.phi_old / prob.tau) / M))
    return float(np.max(np.abs(lhs - rhs) / M) / scale)


def kkt_certificate(phi: np.ndarray, r: np.ndarray, free: np.ndarray | None = None) -> float:
    """max_i max(min(1 - phi_i, r_i^-), min(1 + phi_i, r_i^+)), r^+ = max(r, 0), r^- = max(-r, 0).

    Vertices in ``free`` carry an equality (r = 0) and are measured by |r|.
    """
    rp = np.maximum(r, 0.0)
    rm = np.maximum(-r, 0.0)
    cert = np.maximum(np.minimum(1.0 - phi, rm), np.minimum(1.0 + phi, rp))
    if free is not None and free.any():
        cert = np.where(free, np.abs(r), cert)
    return float(cert.max()) if cert.size else 0.0


def solve_ch_step_vi(prob: CHStepProblem, tol: float = 1e-8, max_iter: int = 500,
                     init_upper: np.ndarray | None = None,
                     init_lower: np.ndarray | None = None) -> VIResult:
    """Primal-dual active set solve of the lumped obstacle step.

    Vertices whose row of K_mob vanishes (zero mobility around them) have
    phi fixed by (a) alone, so (b) is imposed there as an equality that
    defines mu; they never enter the active sets.  More generally (a)
    conserves phi on every connected component of the K_mob graph, so each
    component keeps at least one inactive vertex; otherwise mu would be
    undetermined up to a constant there and the mass balance unsatisfiable.
    """
    n = prob.n
    M = prob.mass
    s = np.broadcast_to(np.asarray(prob.s, dtype=float), (n,))
    f = np.broadcast_to(np.asarray(prob.f, dtype=float), (n,))
    K = sp.csr_matrix(prob.K_mob)
    L = sp.csr_matrix(prob.L)
    free = np.asarray(abs(K).sum(axis=1)).ravel() == 0.0
    comp = _mobility_components(K)
    interior = 1.0 - np.abs(prob.phi_old)

    top = sp.hstack([sp.diags(M / prob.tau - M * s), K], format="csr")
    rhs1 = M * prob.phi_old / prob.tau + f
    bot = sp.hstack([L, sp.diags(-M)], format="csr")
    rhs2 = M * prob.g
    eye_phi = sp.hstack([sp.identity(n, format="csr"), sp.csr_matrix((n, n))], format="csr")

    _check_feasible(M / prob.tau - M * s, rhs1, comp)

    up = (prob.phi_old >= 1.0) if init_upper is None else init_upper.copy()
    lo = (prob.phi_old <= -1.0) if init_lower is None else init_lower.copy()
    up &= ~free
    lo &= ~free & ~up
    _keep_one_inactive(up, lo, comp, interior)
    delta = HYSTERESIS * max(1.0, prob.c, float(np.max(np.abs(prob.g))) if n else 1.0)
    prev = None
    seen: dict = {}
    for it in range(1, max_iter + 1):
        act = up | lo
        ina = ~act
        rows2 = sp.diags(ina.astype(float)) @ bot + sp.diags(act.astype(float)) @ eye_phi
        r2 = np.where(ina, rhs2, np.where(up, 1.0, -1.0))
        Asys = sp.vstack([top, rows2], format="csc")
        x = spla.splu(Asys, permc_spec="COLAMD").solve(np.concatenate([rhs1, r2]))
        phi, mu = x[:n], x[n:]
        r = vi_residual(prob, phi, mu)
        xi = np.where(act, -r, 0.0)
        pu = xi + prob.c * (phi - 1.0)
        pl = xi + prob.c * (phi + 1.0)
        new_up = np.where(up, pu > -delta, pu > delta) & ~free
        new_lo = np.where(lo, pl < delta, pl < -delta) & ~free & ~new_up
        _keep_one_inactive(new_up, new_lo, comp, interior)
        if np.array_equal(new_up, up) and np.array_equal(new_lo, lo):
            phi = np.clip(phi, -1.0, 1.0)
            phi[up] = 1.0
            phi[lo] = -1.0
            # round-off away from a bound would seed spurious tiny mobilities next step
            phi[phi > 1.0 - SNAP] = 1.0
            phi[phi < -1.0 + SNAP] = -1.0
            r = vi_residual(prob, phi, mu)
            cert = kkt_certificate(phi, r, free)
            ra = residual_a(prob, phi, mu)
            if cert > tol or ra > tol:
                raise ConvergenceError("active set settled but KKT check failed", max(cert, ra), it)
            return VIResult(phi, mu, it, cert, ra, up, lo)
        key = (new_up.tobytes(), new_lo.tobytes())
        if prev is not None and key == prev:
            # two-cycle: freeze additions to break it
            new_up &= up
            new_lo &= lo
            key = (new_up.tobytes(), new_lo.tobytes())
        seen[key] = seen.get(key, 0) + 1
        if seen[key] > 2:
            raise ConvergenceError("active set iteration cycles",
                                   kkt_certificate(np.clip(phi, -1, 1), r, free), it)
        prev = (up.tobytes(), lo.tobytes())
        up, lo = new_up, new_lo
    raise ConvergenceError("active set iteration did not settle",
                           kkt_certificate(np.clip(phi, -1, 1), r, free), max_iter)


def _check_feasible(w: np.ndarray, rhs: np.ndarray, comp: np.ndarray) -> None:
    """Summing (a) over a component gives sum w phi = sum rhs, which needs |phi| <= 1 room."""
    if np.any(w <= 0):
        raise ConvergenceError("step is not well posed: 1/tau - s must be positive", float(-w.min()), 0)
    n_comp = comp.max() + 1
    cap = np.bincount(comp, weights=w, minlength=n_comp)
    tot = np.bincount(comp, weights=rhs, minlength=n_comp)
    excess = np.abs(tot) / cap
    if np.any(excess > 1.0 + 1e-12):
        raise ConvergenceError("step is infeasible: the mass balance forces a mean |phi| > 1 "
                               "on a mobility component (reduce tau)", float(excess.max()), 0)


def _mobility_components(K: sp.csr_matrix) -> np.ndarray:
    """Component label per vertex of the graph of non-negligible K entries."""
    K = sp.coo_matrix(K)
    d = np.abs(K.diagonal())
    keep = (K.row != K.col) & (np.abs(K.data) > 1e-14 * np.maximum(d[K.row], d[K.col]))
    n = K.shape[0]
    G = sp.csr_matrix((np.ones(keep.sum()), (K.row[keep], K.col[keep])), shape=(n, n))
    _, labels = csgraph.connected_components(G, directed=False)
    return labels


def _keep_one_inactive(up: np.ndarray, lo: np.ndarray, comp: np.ndarray, interior: np.ndarray) -> None:
    """Release, in place, the most interior vertex of every fully active component."""
    act = up | lo
    n_comp = comp.max() + 1
    size = np.bincount(comp, minlength=n_comp)
    n_act = np.bincount(comp, weights=act, minlength=n_comp)
    full = np.flatnonzero(n_act == size)
    if full.size == 0:
        return
    sel = np.isin(comp, full)
    idx = np.flatnonzero(sel)
    # per component pick the vertex with the largest interior measure
    order = np.lexsort((-interior[idx], comp[idx]))
    idx = idx[order]
    first = np.r_[True, comp[idx[1:]] != comp[idx[:-1]]]
    pick = idx[first]
    up[pick] = False
    lo[pick] = False
