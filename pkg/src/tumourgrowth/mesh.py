"""P1 triangle meshes, newest-vertex bisection and lumped finite element assembly.

Element convention: a triangle (v0, v1, v2) is stored counter-clockwise and
its refinement edge is v1-v2, the edge opposite v0.  Local edge j is the
edge opposite local vertex j.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.spatial import Delaunay, cKDTree

BOUNDARY_TOL = 1e-12


class MeshError(ValueError):
    pass


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise MeshError("degenerate rectangle")

    @property
    def diameter(self) -> float:
        return math.hypot(self.x1 - self.x0, self.y1 - self.y0)

    @property
    def centroid(self) -> np.ndarray:
        return np.array([0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1)])

    def on_boundary(self, pts: np.ndarray) -> np.ndarray:
        tol = BOUNDARY_TOL * max(1.0, self.diameter)
        x, y = pts[:, 0], pts[:, 1]
        return ((np.abs(x - self.x0) <= tol) | (np.abs(x - self.x1) <= tol)
                | (np.abs(y - self.y0) <= tol) | (np.abs(y - self.y1) <= tol))

    def snap(self, pts: np.ndarray) -> np.ndarray:
        return pts


@dataclass(frozen=True)
class Disk:
    radius: float
    cx: float = 0.0
    cy: float = 0.0

    def __post_init__(self):
        if not self.radius > 0:
            raise MeshError("degenerate disk")

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def centroid(self) -> np.ndarray:
        return np.array([self.cx, self.cy])

    def on_boundary(self, pts: np.ndarray) -> np.ndarray:
        r = np.hypot(pts[:, 0] - self.cx, pts[:, 1] - self.cy)
        return np.abs(r - self.radius) <= BOUNDARY_TOL * max(1.0, self.radius)

    def snap(self, pts: np.ndarray) -> np.ndarray:
        c = self.centroid
        d = pts - c
        r = np.hypot(d[:, 0], d[:, 1])
        return c + d * (self.radius / r)[:, None]


Domain = Rect | Disk


@dataclass
class Mesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    level: np.ndarray
    domain: Domain = field(repr=False)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        e1 = p[:, 1] - p[:, 0]
        e2 = p[:, 2] - p[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def areas(self) -> np.ndarray:
        return self.signed_areas

    @cached_property
    def grads(self) -> np.ndarray:
        """(M, 3, 2) gradients of the barycentric coordinates."""
        p = self.vertices[self.triangles]
        g = np.empty_like(p)
        two_a = 2.0 * self.signed_areas
        for i in range(3):
            a, b = p[:, (i + 1) % 3], p[:, (i + 2) % 3]
            g[:, i, 0] = (a[:, 1] - b[:, 1]) / two_a
            g[:, i, 1] = (b[:, 0] - a[:, 0]) / two_a
        return g

    @cached_property
    def diameters(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        lens = [np.hypot(*(p[:, (i + 1) % 3] - p[:, (i + 2) % 3]).T) for i in range(3)]
        return np.max(lens, axis=0)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def lumped(self) -> np.ndarray:
        """Diagonal of the lumped mass matrix (|T|/3 per vertex)."""
        return np.bincount(self.triangles.ravel(), np.repeat(self.areas / 3.0, 3),
                           minlength=self.n_vertices)

    @cached_property
    def _local_stiffness(self) -> np.ndarray:
        g = self.grads
        return self.areas[:, None, None] * np.einsum("mik,mjk->mij", g, g)

    @cached_property
    def _pattern(self):
        t = self.triangles
        rows = np.repeat(t, 3, axis=1).ravel()
        cols = np.tile(t, (1, 3)).ravel()
        n = self.n_vertices
        key = rows.astype(np.int64) * n + cols
        uniq, inv = np.unique(key, return_inverse=True)
        r, c = np.divmod(uniq, n)
        indptr = np.zeros(n + 1, dtype=np.int64)
        np.add.at(indptr, r + 1, 1)
        return np.cumsum(indptr), c.astype(np.int32), inv, len(uniq)

    def csr(self, data: np.ndarray) -> sp.csr_matrix:
        """CSR matrix on the vertex-vertex pattern from per-element 3x3 blocks."""
        indptr, indices, inv, nnz = self._pattern
        vals = np.bincount(inv, data.ravel(), minlength=nnz)
        n = self.n_vertices
        return sp.csr_matrix((vals, indices, indptr), shape=(n, n))

    def element_average(self, nodal) -> np.ndarray:
        if np.isscalar(nodal):
            return np.full(self.n_triangles, float(nodal))
        nodal = np.asarray(nodal, dtype=float)
        if nodal.shape != (self.n_vertices,):
            raise MeshError("nodal field has wrong length")
        return nodal[self.triangles].mean(axis=1)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        """(M, 2) elementwise-constant gradient of the P1 function u.

        Written with differences to vertex 0 so constants give exactly zero.
        """
        v = u[self.triangles]
        d = v[:, 1:] - v[:, :1]
        return np.einsum("mik,mi->mk", self.grads[:, 1:], d)

    @cached_property
    def edges(self):
        """Unique edges (E, 2) and element-to-edge map (M, 3), edge j opposite vertex j."""
        t = self.triangles
        loc = np.stack([t[:, [1, 2]], t[:, [2, 0]], t[:, [0, 1]]], axis=1).reshape(-1, 2)
        loc = np.sort(loc, axis=1)
        key = loc[:, 0].astype(np.int64) * self.n_vertices + loc[:, 1]
        uniq, inv = np.unique(key, return_inverse=True)
        e = np.stack(np.divmod(uniq, self.n_vertices), axis=1)
        return e, inv.reshape(-1, 3)

    @cached_property
    def boundary_edges(self) -> np.ndarray:
        e, t2e = self.edges
        counts = np.bincount(t2e.ravel(), minlength=len(e))
        return counts == 1

    @cached_property
    def _locator(self):
        return cKDTree(self.centroids)

    def locate(self, pts, tol: float = 1e-10):
        """Containing triangle and barycentric coordinates for each point.

        Returns (tri, bary) with tri = -1 for points outside the mesh.
        """
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        n = len(pts)
        tri = np.full(n, -1, dtype=np.int64)
        bary = np.zeros((n, 3))
        todo = np.arange(n)
        for k in (8, 32, 128):
            if todo.size == 0:
                break
            k = min(k, self.n_triangles)
            _, cand = self._locator.query(pts[todo], k=k)
            cand = cand.reshape(len(todo), k)
            found = np.zeros(len(todo), dtype=bool)
            for j in range(k):
                c = cand[:, j]
                b = self._bary(c, pts[todo])
                ok = (~found) & (b.min(axis=1) >= -tol)
                tri[todo[ok]] = c[ok]
                bary[todo[ok]] = b[ok]
                found |= ok
            todo = todo[~found]
        if todo.size:
            # brute force for the stragglers
            for i in todo:
                b = self._bary(np.arange(self.n_triangles), np.repeat(pts[i:i + 1], self.n_triangles, 0))
                j = int(np.argmax(b.min(axis=1)))
                if b[j].min() >= -tol:
                    tri[i] = j
                    bary[i] = b[j]
        return tri, bary

    def _bary(self, tris, pts):
        g = self.grads[tris]
        x0 = self.vertices[self.triangles[tris, 0]]
        d = pts - x0
        b1 = np.einsum("mk,mk->m", g[:, 1], d)
        b2 = np.einsum("mk,mk->m", g[:, 2], d)
        return np.stack([1.0 - b1 - b2, b1, b2], axis=1)

    def interpolation_matrix(self, pts) -> sp.csr_matrix:
        """Sparse (len(pts), N) matrix evaluating P1 functions at the points."""
        tri, bary = self.locate(pts)
        if np.any(tri < 0):
            raise MeshError("point outside mesh")
        rows = np.repeat(np.arange(len(tri)), 3)
        cols = self.triangles[tri].ravel()
        return sp.csr_matrix((bary.ravel(), (rows, cols)), shape=(len(tri), self.n_vertices))

    def evaluate(self, u: np.ndarray, pts) -> np.ndarray:
        return self.interpolation_matrix(pts) @ u

    def check(self) -> None:
        if np.any(self.signed_areas <= 0):
            raise MeshError("non-positive triangle area")


# --- construction -------------------------------------------------------------

def _orient_longest_first(pts: np.ndarray, tris: np.ndarray) -> np.ndarray:
    """Reorder each triangle CCW with v0 opposite its longest edge."""
    p = pts[tris]
    e1 = p[:, 1] - p[:, 0]
    e2 = p[:, 2] - p[:, 0]
    cw = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] < 0
    tris = tris.copy()
    tris[cw] = tris[cw][:, [0, 2, 1]]
    p = pts[tris]
    lens = np.stack([np.hypot(*(p[:, (i + 1) % 3] - p[:, (i + 2) % 3]).T) for i in range(3)], axis=1)
    j = np.argmax(lens, axis=1)
    idx = (j[:, None] + np.arange(3)[None, :]) % 3
    return np.take_along_axis(tris, idx, axis=1)


def _rect_mesh(dom: Rect, base_h: float) -> tuple[np.ndarray, np.ndarray]:
    lx, ly = dom.x1 - dom.x0, dom.y1 - dom.y0
    s = base_h / math.sqrt(2.0)
    nx, ny = max(1, math.ceil(lx / s - 1e-12)), max(1, math.ceil(ly / s - 1e-12))
    while math.hypot(lx / nx, ly / ny) > base_h:
        if lx / nx >= ly / ny:
            nx += 1
        else:
            ny += 1
    xs = np.linspace(dom.x0, dom.x1, nx + 1)
    ys = np.linspace(dom.y0, dom.y1, ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    pts = np.column_stack([X.ravel(), Y.ravel()])
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    a = (j * (nx + 1) + i).ravel()
    b, c, d = a + 1, a + nx + 2, a + nx + 1
    # right angle first so the refinement edge is the shared diagonal
    tris = np.concatenate([np.column_stack([b, c, a]), np.column_stack([d, a, c])])
    return pts, tris


def _disk_mesh(dom: Disk, base_h: float) -> tuple[np.ndarray, np.ndarray]:
    h0 = base_h / 1.25
    while True:
        n = max(2, math.ceil(dom.radius / h0))
        pts = [np.zeros((1, 2))]
        for k in range(1, n + 1):
            r = dom.radius * k / n
            m = max(6, math.ceil(2.0 * math.pi * r / h0))
            th = 2.0 * math.pi * (np.arange(m) + 0.5 * (k % 2)) / m
            pts.append(np.column_stack([r * np.cos(th), r * np.sin(th)]))
        pts = np.concatenate(pts) + dom.centroid
        tris = Delaunay(pts).simplices
        p = pts[tris]
        lens = np.stack([np.hypot(*(p[:, (i + 1) % 3] - p[:, (i + 2) % 3]).T) for i in range(3)])
        if lens.max() <= base_h:
            return pts, tris
        h0 *= 0.9


def build_mesh(domain: Domain, base_h: float) -> Mesh:
    if not base_h > 0:
        raise MeshError("base_h must be positive")
    if base_h >= 2.0 * domain.diameter:
        raise MeshError("base_h must be below the domain diameter scale")
    if isinstance(domain, Rect):
        pts, tris = _rect_mesh(domain, base_h)
    elif isinstance(domain, Disk):
        pts, tris = _disk_mesh(domain, base_h)
    else:
        raise MeshError(f"unknown domain {domain!r}")
    tris = _orient_longest_first(pts, tris)
    mesh = Mesh(pts, tris.astype(np.int64), domain.on_boundary(pts),
                np.zeros(len(tris), dtype=np.int64), domain)
    mesh.check()
    return mesh


# --- newest-vertex bisection ------------------------------------------------------

def bisect(mesh: Mesh, marked: np.ndarray) -> tuple[Mesh, sp.csr_matrix]:
    """Refine the marked triangles by newest-vertex bisection with closure.

    Returns the conforming refined mesh and the prolongation matrix that maps
    P1 nodal values on the old mesh to the new one.
    """
    marked = np.asarray(marked)
    if marked.dtype == bool:
        marked = np.flatnonzero(marked)
    n_old = mesh.n_vertices
    if marked.size == 0:
        return mesh, sp.identity(n_old, format="csr")
    edges, t2e = mesh.edges
    t = mesh.triangles
    emark = np.zeros(len(edges), dtype=bool)
    emark[t2e[marked, 0]] = True
    while True:
        need = emark[t2e].any(axis=1) & ~emark[t2e[:, 0]]
        if not need.any():
            break
        emark[t2e[need, 0]] = True
    new_e = np.flatnonzero(emark)
    mids = 0.5 * (mesh.vertices[edges[new_e, 0]] + mesh.vertices[edges[new_e, 1]])
    bnd = mesh.boundary_edges[new_e]
    if bnd.any():
        mids[bnd] = mesh.domain.snap(mids[bnd])
    e2n = np.full(len(edges), -1, dtype=np.int64)
    e2n[new_e] = n_old + np.arange(len(new_e))
    verts = np.concatenate([mesh.vertices, mids])
    on_b = np.concatenate([mesh.boundary, bnd])

    lev = mesh.level
    split = emark[t2e[:, 0]]
    keep_t, keep_l = [t[~split]], [lev[~split]]
    ts, ls, es = t[split], lev[split] + 1, t2e[split]
    v0, v1, v2 = ts[:, 0], ts[:, 1], ts[:, 2]
    p4 = e2n[es[:, 0]]
    # child A = (p4, v0, v1) refines along parent edge 2; child B = (p4, v2, v0) along edge 1
    for (a, b, c), eidx in (((p4, v0, v1), 2), ((p4, v2, v0), 1)):
        sub = emark[es[:, eidx]]
        keep_t.append(np.column_stack([a, b, c])[~sub])
        keep_l.append(ls[~sub])
        n2 = e2n[es[sub, eidx]]
        a2, b2, c2 = a[sub], b[sub], c[sub]
        keep_t.append(np.column_stack([n2, a2, b2]))
        keep_t.append(np.column_stack([n2, c2, a2]))
        keep_l.append(ls[sub] + 1)
        keep_l.append(ls[sub] + 1)
    new = Mesh(verts, np.concatenate(keep_t), on_b, np.concatenate(keep_l), mesh.domain)
    inner = ~bnd
    new_ids = n_old + np.arange(len(new_e))
    rows = [np.arange(n_old), np.repeat(new_ids[inner], 2)]
    cols = [np.arange(n_old), edges[new_e[inner]].ravel()]
    vals = [np.ones(n_old), np.full(2 * inner.sum(), 0.5)]
    if bnd.any():
        # snapped midpoints: affine extension of the owning triangle keeps linears exact
        owner = np.zeros(len(edges), dtype=np.int64)
        owner[t2e.ravel()] = np.repeat(np.arange(mesh.n_triangles), 3)
        own = owner[new_e[bnd]]
        rows.append(np.repeat(new_ids[bnd], 3))
        cols.append(t[own].ravel())
        vals.append(mesh._bary(own, mids[bnd]).ravel())
    rows, cols, vals = np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)
    P = sp.csr_matrix((vals, (rows, cols)), shape=(len(verts), n_old))
    return new, P


def refine_band(mesh: Mesh, phi: np.ndarray, h_min: float, h_max: float,
                buffer: float = 0.0, max_rounds: int = 60) -> tuple[Mesh, sp.csr_matrix]:
    """Refine to diameter <= h_min near the diffuse band and <= h_max elsewhere.

    A triangle is in the band if it touches a vertex with |phi| < 1 - 1e-8,
    or (buffer > 0) its centroid is within buffer of such a vertex.  phi is
    carried along by linear interpolation as the mesh is refined.
    """
    if not (0 < h_min < h_max):
        raise MeshError("need 0 < h_min < h_max")
    P = sp.identity(mesh.n_vertices, format="csr")
    phi = np.asarray(phi, dtype=float)
    for _ in range(max_rounds):
        band = _band_triangles(mesh, phi, buffer)
        marked = (band & (mesh.diameters > h_min * (1 + 1e-12))) | (mesh.diameters > h_max * (1 + 1e-12))
        if not marked.any():
            break
        mesh, Pk = bisect(mesh, marked)
        phi = Pk @ phi
        P = Pk @ P
    return mesh, P.tocsr()


def band_seeds(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    """Points marking the diffuse band: vertices with |phi| < 1 and centroids of sign-changing triangles."""
    inband = np.abs(phi) < 1.0 - 1e-8
    vals = phi[mesh.triangles]
    cross = (vals.max(axis=1) > 0) & (vals.min(axis=1) < 0)
    return np.concatenate([mesh.vertices[inband], mesh.centroids[cross]])


def _near(mesh: Mesh, seeds: np.ndarray, buffer: float) -> np.ndarray:
    if len(seeds) == 0:
        return np.zeros(mesh.n_triangles, dtype=bool)
    tree = cKDTree(seeds)
    reach = buffer + 0.5 * mesh.diameters
    dist, _ = tree.query(mesh.centroids, distance_upper_bound=float(reach.max()) * (1 + 1e-9))
    return dist <= reach


def _band_triangles(mesh: Mesh, phi: np.ndarray, buffer: float) -> np.ndarray:
    inband = np.abs(phi) < 1.0 - 1e-8
    vals = phi[mesh.triangles]
    tri_band = inband[mesh.triangles].any(axis=1)
    tri_band |= (vals.max(axis=1) > 0) & (vals.min(axis=1) < 0)
    if buffer > 0:
        tri_band |= _near(mesh, band_seeds(mesh, phi), buffer)
    return tri_band


def refine_to_function(base: Mesh, phi_fn, h_min: float, h_max: float, buffer: float = 0.0,
                       max_rounds: int = 60) -> Mesh:
    """Band refinement where phi is re-evaluated from phi_fn(vertices) after every round."""
    if not (0 < h_min < h_max):
        raise MeshError("need 0 < h_min < h_max")
    mesh = base
    for _ in range(max_rounds):
        phi = phi_fn(mesh.vertices)
        band = _band_triangles(mesh, phi, buffer)
        marked = (band & (mesh.diameters > h_min * (1 + 1e-12))) | (mesh.diameters > h_max * (1 + 1e-12))
        if not marked.any():
            break
        mesh, _ = bisect(mesh, marked)
    return mesh


def needs_adapt(mesh: Mesh, phi: np.ndarray, h_min: float, margin: float) -> bool:
    """True if the band (dilated by margin) reaches a triangle coarser than h_min."""
    coarse = mesh.diameters > h_min * (1 + 1e-12)
    if not coarse.any():
        return False
    return bool((_band_triangles(mesh, phi, margin) & coarse).any())


def adapt_from_base(base: Mesh, old: Mesh, phi_old: np.ndarray, h_min: float, h_max: float,
                    buffer: float, max_rounds: int = 60) -> Mesh:
    """Rebuild a band-refined mesh from the base mesh around the band of phi_old on old.

    This both refines and coarsens: regions the band has left fall back to
    the base resolution (capped at h_max).
    """
    seeds = band_seeds(old, phi_old)
    mesh = base
    for _ in range(max_rounds):
        marked = mesh.diameters > h_max * (1 + 1e-12)
        marked |= _near(mesh, seeds, buffer) & (mesh.diameters > h_min * (1 + 1e-12))
        if not marked.any():
            break
        mesh, _ = bisect(mesh, marked)
    return mesh


def transfer(old: Mesh, new: Mesh, fields: dict) -> dict:
    """P1 interpolation of nodal fields from old to new (exact at shared vertices)."""
    tree = cKDTree(old.vertices)
    d, idx = tree.query(new.vertices)
    tol = 1e-12 * max(1.0, old.domain.diameter)
    same = d <= tol
    out = {k: np.empty(new.n_vertices) for k in fields}
    for k, v in fields.items():
        out[k][same] = v[idx[same]]
    rest = np.flatnonzero(~same)
    if rest.size:
        tri, bary = old.locate(new.vertices[rest])
        miss = tri < 0
        if miss.any():
            # snapped boundary points can sit just outside the old polygon
            _, near = tree.query(new.vertices[rest[miss]])
            for k, v in fields.items():
                out[k][rest[miss]] = v[near]
        ok = ~miss
        for k, v in fields.items():
            out[k][rest[ok]] = np.einsum("mi,mi->m", bary[ok], v[old.triangles[tri[ok]]])
    return out


# --- assembly -------------------------------------------------------------------

def assemble_stiffness(mesh: Mesh, coeff=1.0) -> sp.csr_matrix:
    """sum_T c_T |T| grad psi_i . grad psi_j with c_T the element average of coeff."""
    c = mesh.element_average(coeff)
    if not np.all(np.isfinite(c)):
        raise MeshError("non-finite coefficient")
    return mesh.csr(c[:, None, None] * mesh._local_stiffness)


def assemble_lumped_mass(mesh: Mesh, weight=1.0) -> sp.csr_matrix:
    if np.isscalar(weight):
        d = mesh.lumped * float(weight)
    else:
        weight = np.asarray(weight, dtype=float)
        if weight.shape != (mesh.n_vertices,):
            raise MeshError("weight has wrong length")
        d = mesh.lumped * weight
    return sp.diags(d, format="csr")


# --- measurement ------------------------------------------------------------------

def line_sample(mesh: Mesh, u: np.ndarray, p0, p1, n: int) -> np.ndarray:
    """(n+1, 2) array of (s, u) at equally spaced points; s is arc length from p0."""
    if n < 1:
        raise ValueError("n must be >= 1")
    p0, p1 = np.asarray(p0, dtype=float), np.asarray(p1, dtype=float)
    w = np.linspace(0.0, 1.0, n + 1)
    pts = p0[None, :] + w[:, None] * (p1 - p0)[None, :]
    vals = mesh.evaluate(u, pts)
    return np.column_stack([w * np.linalg.norm(p1 - p0), vals])


def zero_level_points(mesh: Mesh, phi: np.ndarray) -> np.ndarray:
    e, _ = mesh.edges
    a, b = phi[e[:, 0]], phi[e[:, 1]]
    cross = (a * b < 0)
    pts = []
    if cross.any():
        s = a[cross] / (a[cross] - b[cross])
        xa, xb = mesh.vertices[e[cross, 0]], mesh.vertices[e[cross, 1]]
        pts.append(xa + s[:, None] * (xb - xa))
    zero = phi == 0.0
    if zero.any() and (phi > 0).any() and (phi < 0).any():
        pts.append(mesh.vertices[zero])
    return np.concatenate(pts) if pts else np.zeros((0, 2))


def zero_level_radius(mesh: Mesh, phi: np.ndarray, center=None) -> dict:
    """Mean/min/max distance of the phi = 0 level set from the domain centroid."""
    phi = np.asarray(phi, dtype=float)
    if not ((phi > 0).any() and (phi < 0).any()):
        raise MeshError("no interface")
    pts = zero_level_points(mesh, phi)
    c = mesh.domain.centroid if center is None else np.asarray(center, dtype=float)
    r = np.hypot(pts[:, 0] - c[0], pts[:, 1] - c[1])
    return {"mean_radius": float(r.mean()), "min": float(r.min()), "max": float(r.max())}


# --- i/o ------------------------------------------------------------------------

def write_dump(path, mesh: Mesh, fields: dict, t: float | None = None) -> None:
    """Plain-text dump: header, vertex table, triangle table, field table."""
    names = list(fields)
    with open(path, "w") as f:
        f.write("# tumourgrowth field dump\n")
        if t is not None:
            f.write(f"# t {t:.17g}\n")
        f.write(f"# vertices {mesh.n_vertices}: index x y boundary\n")
        for i, (x, y) in enumerate(mesh.vertices):
            f.write(f"{i} {x:.17g} {y:.17g} {int(mesh.boundary[i])}\n")
        f.write(f"# triangles {mesh.n_triangles}: index v0 v1 v2 level\n")
        for i, (a, b, c) in enumerate(mesh.triangles):
            f.write(f"{i} {a} {b} {c} {mesh.level[i]}\n")
        f.write(f"# fields {len(names)}: index {' '.join(names)}\n")
        cols = np.column_stack([fields[k] for k in names]) if names else np.zeros((mesh.n_vertices, 0))
        for i, row in enumerate(cols):
            f.write(str(i) + "".join(f" {v:.17g}" for v in row) + "\n")


def read_dump(path, domain: Domain) -> tuple[Mesh, dict, float | None]:
    with open(path) as f:
        lines = f.read().splitlines()
    t = None
    i = 0
    while not lines[i].startswith("# vertices"):
        if lines[i].startswith("# t "):
            t = float(lines[i].split()[2])
        i += 1
    nv = int(lines[i].split()[2].rstrip(":"))
    v = np.array([ln.split() for ln in lines[i + 1:i + 1 + nv]], dtype=float)
    i += 1 + nv
    nt = int(lines[i].split()[2].rstrip(":"))
    tr = np.array([ln.split() for ln in lines[i + 1:i + 1 + nt]], dtype=np.int64).reshape(nt, 5)
    i += 1 + nt
    names = lines[i].split(":", 1)[1].split()[1:]
    fv = np.array([ln.split() for ln in lines[i + 1:i + 1 + nv]], dtype=float).reshape(nv, -1)
    mesh = Mesh(v[:, 1:3], tr[:, 1:4], v[:, 3].astype(bool), tr[:, 4], domain)
    return mesh, {k: fv[:, j + 1] for j, k in enumerate(names)}, t


def write_csv(path, header, rows) -> None:
    """CSV with floats at 17 significant digits."""
    with open(path, "w") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(_fmt(v) for v in row) + "\n")


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)
