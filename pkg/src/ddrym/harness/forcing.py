"""Discrete sources for the manufactured-solution runs.

E rows:       v -> int <f(t^{n+1}), P_curl v> - sum_{F on boundary} int_F <gamma_t v, B x n_out>
lambda rows:  q -> int g P_grad q + sum_{F on boundary} int_F (D . n_out) gamma_F q

with D the exact time difference of E over the step and g = -div D + Z (see
:meth:`ManufacturedSolution.constraint_source`).  Test functions are
tabulated once at all quadrature points, so every step only evaluates the
closed forms and applies a few sparse matrices.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .manufactured import ManufacturedSolution


def _outward_normals(mesh) -> tuple:
    faces = mesh.boundary_faces
    normals = []
    for f in faces:
        t = mesh.face_cells[f][0]
        n = mesh.face_normals[f]
        s = np.sign((mesh.face_centroids[f] - mesh.cell_centroids[t]) @ n)
        normals.append(n if s >= 0 else -n)
    return faces, np.array(normals).reshape(-1, 3)


class _Tabulation:
    """Quadrature points with a sparse matrix mapping point values to DOF moments."""

    def __init__(self, n_dofs: int, ncomp: int):
        self.n_dofs = n_dofs
        self.ncomp = ncomp
        self.pts, self.rows, self.cols, self.vals = [], [], [], []
        self.npts = 0

    def add(self, points, weights, dofs, phi):
        """phi: (nq, nb) scalar or (nq, nb, 3) vector test values."""
        nq = len(points)
        q = self.npts + np.arange(nq)
        if phi.ndim == 2:
            phi = phi[:, :, None]
        w = phi * weights[:, None, None]  # (nq, nb, c)
        cols = (q[:, None] * self.ncomp + np.arange(self.ncomp)[None, :])  # (nq, c)
        self.rows.append(np.broadcast_to(np.asarray(dofs)[None, :, None], w.shape).ravel())
        self.cols.append(np.broadcast_to(cols[:, None, :], w.shape).ravel())
        self.vals.append(w.ravel())
        self.pts.append(points)
        self.npts += nq

    def finish(self):
        self.points = np.concatenate(self.pts) if self.pts else np.zeros((0, 3))
        shape = (self.n_dofs, self.npts * self.ncomp)
        if self.rows:
            self.T = sp.coo_matrix(
                (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))), shape=shape
            ).tocsr()
        else:
            self.T = sp.csr_matrix(shape)
        del self.pts, self.rows, self.cols, self.vals
        return self

    def apply(self, values: np.ndarray, metric: np.ndarray) -> np.ndarray:
        """values (npts[, 3], d) -> algebra-valued moment vector (n_dofs * d,)."""
        d = metric.shape[0]
        m = self.T @ values.reshape(-1, d)
        return (m @ metric).ravel()


class ForcingAssembler:
    """Callable ``(t_prev, t_next) -> (E-row source, lambda-row source)`` for a scheme."""

    def __init__(self, cx, lie, solution: ManufacturedSolution, constraint_rows: bool = True, degree: int | None = None):
        self.cx = cx
        self.lie = lie
        self.solution = solution
        self.constraint_rows = constraint_rows
        self.metric = lie.metric
        mesh, k, bases = cx.mesh, cx.k, cx.bases
        deg = degree
        cd = cx.cell_data()
        self.cell_E = _Tabulation(cx.dim("curl"), 3)
        self.cell_L = _Tabulation(cx.dim("grad"), 1)
        for tcell in range(mesh.n_cells):
            eb = bases.cells[tcell]
            rule = eb.rule if deg is None else eb.rule_of(deg)
            V = eb.monomials_at(rule.points)
            phiv = (V @ eb.vector_P(k).reshape(-1, V.shape[1]).T).reshape(len(V), -1, 3)
            self.cell_E.add(rule.points, rule.weights, cd[tcell].dofs.curl, np.einsum("qax,an->qnx", phiv, cd[tcell].Pcurl))
            if constraint_rows:
                phis = V @ eb.P(k + 1).T
                self.cell_L.add(rule.points, rule.weights, cd[tcell].dofs.grad, phis @ cd[tcell].Pgrad)
        faces, normals = _outward_normals(mesh)
        self.normals = []
        self.bnd_E = _Tabulation(cx.dim("curl"), 3)
        self.bnd_L = _Tabulation(cx.dim("grad"), 1)
        for f, n in zip(faces, normals):
            ebF = bases.faces[f]
            fo = cx.face_ops[f]
            rule = ebF.rule if deg is None else ebF.rule_of(deg)
            tang = ebF.eval3(ebF.vector_P(k), rule.points)  # (nq, nv, 3)
            self.bnd_E.add(rule.points, rule.weights, fo.dofs.curl, np.einsum("qax,an->qnx", tang, fo.gamma_t))
            if constraint_rows:
                phis = ebF.eval(ebF.P(k + 1), rule.points)
                self.bnd_L.add(rule.points, rule.weights, fo.dofs.grad, phis @ fo.gamma)
            self.normals.append(np.broadcast_to(n, (len(rule.points), 3)))
        self.normals = np.concatenate(self.normals) if self.normals else np.zeros((0, 3))
        for tab in (self.cell_E, self.cell_L, self.bnd_E, self.bnd_L):
            tab.finish()

    def e_rows(self, tt: float) -> np.ndarray:
        sol = self.solution
        fv = sol.f(self.cell_E.points, tt)
        out = self.cell_E.apply(fv, self.metric)
        if self.bnd_E.npts:
            Bv = sol.B(self.bnd_E.points, tt)
            bxn = np.cross(Bv, self.normals[:, :, None], axis=1)
            out -= self.bnd_E.apply(bxn, self.metric)
        return out

    def lambda_rows(self, t_prev: float, t_next: float) -> np.ndarray:
        sol = self.solution
        _, g = sol.constraint_source(self.cell_L.points, t_prev, t_next)
        out = self.cell_L.apply(g, self.metric)
        if self.bnd_L.npts:
            D, _ = sol.constraint_source(self.bnd_L.points, t_prev, t_next)
            dn = np.einsum("nxI,nx->nI", D, self.normals)
            out += self.bnd_L.apply(dn, self.metric)
        return out

    def __call__(self, t_prev: float, t_next: float):
        lam = self.lambda_rows(t_prev, t_next) if self.constraint_rows else None
        return self.e_rows(t_next), lam


def weak_residual(cx, lie, solution: ManufacturedSolution, tt: float = 0.0, degree: int = 20, seed: int = 0) -> float:
    """Relative residual of the continuous weak E equation with polynomial test fields.

    Checks sum_T int <dE/dt - W - f, v> - int <B, curl v> + int_bdry <v, B x n> = 0
    for random Lie-valued linear fields v, using quadrature of the given degree.
    A value near machine precision validates the source, the boundary term
    and their signs.
    """
    rng = np.random.default_rng(seed)
    d = lie.dim
    M = lie.metric
    a = rng.standard_normal((3, d))
    G = rng.standard_normal((3, 3, d))  # v(x) = a + G x

    def v(p):
        return a[None] + np.einsum("xyI,ny->nxI", G, p)

    curlv = np.stack([G[2, 1] - G[1, 2], G[0, 2] - G[2, 0], G[1, 0] - G[0, 1]])  # (3, d)
    mesh = cx.mesh
    vol = surf = 0.0
    scale = 0.0
    for tcell in range(mesh.n_cells):
        rule = cx.bases.cells[tcell].rule_of(degree)
        p, w = rule.points, rule.weights
        r = solution._dtE(p, tt) - solution.W(p, tt) - solution.f(p, tt)
        Bv = solution.B(p, tt)
        ip = np.einsum("nxI,IJ,nxJ->n", r, M, v(p)) - np.einsum("nxI,IJ,xJ->n", Bv, M, curlv)
        vol += w @ ip
        scale += w @ (np.abs(np.einsum("nxI,IJ,nxJ->n", solution.f(p, tt), M, v(p))))
    faces, normals = _outward_normals(mesh)
    for f, n in zip(faces, normals):
        rule = cx.bases.faces[f].rule_of(degree)
        p, w = rule.points, rule.weights
        bxn = np.cross(solution.B(p, tt), n[None, :, None], axis=1)
        surf += w @ np.einsum("nxI,IJ,nxJ->n", v(p), M, bxn)
    return float(abs(vol + surf) / max(scale, 1e-300))
