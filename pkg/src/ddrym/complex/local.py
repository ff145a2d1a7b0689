"""Entity-local DDR operators.

Every operator is returned as a dense matrix acting on the local DOF vector
of its entity (see :func:`local_dofs`), with values expressed in the
orthonormal bases of :mod:`ddrym.polyspace`.  Vector-valued polynomials use
the ``vector_P`` ordering (basis index major, component minor) with
components along the entity axes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from ..polyspace import polynomials as pl

SINGULAR_TOL = 1e-12


class LocalSystemError(np.linalg.LinAlgError):
    """A local reconstruction system is singular."""


def positions(full: np.ndarray, sub: np.ndarray) -> np.ndarray:
    """Positions of the global indices ``sub`` inside ``full``."""
    order = np.argsort(full, kind="stable")
    p = np.searchsorted(full[order], sub)
    pos = order[np.minimum(p, len(full) - 1)]
    if not np.array_equal(full[pos], sub):
        raise KeyError("sub-entity DOFs are not contained in the entity DOFs")
    return pos


def _solve(A: np.ndarray, B: np.ndarray, what: str, diag: dict) -> np.ndarray:
    s = np.linalg.svd(A, compute_uv=False)
    smin = s[-1] / s[0] if len(s) else 1.0
    diag.setdefault(what, []).append(smin)
    if len(s) and s[-1] <= SINGULAR_TOL * s[0]:
        raise LocalSystemError(f"singular local system ({what}), relative sigma_min={smin:.3e}")
    lu = sla.lu_factor(A)
    return sla.lu_solve(lu, B)


@dataclass
class LocalDofs:
    """Global DOF indices of the local vectors of one entity."""

    grad: np.ndarray
    curl: np.ndarray = None
    div: np.ndarray = None


@dataclass
class EdgeOps:
    dofs: LocalDofs
    G: np.ndarray  # P^k(E)
    gamma: np.ndarray  # P^{k+1}(E)


@dataclass
class FaceOps:
    dofs: LocalDofs
    G: np.ndarray  # P^k(F)^2
    gamma: np.ndarray  # P^{k+1}(F)
    C: np.ndarray  # P^k(F)
    gamma_t: np.ndarray  # P^k(F)^2


@dataclass
class CellOps:
    dofs: LocalDofs
    G: np.ndarray  # P^k(T)^3
    Pgrad: np.ndarray  # P^{k+1}(T)
    C: np.ndarray  # P^k(T)^3
    Pcurl: np.ndarray  # P^k(T)^3
    D: np.ndarray  # P^k(T)
    Pdiv: np.ndarray  # P^k(T)^3
    mass: dict = field(default_factory=dict)  # space -> (consistent part, stabilization)


class LocalBuilder:
    """Computes all entity-local operators of a DDR complex of degree k."""

    def __init__(self, mesh, bases, layouts):
        self.mesh = mesh
        self.bases = bases
        self.lay = layouts
        self.k = bases.k
        self.diag: dict = {}

    # ----------------------------------------------------------- dof lists
    def edge_dofs(self, e: int) -> LocalDofs:
        g = self.lay["grad"]
        v = self.mesh.edges[e]
        return LocalDofs(
            grad=np.concatenate([g.entity_dofs("vertex", v), g.entity_dofs("edge", e)]),
            curl=self.lay["curl"].entity_dofs("edge", e),
        )

    def face_dofs(self, f: int) -> LocalDofs:
        g, c, d = self.lay["grad"], self.lay["curl"], self.lay["div"]
        m = self.mesh
        return LocalDofs(
            grad=np.concatenate(
                [
                    g.entity_dofs("vertex", m.face_loops[f]),
                    g.entity_dofs("edge", m.face_edges[f]),
                    g.entity_dofs("face", f),
                ]
            ),
            curl=np.concatenate([c.entity_dofs("edge", m.face_edges[f]), c.entity_dofs("face", f)]),
            div=d.entity_dofs("face", f),
        )

    def cell_dofs(self, t: int) -> LocalDofs:
        g, c, d = self.lay["grad"], self.lay["curl"], self.lay["div"]
        m = self.mesh
        return LocalDofs(
            grad=np.concatenate(
                [
                    g.entity_dofs("vertex", m.cell_vertices[t]),
                    g.entity_dofs("edge", m.cell_edges[t]),
                    g.entity_dofs("face", m.cell_faces[t]),
                    g.entity_dofs("cell", t),
                ]
            ),
            curl=np.concatenate(
                [
                    c.entity_dofs("edge", m.cell_edges[t]),
                    c.entity_dofs("face", m.cell_faces[t]),
                    c.entity_dofs("cell", t),
                ]
            ),
            div=np.concatenate([d.entity_dofs("face", m.cell_faces[t]), d.entity_dofs("cell", t)]),
        )

    # ---------------------------------------------------------------- edges
    def edge_ops(self, e: int) -> EdgeOps:
        k = self.k
        eb = self.bases.edges[e]
        dofs = self.edge_dofs(e)
        x = self.mesh.vertices[self.mesh.edges[e]]
        phi_v = eb.monomials_at(x) @ eb.P(k + 1).T  # (2, k+2)
        A = np.zeros((k + 2, k + 2))
        A[:k, :k] = np.eye(k)
        A[k:] = phi_v
        B = np.zeros((k + 2, k + 2))
        B[:k, 2:] = np.eye(k)
        B[k, 0] = 1.0
        B[k + 1, 1] = 1.0
        gamma = _solve(A, B, "edge_trace", self.diag)
        r = eb.P(k)
        dr = (r @ eb.ms.deriv[0].T) / eb.h
        G = np.zeros((k + 1, k + 2))
        G[:, 2:] = -eb.gram(dr, eb.P(k - 1))
        G[:, 0] = -phi_v[0, : k + 1]
        G[:, 1] = phi_v[1, : k + 1]
        return EdgeOps(dofs, G, gamma)

    # ---------------------------------------------------------------- faces
    def _face_edge_term(self, f, W, edge_ops, dofs_grad):
        """sum_E w_FE int_E gamma_E (w . n_FE), as a matrix on face-local grad DOFs."""
        m = self.mesh
        ebF = self.bases.faces[f]
        out = np.zeros((W.shape[0], len(dofs_grad)))
        nF = m.face_normals[f]
        for e, om in zip(m.face_edges[f], m.orientations.face_edge[f]):
            ebE = self.bases.edges[e]
            phiE = ebE.V @ ebE.P(self.k + 1).T
            wn = ebF.eval3(W, ebE.rule.points) @ np.cross(nF, m.edge_tangents[e])
            M = (wn * ebE.rule.weights[:, None]).T @ phiE
            eo = edge_ops[e]
            out[:, positions(dofs_grad, eo.dofs.grad)] += om * (M @ eo.gamma)
        return out

    def _face_edge_curl_term(self, f, R, dofs_curl):
        """sum_E w_FE int_E v_E r for scalar coefficient rows R, on face-local curl DOFs."""
        m = self.mesh
        ebF = self.bases.faces[f]
        out = np.zeros((R.shape[0], len(dofs_curl)))
        c = self.lay["curl"]
        for e, om in zip(m.face_edges[f], m.orientations.face_edge[f]):
            ebE = self.bases.edges[e]
            vE = ebE.V @ ebE.P(self.k).T
            r = ebF.eval(R, ebE.rule.points)
            M = (r * ebE.rule.weights[:, None]).T @ vE
            out[:, positions(dofs_curl, c.entity_dofs("edge", e))] += om * M
        return out

    def face_ops(self, f: int, edge_ops) -> FaceOps:
        k = self.k
        eb = self.bases.faces[f]
        ms, h = eb.ms, eb.h
        dofs = self.face_dofs(f)
        g, c = self.lay["grad"], self.lay["curl"]
        fg = positions(dofs.grad, g.entity_dofs("face", f))
        Wv = eb.vector_P(k)
        # gradient
        G = self._face_edge_term(f, Wv, edge_ops, dofs.grad)
        G[:, fg] -= eb.gram(pl.div(ms, Wv, h), eb.P(k - 1))
        # scalar trace
        Wc = eb.sub["Rc+2"]
        A = eb.gram(pl.div(ms, Wc, h), eb.P(k + 1))
        rhs = -eb.gram(Wc, Wv) @ G + self._face_edge_term(f, Wc, edge_ops, dofs.grad)
        gamma = _solve(A, rhs, "face_trace", self.diag)
        # curl
        fR = positions(dofs.curl, c.comp_dofs("face", f, "R"))
        fRc = positions(dofs.curl, c.comp_dofs("face", f, "Rc"))
        Pk = eb.P(k)
        C = -self._face_edge_curl_term(f, Pk, dofs.curl)
        if len(fR):
            C[:, fR] += eb.gram(pl.vrot(ms, Pk, h), eb.sub["R"])
        # tangential trace
        P0 = eb.P0(k + 1)
        Rc = eb.sub["Rc"]
        A = np.concatenate([eb.gram(pl.vrot(ms, P0, h), Wv), eb.gram(Rc, Wv)])
        rhs1 = eb.gram(P0, Pk) @ C + self._face_edge_curl_term(f, P0, dofs.curl)
        rhs2 = np.zeros((len(Rc), len(dofs.curl)))
        rhs2[np.arange(len(Rc)), fRc] = 1.0
        gamma_t = _solve(A, np.concatenate([rhs1, rhs2]), "face_tangent_trace", self.diag)
        return FaceOps(dofs, G, gamma, C, gamma_t)

    # ---------------------------------------------------------------- cells
    def _cell_face_grad_term(self, t, W, face_ops, dofs_grad):
        """sum_F w_TF int_F gamma_F (w . n_F) on cell-local grad DOFs."""
        m = self.mesh
        ebT = self.bases.cells[t]
        out = np.zeros((W.shape[0], len(dofs_grad)))
        for f, om in zip(m.cell_faces[t], m.orientations.cell_face[t]):
            ebF = self.bases.faces[f]
            phiF = ebF.V @ ebF.P(self.k + 1).T
            wn = ebT.eval(W, ebF.rule.points) @ m.face_normals[f]
            M = (wn * ebF.rule.weights[:, None]).T @ phiF
            fo = face_ops[f]
            out[:, positions(dofs_grad, fo.dofs.grad)] += om * (M @ fo.gamma)
        return out

    def _cell_face_curl_term(self, t, W, face_ops, dofs_curl):
        """sum_F w_TF int_F gamma_t,F . (w x n_F) on cell-local curl DOFs."""
        m = self.mesh
        ebT = self.bases.cells[t]
        out = np.zeros((W.shape[0], len(dofs_curl)))
        for f, om in zip(m.cell_faces[t], m.orientations.cell_face[t]):
            ebF = self.bases.faces[f]
            gam = ebF.eval3(ebF.vector_P(self.k))  # (nq, ng, 3)
            wx = np.cross(ebT.eval(W, ebF.rule.points), m.face_normals[f])
            M = np.einsum("q,qwx,qgx->wg", ebF.rule.weights, wx, gam)
            fo = face_ops[f]
            out[:, positions(dofs_curl, fo.dofs.curl)] += om * (M @ fo.gamma_t)
        return out

    def _cell_face_div_term(self, t, R, dofs_div):
        """sum_F w_TF int_F w_F r on cell-local div DOFs."""
        m = self.mesh
        ebT = self.bases.cells[t]
        d = self.lay["div"]
        out = np.zeros((R.shape[0], len(dofs_div)))
        for f, om in zip(m.cell_faces[t], m.orientations.cell_face[t]):
            ebF = self.bases.faces[f]
            wF = ebF.V @ ebF.P(self.k).T
            r = ebT.eval(R, ebF.rule.points)
            M = (r * ebF.rule.weights[:, None]).T @ wF
            out[:, positions(dofs_div, d.entity_dofs("face", f))] += om * M
        return out

    def cell_ops(self, t: int, edge_ops, face_ops) -> CellOps:
        k = self.k
        eb = self.bases.cells[t]
        ms, h = eb.ms, eb.h
        dofs = self.cell_dofs(t)
        g, c, d = self.lay["grad"], self.lay["curl"], self.lay["div"]
        Wv = eb.vector_P(k)
        # gradient and scalar potential
        tg = positions(dofs.grad, g.entity_dofs("cell", t))
        G = self._cell_face_grad_term(t, Wv, face_ops, dofs.grad)
        G[:, tg] -= eb.gram(pl.div(ms, Wv, h), eb.P(k - 1))
        Wc = eb.sub["Rc+2"]
        A = eb.gram(pl.div(ms, Wc, h), eb.P(k + 1))
        rhs = -eb.gram(Wc, Wv) @ G + self._cell_face_grad_term(t, Wc, face_ops, dofs.grad)
        Pgrad = _solve(A, rhs, "cell_grad_potential", self.diag)
        # curl and vector potential
        tR = positions(dofs.curl, c.comp_dofs("cell", t, "R"))
        tRc = positions(dofs.curl, c.comp_dofs("cell", t, "Rc"))
        C = self._cell_face_curl_term(t, Wv, face_ops, dofs.curl)
        if len(tR):
            C[:, tR] += eb.gram(pl.curl(ms, Wv, h), eb.sub["R"])
        Gc1 = eb.sub["Gc+1"]
        Rc = eb.sub["Rc"]
        A = np.concatenate([eb.gram(pl.curl(ms, Gc1, h), Wv), eb.gram(Rc, Wv)])
        rhs1 = eb.gram(Gc1, Wv) @ C - self._cell_face_curl_term(t, Gc1, face_ops, dofs.curl)
        rhs2 = np.zeros((len(Rc), len(dofs.curl)))
        rhs2[np.arange(len(Rc)), tRc] = 1.0
        Pcurl = _solve(A, np.concatenate([rhs1, rhs2]), "cell_curl_potential", self.diag)
        # divergence and potential
        tG = positions(dofs.div, d.comp_dofs("cell", t, "G"))
        tGc = positions(dofs.div, d.comp_dofs("cell", t, "Gc"))
        Pk = eb.P(k)
        D = self._cell_face_div_term(t, Pk, dofs.div)
        if len(tG):
            D[:, tG] -= eb.gram(pl.grad(ms, Pk, h), eb.sub["G"])
        P0 = eb.P0(k + 1)
        Gc = eb.sub["Gc"]
        A = np.concatenate([eb.gram(pl.grad(ms, P0, h), Wv), eb.gram(Gc, Wv)])
        rhs1 = -eb.gram(P0, Pk) @ D + self._cell_face_div_term(t, P0, dofs.div)
        rhs2 = np.zeros((len(Gc), len(dofs.div)))
        rhs2[np.arange(len(Gc)), tGc] = 1.0
        Pdiv = _solve(A, np.concatenate([rhs1, rhs2]), "cell_div_potential", self.diag)
        ops = CellOps(dofs, G, Pgrad, C, Pcurl, D, Pdiv)
        ops.mass = self._cell_products(t, ops, edge_ops, face_ops)
        return ops

    # --------------------------------------------------- local L2 products
    def _cell_products(self, t, ops: CellOps, edge_ops, face_ops) -> dict:
        k = self.k
        m = self.mesh
        eb = self.bases.cells[t]
        dofs = ops.dofs
        c = self.lay["curl"]
        out = {}
        # grad
        S = np.zeros((len(dofs.grad), len(dofs.grad)))
        Pk1 = eb.P(k + 1)
        for f in m.cell_faces[t]:
            ebF = self.bases.faces[f]
            fo = face_ops[f]
            dif = eb.eval(Pk1, ebF.rule.points) @ ops.Pgrad
            dif[:, positions(dofs.grad, fo.dofs.grad)] -= (ebF.V @ ebF.P(k + 1).T) @ fo.gamma
            S += m.face_diameters[f] * (dif * ebF.rule.weights[:, None]).T @ dif
        for e in m.cell_edges[t]:
            ebE = self.bases.edges[e]
            eo = edge_ops[e]
            dif = eb.eval(Pk1, ebE.rule.points) @ ops.Pgrad
            dif[:, positions(dofs.grad, eo.dofs.grad)] -= (ebE.V @ ebE.P(k + 1).T) @ eo.gamma
            S += m.edge_lengths[e] ** 2 * (dif * ebE.rule.weights[:, None]).T @ dif
        out["grad"] = (ops.Pgrad.T @ ops.Pgrad, S)
        # curl
        Wv = eb.vector_P(k)
        S = np.zeros((len(dofs.curl), len(dofs.curl)))
        for f in m.cell_faces[t]:
            ebF = self.bases.faces[f]
            fo = face_ops[f]
            tan = eb.eval(Wv, ebF.rule.points) @ ebF.frame.axes.T  # (nq, nv, 2)
            dif = np.einsum("qaj,an->qnj", tan, ops.Pcurl)
            gam = np.einsum("qaj,an->qnj", ebF.eval(ebF.vector_P(k)), fo.gamma_t)
            dif[:, positions(dofs.curl, fo.dofs.curl), :] -= gam
            S += m.face_diameters[f] * np.einsum("q,qaj,qbj->ab", ebF.rule.weights, dif, dif)
        for e in m.cell_edges[t]:
            ebE = self.bases.edges[e]
            dif = (eb.eval(Wv, ebE.rule.points) @ m.edge_tangents[e]) @ ops.Pcurl
            dif[:, positions(dofs.curl, c.entity_dofs("edge", e))] -= ebE.V @ ebE.P(k).T
            S += m.edge_lengths[e] ** 2 * (dif * ebE.rule.weights[:, None]).T @ dif
        out["curl"] = (ops.Pcurl.T @ ops.Pcurl, S)
        # div
        d = self.lay["div"]
        S = np.zeros((len(dofs.div), len(dofs.div)))
        for f in m.cell_faces[t]:
            ebF = self.bases.faces[f]
            dif = (eb.eval(Wv, ebF.rule.points) @ m.face_normals[f]) @ ops.Pdiv
            dif[:, positions(dofs.div, d.entity_dofs("face", f))] -= ebF.V @ ebF.P(k).T
            S += m.face_diameters[f] * (dif * ebF.rule.weights[:, None]).T @ dif
        out["div"] = (ops.Pdiv.T @ ops.Pdiv, S)
        return out
