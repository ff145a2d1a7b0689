"""Orthonormal polynomial bases and Koszul subspace bases on mesh entities."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import partial

import numpy as np
from scipy.linalg import solve_triangular

from . import polynomials as pl
from .polynomials import LocalFrame, MonomialSet, dim_poly, monomial_set
from .quadrature import QuadratureRule, cell_quadrature, edge_quadrature, face_quadrature

RANK_TOL = 1e-10


class BasisError(RuntimeError):
    """Rank loss while extracting a subspace basis."""


def quadrature_budget(k: int) -> int:
    return max(2 * (k + 2), 4 * k + 2)


def _coef_gram(Gm: np.ndarray, C1: np.ndarray, C2: np.ndarray) -> np.ndarray:
    """L2 Gram matrix of coefficient rows through the monomial Gram matrix ``Gm``."""
    nm = Gm.shape[0]
    nc = int(np.prod(C1.shape[1:-1], dtype=int))
    A = C1.reshape(C1.shape[0], nc, nm)
    B = C2.reshape(C2.shape[0], nc, nm)
    return sum(A[:, j] @ Gm @ B[:, j].T for j in range(A.shape[1]))


def _gram_orthonormalize(C: np.ndarray, Gm: np.ndarray, passes: int = 2) -> np.ndarray:
    """Orthonormalize coefficient rows ``C`` by repeated Gram-Cholesky."""
    for _ in range(passes):
        L = np.linalg.cholesky(_coef_gram(Gm, C, C))
        C = solve_triangular(L, C.reshape(C.shape[0], -1), lower=True).reshape(C.shape)
    return C


@dataclass
class EntityBasis:
    """Polynomial data attached to one edge, face or cell."""

    kind: str
    index: int
    frame: LocalFrame
    ms: MonomialSet
    rule: QuadratureRule
    V: np.ndarray  # monomial values at rule points (nq, nm)
    scalar: np.ndarray  # orthonormal hierarchical scalar basis (n(K), nm)
    sub: dict = field(default_factory=dict)  # name -> (nb, dim, nm) orthonormal vector bases
    rule_of: object = None  # degree -> QuadratureRule on the same entity
    Gm: np.ndarray = None  # monomial Gram matrix

    @property
    def dim(self) -> int:
        return self.ms.dim

    @property
    def h(self) -> float:
        return self.frame.h

    def n(self, degree: int) -> int:
        return dim_poly(self.dim, degree)

    def P(self, degree: int) -> np.ndarray:
        """Coefficients of the orthonormal basis of P^degree."""
        return self.scalar[: self.n(degree)]

    def P0(self, degree: int) -> np.ndarray:
        """Basis of the zero-mean subspace P^{0,degree}."""
        return self.scalar[1 : self.n(degree)]

    def vector_P(self, degree: int) -> np.ndarray:
        """Orthonormal basis of P^degree(P)^dim, ordered (a, j) -> a*dim + j."""
        S = self.P(degree)
        nb, nm = S.shape
        out = np.zeros((nb, self.dim, self.dim, nm))
        for j in range(self.dim):
            out[:, j, j, :] = S
        return out.reshape(nb * self.dim, self.dim, nm)

    def monomials_at(self, x: np.ndarray) -> np.ndarray:
        return self.ms.values(self.frame.local(x))

    def eval(self, C: np.ndarray, x: np.ndarray | None = None) -> np.ndarray:
        """Values of coefficient array C (nb, [dim,] nm) at points x (default: own rule points).

        Returns (nq, nb[, dim]); vector components are along the entity axes.
        """
        V = self.V if x is None else self.monomials_at(x)
        out = V @ C.reshape(-1, C.shape[-1]).T
        return out.reshape((V.shape[0],) + C.shape[:-1])

    def eval3(self, C: np.ndarray, x: np.ndarray | None = None) -> np.ndarray:
        """Vector values mapped to 3D Cartesian components: (nq, nb, 3)."""
        return self.eval(C, x) @ self.frame.axes

    def gram(self, C1: np.ndarray, C2: np.ndarray) -> np.ndarray:
        return _coef_gram(self.Gm, C1, C2)

    def project(self, values: np.ndarray, C: np.ndarray) -> np.ndarray:
        """L2 projection coefficients of nodal values on the own rule onto the orthonormal basis C.

        ``values`` has shape (nq,) for scalars or (nq, dim) for vectors with
        components along the entity axes.
        """
        B = self.eval(C) * self.rule.weights.reshape((-1,) + (1,) * (C.ndim - 1))
        if C.ndim == 2:
            return B.T @ values
        return np.einsum("qbj,qj->b", B, values)


def _orthonormal_subspace(eb: EntityBasis, gens: np.ndarray, expected: int, name: str) -> np.ndarray:
    dim, nm = eb.dim, eb.ms.size
    if expected == 0:
        return np.zeros((0, dim, nm))
    # singular values of the generator evaluation operator, computed through a
    # Cholesky factor of the monomial Gram matrix
    L = np.linalg.cholesky(eb.Gm)
    A = np.einsum("gjm,mn->gjn", gens, L).reshape(gens.shape[0], -1)
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    keep = s > RANK_TOL * s[0]
    if keep.sum() != expected:
        raise BasisError(
            f"{eb.kind} {eb.index}: {name} basis has rank {int(keep.sum())}, expected {expected}"
        )
    C = np.einsum("gr,gjm->rjm", U[:, keep] / s[keep], gens)
    return _gram_orthonormalize(C, eb.Gm)


def _scalar_basis(eb_kind, index, frame, ms, rule, rule_of) -> EntityBasis:
    V = ms.values(frame.local(rule.points))
    Gm = (V * rule.weights[:, None]).T @ V
    eb = EntityBasis(eb_kind, index, frame, ms, rule, V, np.eye(ms.size), rule_of=rule_of, Gm=Gm)
    # lower-triangular change of basis: the first n(l) functions span P^l
    eb.scalar = _gram_orthonormalize(np.eye(ms.size), Gm)
    return eb


def _face_subspaces(eb: EntityBasis, k: int) -> None:
    ms, h = eb.ms, eb.h
    n = eb.n

    def R(l):
        gens = pl.vrot(ms, np.eye(ms.size)[1 : n(l + 1)], h) if l >= 0 else np.zeros((0, 2, ms.size))
        return _orthonormal_subspace(eb, gens, max(n(l + 1) - 1, 0), f"R^{l}(F)")

    def Rc(l):
        gens = pl.koszul_scalar(ms, np.eye(ms.size)[: n(l - 1)])
        return _orthonormal_subspace(eb, gens, n(l - 1), f"Rc^{l}(F)")

    eb.sub["R"] = R(k - 1)
    eb.sub["Rc"] = Rc(k)
    eb.sub["Rc+2"] = Rc(k + 2)


def _cell_subspaces(eb: EntityBasis, k: int) -> None:
    ms, h = eb.ms, eb.h
    n = eb.n
    nm = ms.size
    I = np.eye(nm)

    def vec_monos(l):
        m = n(l)
        out = np.zeros((m, 3, 3, nm))
        for j in range(3):
            out[:, j, j, :] = I[:m]
        return out.reshape(3 * m, 3, nm)

    def R(l):
        gens = pl.curl(ms, vec_monos(l + 1), h) if l >= 0 else np.zeros((0, 3, nm))
        return _orthonormal_subspace(eb, gens, max(3 * n(l) - n(l - 1), 0), f"R^{l}(T)")

    def Rc(l):
        gens = pl.koszul_scalar(ms, I[: n(l - 1)])
        return _orthonormal_subspace(eb, gens, n(l - 1), f"Rc^{l}(T)")

    def G(l):
        gens = pl.grad(ms, I[1 : n(l + 1)], h) if l >= 0 else np.zeros((0, 3, nm))
        return _orthonormal_subspace(eb, gens, max(n(l + 1) - 1, 0), f"G^{l}(T)")

    def Gc(l):
        gens = pl.koszul_cross(ms, vec_monos(l - 1)) if l >= 1 else np.zeros((0, 3, nm))
        return _orthonormal_subspace(eb, gens, max(3 * n(l) - n(l + 1) + 1, 0), f"Gc^{l}(T)")

    eb.sub["R"] = R(k - 1)
    eb.sub["Rc"] = Rc(k)
    eb.sub["G"] = G(k - 1)
    eb.sub["Gc"] = Gc(k)
    eb.sub["Rc+2"] = Rc(k + 2)
    eb.sub["Gc+1"] = Gc(k + 1)


@dataclass
class EntityBases:
    """Bases of every edge, face and cell of a mesh for DDR degree ``k``."""

    k: int
    edges: list
    faces: list
    cells: list
    qdeg: int

    def condition_numbers(self) -> dict:
        """Condition numbers of the concatenated R/Rc and G/Gc cell and face bases."""
        out = {"face_R_Rc": [], "cell_R_Rc": [], "cell_G_Gc": []}
        for eb in self.faces:
            B = np.concatenate([eb.sub["R"], eb.sub["Rc"]])
            if len(B):
                out["face_R_Rc"].append(np.linalg.cond(eb.gram(B, B)))
        for eb in self.cells:
            for key, (a, b) in (("cell_R_Rc", ("R", "Rc")), ("cell_G_Gc", ("G", "Gc"))):
                B = np.concatenate([eb.sub[a], eb.sub[b]])
                if len(B):
                    out[key].append(np.linalg.cond(eb.gram(B, B)))
        return {key: (max(v) if v else 1.0) for key, v in out.items()}


def make_bases(mesh, k: int) -> EntityBases:
    """Build orthonormal bases on all entities of ``mesh`` for DDR degree ``k``."""
    if k < 0:
        raise ValueError("k must be >= 0")
    qdeg = quadrature_budget(k)
    K_edge = k + 1
    K_face = k + 2
    K_cell = max(k + 2, 2 * k)
    if 2 * K_cell > qdeg or 2 * K_face > qdeg:
        raise ValueError("quadrature budget too small for the requested degree")
    edges = []
    ms1 = monomial_set(1, K_edge)
    for e in range(mesh.n_edges):
        fr = LocalFrame(mesh.edge_midpoints[e], mesh.edge_tangents[e][None], mesh.edge_lengths[e])
        edges.append(_scalar_basis("edge", e, fr, ms1, edge_quadrature(mesh, e, qdeg), partial(edge_quadrature, mesh, e)))
    faces = []
    ms2 = monomial_set(2, K_face)
    for f in range(mesh.n_faces):
        fr = LocalFrame(mesh.face_points[f], mesh.face_frames[f], mesh.face_diameters[f])
        eb = _scalar_basis("face", f, fr, ms2, face_quadrature(mesh, f, qdeg), partial(face_quadrature, mesh, f))
        _face_subspaces(eb, k)
        faces.append(eb)
    cells = []
    ms3 = monomial_set(3, K_cell)
    for t in range(mesh.n_cells):
        fr = LocalFrame(mesh.cell_points[t], np.eye(3), mesh.cell_diameters[t])
        eb = _scalar_basis("cell", t, fr, ms3, cell_quadrature(mesh, t, qdeg), partial(cell_quadrature, mesh, t))
        _cell_subspaces(eb, k)
        cells.append(eb)
    return EntityBases(k, edges, faces, cells, qdeg)


def l2_project(eb: EntityBasis, f, C: np.ndarray, degree: int | None = None) -> np.ndarray:
    """Coefficients of the L2-orthogonal projection of ``f`` onto the orthonormal basis ``C``.

    ``f`` maps points (nq, 3) to values (nq,) or (nq, 3); 3D vector values are
    reduced to the entity axes.  ``degree`` selects a dedicated quadrature
    (default: the entity's own rule).
    """
    if degree is None:
        rule, V = eb.rule, eb.V
    else:
        rule = eb.rule_of(degree)
        V = eb.monomials_at(rule.points)
    vals = np.asarray(f(rule.points), dtype=float)
    B = (V @ C.reshape(-1, C.shape[-1]).T).reshape((V.shape[0],) + C.shape[:-1])
    B = B * rule.weights.reshape((-1,) + (1,) * (C.ndim - 1))
    if C.ndim == 2:
        return B.T @ vals
    if vals.ndim == 2 and vals.shape[1] == 3:
        vals = vals @ eb.frame.axes.T
    return np.einsum("qbj,qj->b", B, vals)
