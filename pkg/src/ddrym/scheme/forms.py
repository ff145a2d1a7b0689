"""Cell-local multilinear forms of the Yang-Mills schemes.

Cells with identical local dimensions are grouped and processed in batches.
Every bracket is kept factored as a small polynomial-level 3-array ``S``
contracted with a local reconstruction ``L``; Lie indices are only combined
after the fixed vector has been absorbed, so no algebra-tensorized 3- or
4-array is ever formed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..complex.local import positions
from ..polyspace.polynomials import dim_poly

_EPS3 = np.zeros((3, 3, 3))
for _i, _j, _k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
    _EPS3[_i, _j, _k] = 1.0
    _EPS3[_i, _k, _j] = -1.0
_EPS2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


def kron_metric(A: np.ndarray, M: np.ndarray) -> np.ndarray:
    """Batched A (x) M for A of shape (..., n, m)."""
    d = M.shape[0]
    out = np.einsum("...ij,IJ->...iIjJ", A, M)
    return out.reshape(A.shape[:-2] + (A.shape[-2] * d, A.shape[-1] * d))


def kron_id(A: np.ndarray, d: int) -> np.ndarray:
    return kron_metric(A, np.eye(d))


@dataclass
class Piece:
    """Factored bilinear bracket (v, w) -> S(Lv, Lw) on ``P`` sub-blocks of a cell.

    S: (B, P, nb, na, na), antisymmetric in the last two axes;
    L: (B, P, na, nc) maps cell-local curl DOFs to the polynomial space;
    rows: (P, nb) positions of the outputs in the bracket target space.
    """

    S: np.ndarray
    L: np.ndarray
    rows: np.ndarray

    def take(self, sel):
        return Piece(self.S[sel], self.L[sel], self.rows)


@dataclass
class CellGroup:
    """Batched cell-local data of cells sharing local dimensions."""

    cells: np.ndarray
    idx_c: np.ndarray  # (B, nc) global scalar curl DOFs
    idx_g: np.ndarray  # (B, ng)
    idx_d: np.ndarray  # (B, nd)
    Mc: np.ndarray
    Mg: np.ndarray
    Md: np.ndarray
    Sd: np.ndarray  # div stabilization
    UG: np.ndarray  # (B, nc, ng)
    UC: np.ndarray  # (B, nd, nc)
    Pc: np.ndarray  # (B, nv, nc) curl potential in P^k(T)^3
    Pg: np.ndarray  # (B, ns, ng) scalar potential in P^{k+1}(T)
    T3: np.ndarray  # (B, nv, nv, ns) int phi_a . phi_b chi_c
    n1: list  # pieces of the discrete bracket into cell-local X_div
    n2: list  # pieces of the pointwise bracket into P^{2k}(T)^3
    U2: np.ndarray  # (B, nv2, nc) element curl in P^{2k}(T)^3
    interior_c: np.ndarray  # local positions of cell-interior curl DOFs
    interior_g: np.ndarray

    @property
    def size(self) -> int:
        return len(self.cells)

    def take(self, sel) -> "CellGroup":
        return CellGroup(
            self.cells[sel],
            self.idx_c[sel],
            self.idx_g[sel],
            self.idx_d[sel],
            self.Mc[sel],
            self.Mg[sel],
            self.Md[sel],
            self.Sd[sel],
            self.UG[sel],
            self.UC[sel],
            self.Pc[sel],
            self.Pg[sel],
            self.T3[sel],
            [p.take(sel) for p in self.n1],
            [p.take(sel) for p in self.n2],
            self.U2[sel],
            self.interior_c,
            self.interior_g,
        )


# ------------------------------------------------------------ construction
def _triple(eb, A: np.ndarray, Bc: np.ndarray, C: np.ndarray) -> np.ndarray:
    """T[a, b, c] = int A_a B_b C_c for scalar coefficient arrays on the entity rule."""
    va, vb, vc = eb.eval(A), eb.eval(Bc), eb.eval(C)
    return np.einsum("q,qa,qb,qc->abc", eb.rule.weights, va, vb, vc)


def _face_tensor(ebF, k: int) -> np.ndarray:
    """TF[b, (s,y), (s',z)] = eps_yz int rho_b psi_s psi_s' on a face."""
    Pk = ebF.P(k)
    T = _triple(ebF, Pk, Pk, Pk)  # (b, s, s')
    n = Pk.shape[0]
    return np.einsum("bst,yz->bsytz", T, _EPS2).reshape(n, 2 * n, 2 * n)


def _cell_bracket_tensor(ebT, k: int, G: np.ndarray) -> np.ndarray:
    """S[b, (s,y), (s',z)] = sum_x eps_xyz int g_{b,x} psi_s psi_s' for vector basis rows G."""
    Pk = ebT.P(k)
    n = Pk.shape[0]
    w = ebT.rule.weights
    gv = ebT.eval(G)  # (q, b, x)
    pv = ebT.eval(Pk)  # (q, s)
    T = np.einsum("q,qbx,qs,qt->bxst", w, gv, pv, pv)
    return np.einsum("bxst,xyz->bsytz", T, _EPS3).reshape(len(G), 3 * n, 3 * n)


def _n2_tensor(ebT, k: int) -> np.ndarray:
    """S2[(c,x), (s,y), (s',z)] = eps_xyz int chi_c psi_s psi_s' with chi in P^{2k}."""
    Pk = ebT.P(k)
    P2 = ebT.P(2 * k)
    n, m = Pk.shape[0], P2.shape[0]
    T = _triple(ebT, P2, Pk, Pk)
    return np.einsum("cst,xyz->cxsytz", T, _EPS3).reshape(3 * m, 3 * n, 3 * n)


def _t3_tensor(ebT, k: int) -> np.ndarray:
    """T3[(s,y), (s',z), c] = delta_yz int psi_s psi_s' chi_c with chi in P^{k+1}."""
    Pk = ebT.P(k)
    T = _triple(ebT, Pk, Pk, ebT.P(k + 1))
    n = Pk.shape[0]
    return np.einsum("stc,yz->sytzc", T, np.eye(3)).reshape(3 * n, 3 * n, -1)


def build_groups(cx) -> list:
    """Group cells by local dimensions and precompute all batched cell data."""
    k = cx.k
    mesh = cx.mesh
    lay = cx.layouts
    cdata = cx.cell_data()
    nkF = dim_poly(2, k)
    face_T = [_face_tensor(eb, k) for eb in cx.bases.faces]
    keys: dict = {}
    for t, cd in enumerate(cdata):
        key = (len(cd.dofs.curl), len(cd.dofs.grad), len(cd.dofs.div), len(mesh.cell_faces[t]))
        keys.setdefault(key, []).append(t)
    groups = []
    for (nc, ng, nd, nf), cells in sorted(keys.items()):
        cells = np.array(cells)
        stack = lambda name: np.stack([getattr(cdata[t], name) for t in cells])  # noqa: E731
        Sd = np.stack([cx.cell_ops[t].mass["div"][1] for t in cells])
        # trilinear and N2 tensors
        T3 = np.stack([_t3_tensor(cx.bases.cells[t], k) for t in cells])
        S2 = np.stack([_n2_tensor(cx.bases.cells[t], k) for t in cells])
        C = stack("C")
        nv = C.shape[1]
        U2 = np.zeros((len(cells), S2.shape[1], nc))
        U2[:, :nv] = C
        # N1 pieces: faces then cell
        SF = np.zeros((len(cells), nf, nkF, 2 * nkF, 2 * nkF))
        LF = np.zeros((len(cells), nf, 2 * nkF, nc))
        SG, LG = [], []
        for b, t in enumerate(cells):
            dofs = cdata[t].dofs
            for j, f in enumerate(mesh.cell_faces[t]):
                SF[b, j] = face_T[f]
                LF[b, j][:, positions(dofs.curl, cx.face_ops[f].dofs.curl)] = cx.face_ops[f].gamma_t
            ebT = cx.bases.cells[t]
            GG = np.concatenate([ebT.sub["G"], ebT.sub["Gc"]])
            SG.append(_cell_bracket_tensor(ebT, k, GG))
            LG.append(cdata[t].Pcurl)
        nGG = SG[0].shape[0]
        face_rows = np.arange(nf * nkF).reshape(nf, nkF)
        n1 = [Piece(SF, LF, face_rows)]
        if nGG:
            n1.append(Piece(np.stack(SG)[:, None], np.stack(LG)[:, None], np.arange(nd - nGG, nd)[None]))
        n2 = [Piece(S2[:, None], stack("Pcurl")[:, None], np.arange(S2.shape[1])[None])]
        t0 = cells[0]
        d0 = cdata[t0].dofs
        ic = positions(d0.curl, lay["curl"].entity_dofs("cell", t0))
        ig = positions(d0.grad, lay["grad"].entity_dofs("cell", t0))
        groups.append(
            CellGroup(
                cells=cells,
                idx_c=np.stack([cdata[t].dofs.curl for t in cells]),
                idx_g=np.stack([cdata[t].dofs.grad for t in cells]),
                idx_d=np.stack([cdata[t].dofs.div for t in cells]),
                Mc=stack("Mc"),
                Mg=stack("Mg"),
                Md=stack("Md"),
                Sd=Sd,
                UG=stack("UG"),
                UC=stack("UC"),
                Pc=stack("Pcurl"),
                Pg=stack("Pgrad"),
                T3=T3,
                n1=n1,
                n2=n2,
                U2=U2,
                interior_c=ic,
                interior_g=ig,
            )
        )
    return groups


# ----------------------------------------------------- bracket primitives
def bracket_matrix(pieces, nb: int, Y: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Matrix of w -> Bk(Y, w): (B, nb*d, nc*d) for fixed Y of shape (B, nc, d)."""
    Bn, nc, d = Y.shape
    out = np.zeros((Bn, nb, d, nc, d))
    for p in pieces:
        y = p.L @ Y[:, None]  # (B, P, na, I)
        W = np.swapaxes(p.S, -1, -2) @ y[:, :, None]  # (B, P, n, c, I)
        WL = np.swapaxes(W, -1, -2) @ p.L[:, :, None]  # (B, P, n, I, j)
        blk = np.tensordot(WL, c, axes=([3], [0]))  # (B, P, n, j, J, K)
        out[:, p.rows.ravel()] += blk.transpose(0, 1, 2, 5, 3, 4).reshape(Bn, -1, d, nc, d)
    return out.reshape(Bn, nb * d, nc * d)


def bracket_hessian(pieces, Z: np.ndarray, nc: int, c: np.ndarray) -> np.ndarray:
    """H[z]_{(i,I),(j,J)} = z . Bk(e_iI, e_jJ) for z of shape (B, nb, d)."""
    Bn, _, d = Z.shape
    HL = np.zeros((Bn, d, nc, nc))
    for p in pieces:
        z = Z[:, p.rows]  # (B, P, n, K)
        _, P, n, na, _ = p.S.shape
        Hs = np.swapaxes(z, -1, -2) @ p.S.reshape(Bn, P, n, na * na)  # (B, P, K, a*c)
        Hs = Hs.reshape(Bn, P, d, na, na)
        L = p.L[:, :, None]
        HL += (np.swapaxes(L, -1, -2) @ Hs @ L).sum(axis=1)
    out = np.tensordot(HL, c, axes=([1], [2]))  # (B, i, j, I, J)
    return out.transpose(0, 1, 3, 2, 4).reshape(Bn, nc * d, nc * d)


def trilinear_local(g: CellGroup, V: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Matrices of lambda -> int <[P_curl V, P_grad lambda], P_curl test>.

    V has shape (B, nc, d); the result is (B, nc*d, ng*d) with rows (i, I)
    and columns (k, K).  The vector is absorbed into the integral first
    (M^J_{ik}) and only then combined with N_{IJK} = <e_I, [e_J, e_K]>.
    """
    Bn, nc, d = V.shape
    ng = g.Pg.shape[2]
    pv = g.Pc @ V  # (B, nv, J)
    MJ = _t3_sandwich(g, pv, g.Pc, g.Pg, first=True)  # (B, J, i, k)
    out = np.tensordot(MJ, N, axes=([1], [1]))  # (B, i, k, I, K)
    return out.transpose(0, 1, 3, 2, 4).reshape(Bn, nc * d, ng * d)


def trilinear_dv(g: CellGroup, Lam: np.ndarray, N: np.ndarray) -> np.ndarray:
    """Derivative of trilinear_local(V) @ Lam with respect to V: (B, nc*d, nc*d)."""
    Bn, ng, d = Lam.shape
    nc = g.Pc.shape[2]
    pl = g.Pg @ Lam  # (B, ns, K)
    MK = _t3_sandwich(g, pl, g.Pc, g.Pc, first=False)  # (B, K, i, j)
    out = np.tensordot(MK, N, axes=([1], [2]))  # (B, i, j, I, J)
    return out.transpose(0, 1, 3, 2, 4).reshape(Bn, nc * d, nc * d)


def _t3_sandwich(g: CellGroup, u: np.ndarray, Lrow: np.ndarray, Lcol: np.ndarray, first: bool) -> np.ndarray:
    """Contract T3 with the coefficients u on one slot, then apply Lrow^T (.) Lcol per algebra index.

    first=True absorbs u into the second vector slot (T3[p, a, s] u[a]),
    otherwise into the scalar slot (T3[p, a, s] u[s]).
    """
    T3 = g.T3
    Bn, nv, _, ns = T3.shape
    if first:
        W = np.swapaxes(T3, 2, 3).reshape(Bn, nv * ns, nv) @ u  # (B, p*s, J)
        W = W.reshape(Bn, nv, ns, -1)
    else:
        W = T3.reshape(Bn, nv * nv, ns) @ u
        W = W.reshape(Bn, nv, nv, -1)
    W = np.moveaxis(W, 3, 1)  # (B, J, p, .)
    return np.swapaxes(Lrow, 1, 2)[:, None] @ W @ Lcol[:, None]


# ------------------------------------------------------------ nonlinearity
def variant_data(g: CellGroup, variant: str):
    """(pieces, Mb, U) of the bracket target space for the chosen nonlinearity."""
    if variant == "n1":
        return g.n1, g.Md, g.UC
    if variant == "n2":
        nb = g.U2.shape[1]
        return g.n2, np.broadcast_to(np.eye(nb), (g.size, nb, nb)), g.U2
    raise ValueError(variant)


def nonlinear_terms(g: CellGroup, variant: str, An: np.ndarray, X: np.ndarray, lie, jacobian=True):
    """Value (B, nc*d) of the nonlinear form as a vector over test functions and its X-derivative.

    Implements n = Bk_Y^T Mb U X + 1/2 (U + Bk_Y)^T Mb Bk(X, X) with Y = (An + X)/2.
    """
    pieces, Mb, U = variant_data(g, variant)
    d = lie.dim
    c, M = lie.c, lie.metric
    Bn, nc, _ = X.shape
    nb = U.shape[1]
    Y = 0.5 * (An + X)
    BkY = bracket_matrix(pieces, nb, Y, c)
    BkX = bracket_matrix(pieces, nb, X, c)
    Ug = kron_id(U, d)
    Mbg = kron_metric(Mb, M)
    xf = X.reshape(Bn, nc * d)
    u = np.einsum("bij,bj->bi", Ug, xf)
    bxx = np.einsum("bij,bj->bi", BkX, xf)
    z1 = np.einsum("bij,bj->bi", Mbg, u)
    z2 = np.einsum("bij,bj->bi", Mbg, bxx)
    val = np.einsum("bji,bj->bi", BkY, z1) + 0.5 * np.einsum("bji,bj->bi", Ug + BkY, z2)
    if not jacobian:
        return val, None
    H1 = bracket_hessian(pieces, z1.reshape(Bn, nb, d), nc, c)
    H2 = bracket_hessian(pieces, z2.reshape(Bn, nb, d), nc, c)
    BkYt = np.swapaxes(BkY, 1, 2)
    J = BkYt @ (Mbg @ Ug) + 0.5 * H1 + (np.swapaxes(Ug, 1, 2) + BkYt) @ (Mbg @ BkX) + 0.25 * H2
    return val, J


def magnetic_local(g: CellGroup, variant: str, A: np.ndarray, lie) -> np.ndarray:
    """Cell-local magnetic field U A + 1/2 Bk(A, A): (B, nb, d)."""
    pieces, _, U = variant_data(g, variant)
    Bn, nc, d = A.shape
    nb = U.shape[1]
    Bk = bracket_matrix(pieces, nb, A, lie.c)
    b = np.einsum("bij,bjI->biI", U, A) + 0.5 * np.einsum("bij,bj->bi", Bk, A.reshape(Bn, -1)).reshape(Bn, nb, d)
    return b


def bracket_local(g: CellGroup, variant: str, V: np.ndarray, W: np.ndarray, lie) -> np.ndarray:
    """Cell-local bracket Bk(V, W): (B, nb, d)."""
    pieces, _, U = variant_data(g, variant)
    Bn, nc, d = V.shape
    nb = U.shape[1]
    Bk = bracket_matrix(pieces, nb, V, lie.c)
    return np.einsum("bij,bj->bi", Bk, W.reshape(Bn, -1)).reshape(Bn, nb, d)


def chunks(g: CellGroup, size: int):
    """Split a group into sub-batches to bound memory."""
    for s in range(0, g.size, size):
        yield g.take(slice(s, s + size))
