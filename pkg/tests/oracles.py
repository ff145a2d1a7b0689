"""Naive reference implementations used as test oracles.

Everything here is deliberately straightforward: brackets are evaluated
pointwise at quadrature points, the algebra index is tensorized first and
the resulting full arrays are contracted with plain einsum.
"""

import numpy as np

from ddrym.complex.local import positions


def random_algebra(d, rng):
    from ddrym.lie import LieAlgebra

    c = rng.standard_normal((d, d, d))
    c = c - c.transpose(1, 0, 2)
    G = rng.standard_normal((d, d))
    return LieAlgebra("random", c, G @ G.T + d * np.eye(d))


def curl_values(cx, t, pts=None):
    """P_curl of every local curl basis vector at the cell rule points: (nq, nc, 3)."""
    eb = cx.bases.cells[t]
    cd = cx.cell_data()[t]
    vec = eb.eval3(eb.vector_P(cx.k), pts)  # (nq, nv, 3)
    return np.einsum("qax,ai->qix", vec, cd.Pcurl)


def grad_values(cx, t):
    eb = cx.bases.cells[t]
    cd = cx.cell_data()[t]
    return eb.eval(eb.P(cx.k + 1)) @ cd.Pgrad


def n1_scalar_bracket(cx, t):
    """S[beta, i, j] = int_F rho_b ((gamma_t phi_i) x (gamma_t phi_j)) . n_F on the cell faces."""
    mesh = cx.mesh
    cd = cx.cell_data()[t]
    nd, nc = len(cd.dofs.div), len(cd.dofs.curl)
    S = np.zeros((nd, nc, nc))
    for f in mesh.cell_faces[t]:
        ebF = cx.bases.faces[f]
        fo = cx.face_ops[f]
        tang = np.einsum("qax,an->qnx", ebF.eval3(ebF.vector_P(cx.k)), fo.gamma_t)
        pc = positions(cd.dofs.curl, fo.dofs.curl)
        full = np.zeros((len(ebF.rule.weights), nc, 3))
        full[:, pc] = tang
        cr = np.cross(full[:, :, None, :], full[:, None, :, :])  # (q, i, j, 3)
        trip = cr @ mesh.face_normals[f]
        rho = ebF.eval(ebF.P(cx.k))  # (q, b)
        rows = positions(cd.dofs.div, cx.layouts["div"].entity_dofs("face", f))
        S[rows] += np.einsum("q,qb,qij->bij", ebF.rule.weights, rho, trip)
    return S


def n2_scalar_bracket(cx, t):
    """S[(c, x), i, j] = int_T chi_c (P phi_i x P phi_j)_x with chi in P^{2k}(T)."""
    eb = cx.bases.cells[t]
    phi = curl_values(cx, t)
    chi = eb.eval(eb.P(2 * cx.k))
    cr = np.cross(phi[:, :, None, :], phi[:, None, :, :])  # (q, i, j, x)
    S = np.einsum("q,qc,qijx->cxij", eb.rule.weights, chi, cr)
    return S.reshape(-1, phi.shape[1], phi.shape[1])


def tensorize_bracket(S, c):
    """Full 3-array Bk[(b, K), (i, I), (j, J)] = S[b, i, j] c_{IJ}^K."""
    nb, nc, _ = S.shape
    d = c.shape[0]
    return np.einsum("bij,IJK->bKiIjJ", S, c).reshape(nb * d, nc * d, nc * d)


def nonlinear_value(S, U, Mb, lie, An, X):
    """Value over test functions of <Bk(Y, v), Mb U X> + 1/2 <U v + Bk(Y, v), Mb Bk(X, X)>."""
    d = lie.dim
    Bk = tensorize_bracket(S, lie.c)
    Uf = np.kron(U, np.eye(d))
    Mf = np.kron(Mb, lie.metric)
    Y = 0.5 * (An + X)
    D4 = np.einsum("bpq,bc,crs->pqrs", Bk, Mf, Bk, optimize=True)  # double bracket
    t1 = np.einsum("p,bpq,bc,cr,r->q", Y, Bk, Mf, Uf, X, optimize=True)
    t2 = 0.5 * np.einsum("bq,bc,crs,r,s->q", Uf, Mf, Bk, X, X, optimize=True)
    t3 = 0.5 * np.einsum("pqrs,p,r,s->q", D4, Y, X, X, optimize=True)
    return t1 + t2 + t3


def trilinear_oracle(cx, t, lie):
    """T[(i, I), (j, J), (k, K)] = int P phi_i . P phi_j chi_k N_{IJK}."""
    eb = cx.bases.cells[t]
    phi = curl_values(cx, t)
    chi = grad_values(cx, t)
    T = np.einsum("q,qix,qjx,qk->ijk", eb.rule.weights, phi, phi, chi)
    d = lie.dim
    nc, ng = T.shape[0], T.shape[2]
    return np.einsum("ijk,IJK->iIjJkK", T, lie.N).reshape(nc * d, nc * d, ng * d)
