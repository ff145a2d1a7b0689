"""Global DDR complex: operators, interpolators and L2 products."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..polyspace import make_bases
from .layout import make_layouts
from .local import LocalBuilder

SPACES = ("grad", "curl", "div", "l2")


class _Coo:
    """Accumulates dense blocks into a sparse matrix."""

    def __init__(self, shape):
        self.shape = shape
        self.rows, self.cols, self.vals = [], [], []

    def add(self, rows, cols, block):
        rr, cc = np.meshgrid(rows, cols, indexing="ij")
        self.rows.append(rr.ravel())
        self.cols.append(cc.ravel())
        self.vals.append(np.asarray(block, dtype=float).ravel())

    def tocsr(self):
        if not self.rows:
            return sp.csr_matrix(self.shape)
        M = sp.coo_matrix(
            (np.concatenate(self.vals), (np.concatenate(self.rows), np.concatenate(self.cols))),
            shape=self.shape,
        ).tocsr()
        M.eliminate_zeros()
        return M


@dataclass
class CellData:
    """Everything the schemes need on one cell, in cell-local DOF numbering."""

    dofs: object  # LocalDofs
    Pcurl: np.ndarray
    Pgrad: np.ndarray
    Pdiv: np.ndarray
    C: np.ndarray
    Mg: np.ndarray
    Mc: np.ndarray
    Md: np.ndarray
    UG: np.ndarray  # cell curl dofs x cell grad dofs
    UC: np.ndarray  # cell div dofs x cell curl dofs


@dataclass
class DDRComplex:
    """Degree-k DDR complex on a polyhedral mesh (DDR mode, l_F = l_T = k - 1)."""

    mesh: object
    k: int
    bases: object
    layouts: dict
    edge_ops: list
    face_ops: list
    cell_ops: list
    uG: sp.csr_matrix
    uC: sp.csr_matrix
    D: sp.csr_matrix
    mass: dict
    diagnostics: dict = field(default_factory=dict)
    _interp: dict = field(default_factory=dict, repr=False)
    _cells: list = field(default=None, repr=False)

    def dim(self, space: str) -> int:
        return self.layouts[space].dim

    # ------------------------------------------------------------ products
    def l2_product(self, space: str, x, y) -> float:
        return float(np.asarray(x) @ (self.mass[space] @ np.asarray(y)))

    def norm(self, space: str, x) -> float:
        return float(np.sqrt(max(self.l2_product(space, x, x), 0.0)))

    # ----------------------------------------------------------- cell data
    def cell_data(self) -> list:
        if self._cells is None:
            out = []
            for t, co in enumerate(self.cell_ops):
                d = co.dofs
                out.append(
                    CellData(
                        dofs=d,
                        Pcurl=co.Pcurl,
                        Pgrad=co.Pgrad,
                        Pdiv=co.Pdiv,
                        C=co.C,
                        Mg=sum(co.mass["grad"]),
                        Mc=sum(co.mass["curl"]),
                        Md=sum(co.mass["div"]),
                        UG=self.uG[d.curl][:, d.grad].toarray(),
                        UC=self.uC[d.div][:, d.curl].toarray(),
                    )
                )
            self._cells = out
        return self._cells

    # ------------------------------------------------------- interpolation
    def interpolation_operator(self, space: str):
        """Stacked evaluation points and the sparse map from point values to DOFs.

        Scalar spaces (grad, l2) take values of shape (N,); vector spaces (curl,
        div) take values of shape (N, 3) flattened row-major.
        """
        if space not in self._interp:
            self._interp[space] = _build_interpolation(self, space)
        return self._interp[space]

    def interpolate(self, space: str, f) -> np.ndarray:
        """Interpolate ``f`` (points (N, 3) -> (N,) or (N, 3)) into a DDR space."""
        if space not in SPACES:
            raise KeyError(f"unknown space {space!r}")
        pts, S = self.interpolation_operator(space)
        vals = np.asarray(f(pts), dtype=float)
        if space in ("curl", "div"):
            vals = np.broadcast_to(vals, (len(pts), 3))
        else:
            vals = np.broadcast_to(vals, (len(pts),))
        return S @ vals.ravel()

    # ---------------------------------------------------------- debug dump
    def dump_local_operators(self, path) -> None:
        """Write every local operator matrix as text, 17 significant digits."""
        with open(path, "w") as fh:

            def put(kind, i, name, M):
                M = np.atleast_2d(M)
                vals = " ".join(f"{v:.16e}" for v in M.ravel())
                fh.write(f"{kind} {i} {name} {M.shape[0]} {M.shape[1]} {vals}\n")

            for e, eo in enumerate(self.edge_ops):
                put("edge", e, "G", eo.G)
                put("edge", e, "trace", eo.gamma)
            for f, fo in enumerate(self.face_ops):
                put("face", f, "G", fo.G)
                put("face", f, "trace", fo.gamma)
                put("face", f, "C", fo.C)
                put("face", f, "trace_t", fo.gamma_t)
            for t, co in enumerate(self.cell_ops):
                for name in ("G", "Pgrad", "C", "Pcurl", "D", "Pdiv"):
                    put("cell", t, name, getattr(co, name))
                for sp_, (P, S) in co.mass.items():
                    put("cell", t, f"stab_{sp_}", S)
                    put("cell", t, f"mass_{sp_}", P + S)


def _global_operators(cx_mesh, k, bases, lay, eops, fops, cops):
    g, c, d = lay["grad"], lay["curl"], lay["div"]
    uG = _Coo((c.dim, g.dim))
    for e, eo in enumerate(eops):
        uG.add(c.entity_dofs("edge", e), eo.dofs.grad, eo.G)
    for f, fo in enumerate(fops):
        eb = bases.faces[f]
        Wv = eb.vector_P(k)
        for comp in ("R", "Rc"):
            rows = c.comp_dofs("face", f, comp)
            if len(rows):
                uG.add(rows, fo.dofs.grad, eb.gram(eb.sub[comp], Wv) @ fo.G)
    uC = _Coo((d.dim, c.dim))
    for f, fo in enumerate(fops):
        uC.add(d.entity_dofs("face", f), fo.dofs.curl, fo.C)
    D = _Coo((lay["l2"].dim, d.dim))
    for t, co in enumerate(cops):
        eb = bases.cells[t]
        Wv = eb.vector_P(k)
        for comp in ("R", "Rc"):
            rows = c.comp_dofs("cell", t, comp)
            if len(rows):
                uG.add(rows, co.dofs.grad, eb.gram(eb.sub[comp], Wv) @ co.G)
        for comp in ("G", "Gc"):
            rows = d.comp_dofs("cell", t, comp)
            if len(rows):
                uC.add(rows, co.dofs.curl, eb.gram(eb.sub[comp], Wv) @ co.C)
        D.add(lay["l2"].entity_dofs("cell", t), co.dofs.div, co.D)
    return uG.tocsr(), uC.tocsr(), D.tocsr()


def _global_mass(lay, cops):
    out = {}
    for space in ("grad", "curl", "div"):
        M = _Coo((lay[space].dim,) * 2)
        for co in cops:
            dofs = getattr(co.dofs, space)
            P, S = co.mass[space]
            M.add(dofs, dofs, P + S)
        out[space] = M.tocsr()
    out["l2"] = sp.identity(lay["l2"].dim, format="csr")
    return out


def build_complex(mesh, k: int, mode: str = "ddr") -> DDRComplex:
    """Build all local and global operators of the degree-k complex on ``mesh``."""
    serendipity(mode)  # validates the mode
    bases = make_bases(mesh, k)
    lay = make_layouts(mesh, k)
    lb = LocalBuilder(mesh, bases, lay)
    eops = [lb.edge_ops(e) for e in range(mesh.n_edges)]
    fops = [lb.face_ops(f, eops) for f in range(mesh.n_faces)]
    cops = [lb.cell_ops(t, eops, fops) for t in range(mesh.n_cells)]
    uG, uC, D = _global_operators(mesh, k, bases, lay, eops, fops, cops)
    diag = {name: float(min(v)) for name, v in lb.diag.items()}
    diag.update({f"cond_{key}": v for key, v in bases.condition_numbers().items()})
    return DDRComplex(mesh, k, bases, lay, eops, fops, cops, uG, uC, D, _global_mass(lay, cops), diag)


# ---------------------------------------------------------- interpolation
def _build_interpolation(cx: DDRComplex, space: str):
    mesh, k, B = cx.mesh, cx.k, cx.bases
    lay = cx.layouts[space]
    vector = space in ("curl", "div")
    pts, rows, cols, vals = [], [], [], []
    npts = 0

    def add_rule(rule, dofs, Phi):
        """Phi: (nq, nb) scalar or (nq, nb, 3) vector test values (already weighted)."""
        nonlocal npts
        nq = len(rule.points)
        pts.append(rule.points)
        q = npts + np.arange(nq)
        if Phi.ndim == 2:
            rr, qq = np.meshgrid(dofs, q, indexing="ij")
            rows.append(rr.ravel())
            cols.append(qq.ravel())
            vals.append(Phi.T.ravel())
        else:
            rr, qq, xx = np.meshgrid(dofs, q, np.arange(3), indexing="ij")
            rows.append(rr.ravel())
            cols.append((3 * qq + xx).ravel())
            vals.append(np.transpose(Phi, (1, 0, 2)).ravel())
        npts += nq

    def scalar(eb, deg):
        return eb.eval(eb.P(deg)) * eb.rule.weights[:, None]

    def vec(eb, comp):
        return eb.eval3(eb.sub[comp]) * eb.rule.weights[:, None, None]

    if space == "grad":
        nv = mesh.n_vertices
        pts.append(mesh.vertices)
        rows.append(lay.entity_dofs("vertex", np.arange(nv)))
        cols.append(np.arange(nv))
        vals.append(np.ones(nv))
        npts += nv
        for kind, ebs in (("edge", B.edges), ("face", B.faces), ("cell", B.cells)):
            if lay.entity_size(kind) == 0:
                continue
            for i, eb in enumerate(ebs):
                add_rule(eb.rule, lay.entity_dofs(kind, i), scalar(eb, k - 1))
    elif space == "curl":
        for e, eb in enumerate(B.edges):
            Phi = scalar(eb, k)[:, :, None] * mesh.edge_tangents[e]
            add_rule(eb.rule, lay.entity_dofs("edge", e), Phi)
        for kind, ebs, comps in (("face", B.faces, ("R", "Rc")), ("cell", B.cells, ("R", "Rc"))):
            for i, eb in enumerate(ebs):
                Phi = np.concatenate([vec(eb, c) for c in comps], axis=1)
                if Phi.shape[1]:
                    add_rule(eb.rule, lay.entity_dofs(kind, i), Phi)
    elif space == "div":
        for f, eb in enumerate(B.faces):
            Phi = scalar(eb, k)[:, :, None] * mesh.face_normals[f]
            add_rule(eb.rule, lay.entity_dofs("face", f), Phi)
        for t, eb in enumerate(B.cells):
            Phi = np.concatenate([vec(eb, c) for c in ("G", "Gc")], axis=1)
            if Phi.shape[1]:
                add_rule(eb.rule, lay.entity_dofs("cell", t), Phi)
    else:
        for t, eb in enumerate(B.cells):
            add_rule(eb.rule, lay.entity_dofs("cell", t), scalar(eb, k))
    P = np.concatenate(pts) if pts else np.zeros((0, 3))
    ncol = npts * (3 if vector else 1)
    S = sp.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(lay.dim, ncol)
    ).tocsr()
    return P, S


# --------------------------------------------------------------- serendipity
class DDRSerendipity:
    """Serendipity provider of DDR mode.

    S_G is the full gradient reconstruction tested against all of P^k and
    S_C is the vector potential itself, so the contract
    S_G I_grad q = grad q and S_C I_curl v = v holds by polynomial consistency.
    """

    mode = "ddr"

    @staticmethod
    def eta(kind: str) -> int:
        return 2

    @staticmethod
    def gradient(cx: DDRComplex, kind: str, i: int) -> np.ndarray:
        if kind == "face":
            return cx.face_ops[i].G
        if kind == "cell":
            return cx.cell_ops[i].G
        raise KeyError(kind)

    @staticmethod
    def potential(cx: DDRComplex, kind: str, i: int) -> np.ndarray:
        if kind == "face":
            return cx.face_ops[i].gamma_t
        if kind == "cell":
            return cx.cell_ops[i].Pcurl
        raise KeyError(kind)


_PROVIDERS = {"ddr": DDRSerendipity}


def serendipity(mode: str = "ddr"):
    """Return the serendipity provider for ``mode`` (only ``"ddr"`` is shipped)."""
    try:
        return _PROVIDERS[mode]()
    except KeyError:
        raise ValueError(f"unknown serendipity mode {mode!r}") from None
