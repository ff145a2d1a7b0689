"""Global DOF layouts of the DDR spaces."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..polyspace.polynomials import dim_poly

KINDS = ("vertex", "edge", "face", "cell")


def _pdim(d, l):
    return dim_poly(d, l)


@dataclass(frozen=True)
class SpaceLayout:
    """Entity-major layout: vertices, then edges, faces and cells.

    ``components[kind]`` lists (name, size) pairs in storage order for each
    entity of that kind; every entity of a kind has the same component sizes.
    """

    name: str
    k: int
    counts: dict
    components: dict
    eta: int = 2

    @property
    def ell(self) -> int:
        """Face/cell polynomial degree l_P = k + 1 - eta."""
        return self.k + 1 - self.eta

    def entity_size(self, kind: str) -> int:
        return sum(s for _, s in self.components.get(kind, ()))

    def offset(self, kind: str) -> int:
        off = 0
        for kk in KINDS:
            if kk == kind:
                return off
            off += self.counts[kk] * self.entity_size(kk)
        raise KeyError(kind)

    @property
    def dim(self) -> int:
        return sum(self.counts[kk] * self.entity_size(kk) for kk in KINDS)

    def entity_dofs(self, kind: str, i) -> np.ndarray:
        s = self.entity_size(kind)
        i = np.atleast_1d(np.asarray(i, dtype=int))
        return (self.offset(kind) + i[:, None] * s + np.arange(s)[None, :]).ravel()

    def comp_slice(self, kind: str, comp: str) -> slice:
        start = 0
        for name, s in self.components[kind]:
            if name == comp:
                return slice(start, start + s)
            start += s
        raise KeyError(comp)

    def comp_dofs(self, kind: str, i: int, comp: str) -> np.ndarray:
        sl = self.comp_slice(kind, comp)
        return self.offset(kind) + i * self.entity_size(kind) + np.arange(sl.start, sl.stop)

    def describe(self) -> list:
        """Component descriptors (kind, component, size, first global offset)."""
        out = []
        for kk in KINDS:
            start = self.offset(kk)
            for name, s in self.components.get(kk, ()):
                out.append((kk, name, s, start))
                start += s
        return out


def make_layouts(mesh, k: int) -> dict:
    """Layouts of X_grad, X_curl, X_div and P^k(T_h) in DDR mode (eta = 2)."""
    counts = {
        "vertex": mesh.n_vertices,
        "edge": mesh.n_edges,
        "face": mesh.n_faces,
        "cell": mesh.n_cells,
    }
    l = k - 1
    grad = SpaceLayout(
        "grad",
        k,
        counts,
        {
            "vertex": [("V", 1)],
            "edge": [("P", _pdim(1, k - 1))],
            "face": [("P", _pdim(2, l))],
            "cell": [("P", _pdim(3, l))],
        },
    )
    curl = SpaceLayout(
        "curl",
        k,
        counts,
        {
            "vertex": [],
            "edge": [("P", _pdim(1, k))],
            "face": [("R", max(_pdim(2, k) - 1, 0)), ("Rc", _pdim(2, l))],
            "cell": [
                ("R", max(3 * _pdim(3, k - 1) - _pdim(3, k - 2), 0)),
                ("Rc", _pdim(3, l)),
            ],
        },
    )
    div = SpaceLayout(
        "div",
        k,
        counts,
        {
            "vertex": [],
            "edge": [],
            "face": [("P", _pdim(2, k))],
            "cell": [
                ("G", max(_pdim(3, k) - 1, 0)),
                ("Gc", max(3 * _pdim(3, k) - _pdim(3, k + 1) + 1, 0)),
            ],
        },
    )
    l2 = SpaceLayout(
        "l2", k, counts, {"vertex": [], "edge": [], "face": [], "cell": [("P", _pdim(3, k))]}
    )
    return {"grad": grad, "curl": curl, "div": div, "l2": l2}
