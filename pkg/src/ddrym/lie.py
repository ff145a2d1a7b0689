"""Lie algebras and tensorization of scalar DDR objects.

A Lie algebra-valued vector is stored with the algebra index fastest: the
entry of scalar DOF ``i`` and basis element ``e_I`` sits at ``i * d + I``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp


@dataclass(frozen=True, eq=False)
class LieAlgebra:
    """Finite-dimensional Lie algebra given by structure constants and a metric.

    ``c[I, J, K]`` holds c_{IJ}^K, so that [e_I, e_J] = c_{IJ}^K e_K, and
    ``metric[I, J] = <e_I, e_J>``.
    """

    name: str
    c: np.ndarray
    metric: np.ndarray

    @property
    def dim(self) -> int:
        return self.c.shape[0]

    @property
    def is_abelian(self) -> bool:
        return not np.any(self.c)

    @property
    def N(self) -> np.ndarray:
        """N[I, J, K] = <e_I, [e_J, e_K]>."""
        return np.einsum("JKL,IL->IJK", self.c, self.metric)

    def bracket(self, u, v) -> np.ndarray:
        """[u, v]^K = c_{IJ}^K u^I v^J; the algebra index is the last axis."""
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        if u.shape[-1] != self.dim or v.shape[-1] != self.dim:
            raise ValueError("dimension mismatch with the Lie algebra")
        return np.einsum("...I,...J,IJK->...K", u, v, self.c)

    def vector_bracket(self, v, w) -> np.ndarray:
        """Pointwise bracket of 3-vector fields: (v^I x w^J) [e_I, e_J].

        ``v`` and ``w`` have shape (..., 3, d).
        """
        v = np.asarray(v, dtype=float)
        w = np.asarray(w, dtype=float)
        if v.shape[-2:] != (3, self.dim) or w.shape[-2:] != (3, self.dim):
            raise ValueError("expected arrays of shape (..., 3, d)")
        cr = np.cross(v[..., :, :, None], w[..., :, None, :], axis=-3)  # (..., 3, I, J)
        return np.einsum("...xIJ,IJK->...xK", cr, self.c)

    def inner(self, u, v) -> np.ndarray:
        return np.einsum("...I,IJ,...J->...", u, self.metric, v)

    def dump(self) -> str:
        """Structure constants and metric as text, one nonzero entry per line."""
        lines = [f"# algebra {self.name} dim {self.dim}"]
        for I, J, K in zip(*np.nonzero(self.c)):
            lines.append(f"c {I} {J} {K} {self.c[I, J, K]:.17g}")
        for I, J in zip(*np.nonzero(self.metric)):
            lines.append(f"M {I} {J} {self.metric[I, J]:.17g}")
        return "\n".join(lines) + "\n"


def so3() -> LieAlgebra:
    """so(3) = su(2) with orthonormal basis: c_{IJ}^K = epsilon_{IJK}, M = identity."""
    eps = np.zeros((3, 3, 3))
    for i, j, k in ((0, 1, 2), (1, 2, 0), (2, 0, 1)):
        eps[i, j, k] = 1.0
        eps[j, i, k] = -1.0
    return LieAlgebra("so3", eps, np.eye(3))


def abelian(d: int = 1) -> LieAlgebra:
    """Abelian algebra R^d (zero bracket, identity metric)."""
    if d < 1:
        raise ValueError("abelian algebra needs d >= 1")
    return LieAlgebra(f"abelian:{d}", np.zeros((d, d, d)), np.eye(d))


def algebra_from_spec(spec: str) -> LieAlgebra:
    """Parse ``so3``, ``su2`` or ``abelian:D``."""
    if spec in ("so3", "su2"):
        return so3()
    if spec.startswith("abelian"):
        _, _, d = spec.partition(":")
        return abelian(int(d) if d else 1)
    raise ValueError(f"unknown Lie algebra {spec!r}")


# ------------------------------------------------------------ tensorization
def tensorize_linear(L, d: int):
    """L (x) Id_d, keeping sparse input sparse."""
    if sp.issparse(L):
        return sp.kron(L, sp.identity(d), format="csr")
    return np.kron(np.asarray(L), np.eye(d))


def tensorize_bilinear(B, M):
    """B (x) M for a bilinear form B and the algebra metric M."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("metric must be a square matrix")
    if sp.issparse(B):
        return sp.kron(B, sp.csr_matrix(M), format="csr")
    return np.kron(np.asarray(B), M)


def interleave(blocks) -> np.ndarray:
    """Stack per-basis scalar vectors v^I (shape (d, n)) into an algebra-valued vector."""
    blocks = np.asarray(blocks, dtype=float)
    return blocks.T.ravel()


def extract(v, d: int) -> np.ndarray:
    """Inverse of :func:`interleave`: returns the (d, n) array of blocks v^I."""
    v = np.asarray(v, dtype=float)
    if v.size % d:
        raise ValueError("vector length is not a multiple of the algebra dimension")
    return v.reshape(-1, d).T.copy()


def lie_dofs(scalar_dofs, d: int) -> np.ndarray:
    """Global indices (i, I) -> i * d + I of the algebra-valued DOFs over ``scalar_dofs``."""
    s = np.asarray(scalar_dofs, dtype=int)
    return (s[:, None] * d + np.arange(d)[None, :]).ravel()
