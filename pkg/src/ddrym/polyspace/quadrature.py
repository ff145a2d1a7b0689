"""Quadrature rules on edges, polygonal faces and polyhedral cells.

Faces and cells are integrated over their simplex cover.  Simplex rules are
collapsed (Duffy) tensor rules built from Gauss-Jacobi points, which are exact
for any requested degree with positive weights.  Parallelogram faces and
parallelepiped cells use a tensor Gauss rule on the affine image of the unit
square or cube instead, which needs far fewer points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

MAX_DEGREE = 20


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (nq, 3)
    weights: np.ndarray  # (nq,)
    degree: int

    @property
    def measure(self) -> float:
        return float(self.weights.sum())

    def integrate(self, values: np.ndarray) -> np.ndarray:
        """Integrate nodal values (leading axis = quadrature points)."""
        return np.tensordot(self.weights, values, axes=(0, 0))


def _check_degree(degree: int) -> None:
    if degree < 0 or degree > MAX_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree} (allowed 0..{MAX_DEGREE})")


def _npoints(degree: int) -> int:
    return max(1, int(np.ceil((degree + 1) / 2)))


def _jacobi01(n: int, alpha: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Jacobi rule on [0, 1] for the weight (1-u)^alpha."""
    if alpha == 0:
        x, w = roots_legendre(n)
    else:
        x, w = roots_jacobi(n, alpha, 0.0)
    return 0.5 * (1.0 + x), w / 2.0 ** (alpha + 1)


@lru_cache(maxsize=None)
def reference_rule(dim: int, degree: int) -> tuple[np.ndarray, np.ndarray]:
    """Rule on the unit simplex of dimension ``dim`` (barycentric-free coordinates).

    Returns points of shape (nq, dim) and weights summing to 1/dim!.
    """
    _check_degree(degree)
    n = _npoints(degree)
    if dim == 1:
        u, wu = _jacobi01(n, 0)
        return u[:, None], wu
    if dim == 2:
        u, wu = _jacobi01(n, 1)
        v, wv = _jacobi01(n, 0)
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = np.stack([U.ravel(), ((1 - U) * V).ravel()], axis=1)
        w = np.outer(wu, wv).ravel()
        return pts, w
    if dim == 3:
        u, wu = _jacobi01(n, 2)
        v, wv = _jacobi01(n, 1)
        s, ws = _jacobi01(n, 0)
        U, V, S = np.meshgrid(u, v, s, indexing="ij")
        pts = np.stack(
            [U.ravel(), ((1 - U) * V).ravel(), ((1 - U) * (1 - V) * S).ravel()], axis=1
        )
        w = np.einsum("i,j,k->ijk", wu, wv, ws).ravel()
        return pts, w
    raise ValueError("dim must be 1, 2 or 3")


def map_simplices(verts: np.ndarray, degree: int) -> QuadratureRule:
    """Map the reference rule onto a batch of simplices ``verts`` of shape (m, dim+1, 3)."""
    m, nv, _ = verts.shape
    dim = nv - 1
    ref, w = reference_rule(dim, degree)
    J = verts[:, 1:, :] - verts[:, :1, :]  # (m, dim, 3)
    pts = verts[:, None, 0, :] + np.einsum("qd,mdx->mqx", ref, J)
    if dim == 1:
        meas = np.linalg.norm(J[:, 0], axis=1)
    elif dim == 2:
        meas = np.linalg.norm(np.cross(J[:, 0], J[:, 1]), axis=1)
    else:
        meas = np.abs(np.einsum("ij,ij->i", J[:, 0], np.cross(J[:, 1], J[:, 2])))
    wts = meas[:, None] * w[None, :]
    return QuadratureRule(pts.reshape(-1, 3), wts.ravel(), degree)


def _tensor_rule(origin: np.ndarray, axes: np.ndarray, degree: int) -> QuadratureRule:
    """Tensor Gauss rule on the parallelotope origin + sum_i [0,1] axes[i]."""
    _check_degree(degree)
    u, w = _jacobi01(_npoints(degree), 0)
    dim = len(axes)
    grids = np.meshgrid(*([u] * dim), indexing="ij")
    ref = np.stack([g.ravel() for g in grids], axis=1)
    wts = np.ones(1)
    for _ in range(dim):
        wts = np.outer(wts, w).ravel()
    if dim == 2:
        meas = np.linalg.norm(np.cross(axes[0], axes[1]))
    else:
        meas = abs(np.dot(axes[0], np.cross(axes[1], axes[2])))
    return QuadratureRule(origin + ref @ axes, wts * meas, degree)


def _parallelogram(pts: np.ndarray, tol: float):
    if len(pts) != 4:
        return None
    if np.linalg.norm(pts[0] + pts[2] - pts[1] - pts[3]) > tol:
        return None
    return pts[0], np.array([pts[1] - pts[0], pts[3] - pts[0]])


def _parallelepiped(pts: np.ndarray, tol: float):
    if len(pts) != 8:
        return None
    o = pts[np.lexsort(pts.T[::-1])[0]]
    d = pts - o
    dist = np.linalg.norm(d, axis=1)
    order = np.argsort(dist)
    # the three nearest vertices span the box when it is a parallelepiped
    for cand in (order[1:4],):
        axes = d[cand]
        if abs(np.linalg.det(axes)) <= tol ** 3:
            return None
        coef = np.linalg.solve(axes.T, d.T).T
        if np.all(np.abs(coef - np.round(coef)) < 1e-12) and set(map(tuple, np.round(coef).astype(int))) == {
            (a, b, c) for a in (0, 1) for b in (0, 1) for c in (0, 1)
        }:
            return o, axes
    return None


def edge_quadrature(mesh, e: int, degree: int) -> QuadratureRule:
    verts = mesh.vertices[mesh.edges[e]][None]
    return map_simplices(verts, degree)


def face_quadrature(mesh, f: int, degree: int) -> QuadratureRule:
    pts = mesh.vertices[mesh.face_loops[f]]
    if len(pts) == 3:
        return map_simplices(pts[None], degree)
    par = _parallelogram(pts, 1e-13 * mesh.face_diameters[f])
    if par is not None:
        return _tensor_rule(par[0], par[1], degree)
    return map_simplices(mesh.cover.face_triangles[f], degree)


def cell_quadrature(mesh, t: int, degree: int) -> QuadratureRule:
    pts = mesh.vertices[mesh.cell_vertices[t]]
    if len(pts) == 4:
        return map_simplices(pts[None], degree)
    par = _parallelepiped(pts, 1e-13 * mesh.cell_diameters[t])
    if par is not None:
        return _tensor_rule(par[0], par[1], degree)
    return map_simplices(mesh.cover.cell_tetrahedra[t], degree)


def quadrature(mesh, kind: str, index: int, degree: int) -> QuadratureRule:
    """Rule of exactness ``degree`` on entity ``index`` of type ``kind`` ('edge', 'face', 'cell')."""
    if kind == "edge":
        return edge_quadrature(mesh, index, degree)
    if kind == "face":
        return face_quadrature(mesh, index, degree)
    if kind == "cell":
        return cell_quadrature(mesh, index, degree)
    raise ValueError(f"unknown entity kind {kind!r}")
