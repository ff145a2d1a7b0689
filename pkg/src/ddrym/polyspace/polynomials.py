"""Monomial coefficient algebra in scaled local coordinates.

A polynomial on an entity P of dimension ``dim`` is stored as a coefficient
vector over the monomials xi^alpha, |alpha| <= K, with xi = A (x - x_P) / h_P
where the rows of A are orthonormal axes of the entity.  Vector-valued
polynomials carry a component axis in front of the monomial axis and their
components are taken along the same axes.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


def dim_poly(dim: int, degree: int) -> int:
    """Dimension of P^degree in ``dim`` variables (0 for negative degrees)."""
    if degree < 0:
        return 0
    return comb(degree + dim, dim)


class MonomialSet:
    """Degree-graded monomials of total degree <= K in ``dim`` variables."""

    def __init__(self, dim: int, K: int):
        self.dim = dim
        self.K = K
        exps = []
        for deg in range(K + 1):
            exps.extend(_exponents(dim, deg))
        self.exps = np.array(exps, dtype=int).reshape(-1, dim)
        self.size = len(self.exps)
        self._index = {tuple(e): i for i, e in enumerate(self.exps.tolist())}
        self.deriv = [self._deriv_matrix(j) for j in range(dim)]
        self.mul = [self._mul_matrix(j) for j in range(dim)]

    def n(self, degree: int) -> int:
        return dim_poly(self.dim, degree)

    def index(self, exp) -> int:
        return self._index[tuple(exp)]

    def _deriv_matrix(self, j: int) -> np.ndarray:
        D = np.zeros((self.size, self.size))
        for i, e in enumerate(self.exps):
            if e[j] > 0:
                f = e.copy()
                f[j] -= 1
                D[self._index[tuple(f)], i] = e[j]
        return D

    def _mul_matrix(self, j: int) -> np.ndarray:
        X = np.zeros((self.size, self.size))
        for i, e in enumerate(self.exps):
            if e.sum() < self.K:
                f = e.copy()
                f[j] += 1
                X[self._index[tuple(f)], i] = 1.0
        return X

    def values(self, xi: np.ndarray) -> np.ndarray:
        """Monomial values at local points ``xi`` of shape (nq, dim); returns (nq, size)."""
        nq = xi.shape[0]
        pw = np.ones((self.dim, self.K + 1, nq))
        for j in range(self.dim):
            for p in range(1, self.K + 1):
                pw[j, p] = pw[j, p - 1] * xi[:, j]
        out = np.ones((nq, self.size))
        for j in range(self.dim):
            out *= pw[j, self.exps[:, j]].T
        return out


def _exponents(dim: int, deg: int):
    if dim == 1:
        return [(deg,)]
    out = []
    for a in range(deg, -1, -1):
        for rest in _exponents(dim - 1, deg - a):
            out.append((a,) + rest)
    return out


@lru_cache(maxsize=None)
def monomial_set(dim: int, K: int) -> MonomialSet:
    return MonomialSet(dim, K)


class LocalFrame:
    """Affine map from physical points to scaled local coordinates of an entity."""

    def __init__(self, center: np.ndarray, axes: np.ndarray, h: float):
        self.center = np.asarray(center, dtype=float)
        self.axes = np.atleast_2d(np.asarray(axes, dtype=float))  # (dim, 3)
        self.h = float(h)
        self.dim = self.axes.shape[0]

    def local(self, x: np.ndarray) -> np.ndarray:
        return (np.atleast_2d(x) - self.center) @ self.axes.T / self.h


# ------------------------------------------------------- coefficient calculus
def grad(ms: MonomialSet, c: np.ndarray, h: float) -> np.ndarray:
    """Gradient of scalar coefficients (..., nm) -> (..., dim, nm)."""
    return np.stack([c @ ms.deriv[j].T for j in range(ms.dim)], axis=-2) / h


def div(ms: MonomialSet, c: np.ndarray, h: float) -> np.ndarray:
    """Divergence of vector coefficients (..., dim, nm) -> (..., nm)."""
    return sum(c[..., j, :] @ ms.deriv[j].T for j in range(ms.dim)) / h


def curl(ms: MonomialSet, c: np.ndarray, h: float) -> np.ndarray:
    """Curl of 3D vector coefficients (..., 3, nm) -> (..., 3, nm)."""
    D = ms.deriv
    d = lambda comp, j: c[..., comp, :] @ D[j].T  # noqa: E731
    return np.stack([d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)], axis=-2) / h


def vrot(ms: MonomialSet, c: np.ndarray, h: float) -> np.ndarray:
    """Rotated gradient (d2 r, -d1 r) of 2D scalar coefficients."""
    D = ms.deriv
    return np.stack([c @ D[1].T, -(c @ D[0].T)], axis=-2) / h


def rot(ms: MonomialSet, c: np.ndarray, h: float) -> np.ndarray:
    """Scalar rotational d1 v2 - d2 v1 of 2D vector coefficients."""
    D = ms.deriv
    return (c[..., 1, :] @ D[0].T - c[..., 0, :] @ D[1].T) / h


def koszul_scalar(ms: MonomialSet, c: np.ndarray) -> np.ndarray:
    """xi * p for scalar coefficients p: (..., nm) -> (..., dim, nm)."""
    return np.stack([c @ ms.mul[j].T for j in range(ms.dim)], axis=-2)


def koszul_cross(ms: MonomialSet, c: np.ndarray) -> np.ndarray:
    """xi x w for 3D vector coefficients w: (..., 3, nm) -> (..., 3, nm)."""
    X = ms.mul
    m = lambda comp, j: c[..., comp, :] @ X[j].T  # noqa: E731
    return np.stack([m(2, 1) - m(1, 2), m(0, 2) - m(2, 0), m(1, 0) - m(0, 1)], axis=-2)


def koszul_perp(ms: MonomialSet, c: np.ndarray) -> np.ndarray:
    """xi^perp p = (xi_2, -xi_1) p for 2D scalar coefficients."""
    X = ms.mul
    return np.stack([c @ X[1].T, -(c @ X[0].T)], axis=-2)
