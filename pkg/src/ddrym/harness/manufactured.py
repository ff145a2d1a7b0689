"""Manufactured Yang-Mills solution and the sources that balance it.

The potential is a fixed trigonometric field with three algebra components.
E = -dA/dt, B = curl A + 1/2 [[A, A]], and the source of the E equation is

    f = dE/dt - curl B - W,   W^J = sum_{L,I} N_{LIJ} (B^L x A^I),

so that the exact fields satisfy the weak E equation with a boundary term.
All closed forms are derived with sympy and compiled with lambdify.
"""

from __future__ import annotations

import numpy as np
import sympy as sym

from ..lie import LieAlgebra

x, y, z, t = sym.symbols("x y z t", real=True)
_X = (x, y, z)


def potential() -> list:
    """The three algebra components of A as sympy 3-vectors."""
    px, py, pz = sym.pi * x, sym.pi * y, sym.pi * z
    half = sym.Rational(1, 2)
    base = sym.Matrix(
        [
            -half * sym.sin(px) * sym.cos(py) * sym.cos(pz),
            sym.cos(px) * sym.sin(py) * sym.cos(pz),
            -half * sym.cos(px) * sym.cos(py) * sym.sin(pz),
        ]
    )
    a3 = sym.Matrix(
        [
            -half * sym.sin(t) * sym.sin(py) ** 2,
            sym.cos(t) * sym.cos(pz) ** 2,
            -half * sym.sin(t) * sym.cos(px) ** 2,
        ]
    )
    return [sym.cos(t) * base, sym.sin(t) * base, a3]


def _curl(v):
    return sym.Matrix(
        [
            sym.diff(v[2], y) - sym.diff(v[1], z),
            sym.diff(v[0], z) - sym.diff(v[2], x),
            sym.diff(v[1], x) - sym.diff(v[0], y),
        ]
    )


def _div(v):
    return sum(sym.diff(v[i], _X[i]) for i in range(3))


def _numbers(a: np.ndarray):
    """Exact sympy numbers for small integer/float structure constants."""
    return np.vectorize(lambda v: sym.nsimplify(float(v)), otypes=[object])(a)


class _Field:
    """Compiled field (points (n, 3), t) -> array (n, 3, d) or (n, d)."""

    def __init__(self, comps: list, vector: bool):
        self.vector = vector
        self.d = len(comps)
        flat = [e for c in comps for e in (list(c) if vector else [c])]
        self.exprs = flat
        self._f = sym.lambdify((x, y, z, t), flat, modules="numpy", cse=True)

    def __call__(self, pts, tt: float) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        vals = self._f(pts[:, 0], pts[:, 1], pts[:, 2], float(tt))
        out = np.stack([np.broadcast_to(np.asarray(v, dtype=float), (len(pts),)) for v in vals], axis=-1)
        if self.vector:
            return out.reshape(len(pts), self.d, 3).transpose(0, 2, 1)
        return out


class ManufacturedSolution:
    """Closed-form A, E, B, div E and the E-equation source for a given algebra.

    Only three-dimensional algebras are supported (the potential has three
    algebra components).  Pass ``bracket=False`` for the Maxwell mode, where
    every bracket term is dropped.
    """

    def __init__(self, lie: LieAlgebra, bracket: bool = True):
        if lie.dim != 3:
            raise ValueError("the manufactured potential needs a three-dimensional algebra")
        self.lie = lie
        self.bracket = bracket and not lie.is_abelian
        d = lie.dim
        c = _numbers(lie.c) if self.bracket else np.zeros((d, d, d), dtype=object)
        N = _numbers(lie.N) if self.bracket else np.zeros((d, d, d), dtype=object)
        A = potential()
        E = [-sym.diff(a, t) for a in A]
        B = []
        for K in range(d):
            b = _curl(A[K])
            for I in range(d):
                for J in range(d):
                    if c[I, J, K] != 0:
                        b += sym.Rational(1, 2) * c[I, J, K] * A[I].cross(A[J])
            B.append(b)
        f = []
        for J in range(d):
            w = sym.zeros(3, 1)
            for L in range(d):
                for I in range(d):
                    if N[L, I, J] != 0:
                        w += N[L, I, J] * B[L].cross(A[I])
            f.append(sym.diff(E[J], t) - _curl(B[J]) - w)
        self.symbols = {"A": A, "E": E, "B": B, "f": f}
        self.A = _Field(A, True)
        self.E = _Field(E, True)
        self.B = _Field(B, True)
        self.f = _Field(f, True)
        self.divE = _Field([_div(e) for e in E], False)
        self._curlB = _Field([_curl(b) for b in B], True)
        self._dtE = _Field([sym.diff(e, t) for e in E], True)

    def W(self, pts, tt: float) -> np.ndarray:
        """Coupling term W^J = sum N_{LIJ} B^L x A^I evaluated numerically."""
        if not self.bracket:
            return np.zeros((len(pts), 3, self.lie.dim))
        Bv = self.B(pts, tt)
        Av = self.A(pts, tt)
        cr = np.cross(Bv[:, :, :, None], Av[:, :, None, :], axis=1)  # (n, 3, L, I)
        return np.einsum("nxLI,LIJ->nxJ", cr, self.lie.N)

    def constraint_source(self, pts, t_prev: float, t_next: float) -> tuple:
        """(D, g) with D the exact time difference of E and g = -div D + Z.

        Z^K = sum N_{LIK} D^L . A(t_prev)^I is the bracket part of the
        Gauss law tested against the multiplier.
        """
        dt = t_next - t_prev
        D = (self.E(pts, t_next) - self.E(pts, t_prev)) / dt
        g = -(self.divE(pts, t_next) - self.divE(pts, t_prev)) / dt
        if self.bracket:
            Av = self.A(pts, t_prev)
            g = g + np.einsum("nxL,nxI,LIK->nK", D, Av, self.lie.N)
        return D, g

    def check_source(self, pts, tt: float = 0.0) -> float:
        """Relative mismatch of f against dE/dt - curl B - W (independently compiled pieces)."""
        lhs = self.f(pts, tt)
        rhs = self._dtE(pts, tt) - self._curlB(pts, tt) - self.W(pts, tt)
        return float(np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1.0))
