"""Constraint-preserving implicit schemes for the Yang-Mills equations."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from ..lie import LieAlgebra, lie_dofs, tensorize_bilinear, tensorize_linear
from . import forms
from .linalg import (
    SingularSystemError,
    SOLVERS,
    Factorized,
    FrozenSystem,
    SparsityPattern,
    dependent_combinations,
    direct_solve,
    grad_components,
    left_null_space,
    pin_rows,
    replace_rows,
)

log = logging.getLogger(__name__)

VARIANTS = ("n1", "n2", "maxwell")


class NewtonError(RuntimeError):
    pass


@dataclass
class SchemeConfig:
    nonlinearity: str = "n1"
    newton_tol: float = 1e-12
    max_newton: int = 50
    static_condensation: bool = False
    chunk: int = 64  # cells per batch in local assembly
    newton: str = "exact"  # "exact" or "chord" (reuse the factorized Jacobian)
    chord_rate: float = 0.05  # refactorize when a chord iteration contracts less than this
    solver: str = "superlu"  # "superlu", "pardiso" or "auto"
    predictor: str = "previous"  # initial Newton guess: "previous" level or linear "extrapolate"

    def __post_init__(self):
        if self.nonlinearity not in VARIANTS:
            raise ValueError(f"unknown nonlinearity {self.nonlinearity!r}")
        if self.newton not in ("exact", "chord"):
            raise ValueError(f"unknown Newton variant {self.newton!r}")
        if self.predictor not in ("previous", "extrapolate"):
            raise ValueError(f"unknown predictor {self.predictor!r}")
        if self.solver not in SOLVERS:
            raise ValueError(f"unknown linear solver {self.solver!r}")
        if not self.newton_tol > 0:
            raise ValueError("Newton tolerance must be positive")


@dataclass
class SchemeState:
    """Algebra-valued coefficient vectors at one time level."""

    n: int
    t: float
    A: np.ndarray
    E: np.ndarray
    lam: np.ndarray
    info: dict = field(default_factory=dict)


@dataclass
class StepReport:
    n: int
    t: float
    newton_iterations: int
    residual: float
    residual_history: list
    wall_time: float
    pinned: int
    factorizations: int = 0


class YangMillsScheme:
    """Discrete Yang-Mills scheme on a DDR complex tensorized over a Lie algebra."""

    def __init__(self, cx, lie: LieAlgebra, config: SchemeConfig | None = None):
        self.cx = cx
        self.lie = lie
        self.config = config or SchemeConfig()
        self.d = lie.dim
        self.maxwell = self.config.nonlinearity == "maxwell"
        # the Maxwell mode drops every bracket term
        self.N = np.zeros_like(lie.N) if self.maxwell else lie.N
        self.groups = forms.build_groups(cx)
        self.nE = cx.dim("curl") * self.d
        self.nL = cx.dim("grad") * self.d
        self.n_unknowns = self.nE + (0 if self.maxwell else self.nL)
        M = lie.metric
        self.Mc = tensorize_bilinear(cx.mass["curl"], M)
        self.Mg = tensorize_bilinear(cx.mass["grad"], M)
        self.Md = tensorize_bilinear(cx.mass["div"], M)
        self.UG = tensorize_linear(cx.uG, self.d)
        self.UC = tensorize_linear(cx.uC, self.d)
        self._pattern = None
        self._riesz = None
        self._frozen = None
        self._spare = None  # released factorization whose analysis can be reused
        self._last = None  # (n, t, X) of the level before the current one, for extrapolation
        # constant directions of X_grad (x) g, one per DOF-connected component and algebra index
        ncomp = grad_components([g.idx_g for g in self.groups], cx.dim("grad"))
        ones = cx.interpolate("grad", lambda x: np.ones(len(x)))
        cols = []
        for comp in range(ncomp.max() + 1):
            q = np.where(ncomp == comp, ones, 0.0)
            for I in range(self.d):
                v = np.zeros((len(q), self.d))
                v[:, I] = q
                cols.append(v.ravel())
        self.Q = np.array(cols).T
        vdofs = cx.layouts["grad"].entity_dofs("vertex", np.arange(cx.mesh.n_vertices))
        self._vertex_lam = lie_dofs(vdofs, self.d)

    # ------------------------------------------------------------ helpers
    def _gather(self, v, idx):
        return v.reshape(-1, self.d)[idx]

    def _local_index(self, g):
        e = lie_dofs(g.idx_c.ravel(), self.d).reshape(g.size, -1)
        if self.maxwell:
            return e
        lam = self.nE + lie_dofs(g.idx_g.ravel(), self.d).reshape(g.size, -1)
        return np.concatenate([e, lam], axis=1)

    def _chunks(self):
        for g in self.groups:
            yield from forms.chunks(g, self.config.chunk)

    def pattern(self) -> SparsityPattern:
        if self._pattern is None:
            self._pattern = SparsityPattern(
                [self._local_index(g) for g in self._chunks()], (self.n_unknowns,) * 2
            )
        return self._pattern

    # ---------------------------------------------------------- assembly
    def _local_system(self, g, prev: SchemeState, E, lam, dt, jacobian: bool):
        """Cell-local residual (B, nl) and optionally Jacobian blocks (B, nl, nl)."""
        M = self.lie.metric
        d = self.d
        Bn = g.size
        En = self._gather(prev.E, g.idx_c)
        An = self._gather(prev.A, g.idx_c)
        Ec = self._gather(E, g.idx_c)
        Xa = An - dt * Ec
        dE = (Ec - En).reshape(Bn, -1)
        Mcg = forms.kron_metric(g.Mc, M)
        K = forms.kron_metric(np.einsum("bji,bjk,bkl->bil", g.UC, g.Md, g.UC, optimize=True), M)
        xa = Xa.reshape(Bn, -1)
        rE = np.einsum("bij,bj->bi", Mcg, dE) / dt - np.einsum("bij,bj->bi", K, xa)
        if self.maxwell:
            J = Mcg / dt + dt * K if jacobian else None
            return rE, J
        Lam = self._gather(lam, g.idx_g)
        lf = Lam.reshape(Bn, -1)
        MUG = forms.kron_metric(g.Mc @ g.UG, M)
        TLX = forms.trilinear_local(g, Xa, self.N)
        TLn = forms.trilinear_local(g, An, self.N)
        nval, Jn = forms.nonlinear_terms(g, self.config.nonlinearity, An, Xa, self.lie, jacobian)
        rE = rE + np.einsum("bij,bj->bi", MUG + TLX, lf) - nval
        CL = MUG + TLn
        rL = np.einsum("bji,bj->bi", CL, dE) / dt
        r = np.concatenate([rE, rL], axis=1)
        if not jacobian:
            return r, None
        nc = Ec.shape[1] * d
        ng = Lam.shape[1] * d
        J = np.zeros((Bn, nc + ng, nc + ng))
        J[:, :nc, :nc] = Mcg / dt - dt * (forms.trilinear_dv(g, Lam, self.N) - K - Jn)
        J[:, :nc, nc:] = MUG + TLX
        J[:, nc:, :nc] = np.transpose(CL, (0, 2, 1)) / dt
        return r, J

    def assemble(self, prev: SchemeState, X: np.ndarray, dt: float, forcing=None, jacobian=True):
        """Global residual F(X) - b and (optionally) the sparse Jacobian with its local blocks."""
        E = X[: self.nE]
        lam = None if self.maxwell else X[self.nE :]
        R = np.zeros(self.n_unknowns)
        vals, interior = [], []
        for g in self._chunks():
            r, J = self._local_system(g, prev, E, lam, dt, jacobian)
            np.add.at(R, self._local_index(g).ravel(), r.ravel())
            if jacobian:
                vals.append(J)
                if self.config.static_condensation:
                    interior.append(self._interior(g, J))
        if forcing is not None:
            R[: self.nE] -= forcing[0]
            if not self.maxwell and forcing[1] is not None:
                R[self.nE :] -= forcing[1]
        if not jacobian:
            return R, None, None
        return R, self.pattern().assemble(vals), interior

    def _interior_local(self, g):
        d = self.d
        e = lie_dofs(g.interior_c, d)
        if self.maxwell:
            return e
        nc = g.idx_c.shape[1] * d
        return np.concatenate([e, nc + lie_dofs(g.interior_g, d)])

    def _interior(self, g, J):
        loc = self._interior_local(g)
        gidx = self._local_index(g)[:, loc]
        if len(loc) == 0:
            return gidx, np.zeros((g.size, 0, 0))
        return gidx, np.linalg.inv(J[:, loc][:, :, loc])

    # ----------------------------------------------------------- solving
    def _pin(self, Jac, general=False):
        """Lambda rows to replace by pinning equations (dependent constraint rows)."""
        if self.maxwell:
            return np.zeros(0, dtype=int)
        C = Jac[self.nE :]
        if general:
            W = left_null_space(C)
        else:
            Z = dependent_combinations(C, self.Q)
            W = self.Q @ Z.T if len(Z) else np.zeros((self.nL, 0))
        return self.nE + pin_rows(W, self._vertex_lam)

    def _factorize(self, Jac, interior, rhs):
        """Factorize the (pinned, optionally condensed) Newton matrix and solve for ``rhs``."""
        solver = self.config.solver
        interior = interior if self.config.static_condensation else None
        F = None
        spare, self._spare = self._spare, None
        try:
            F = FrozenSystem(Jac, self._pin(Jac), interior, solver, spare)
            return F, F.solve(rhs)
        except SingularSystemError:
            if F is not None:
                F.free()
            if self.maxwell:
                raise
            pinned = self._pin(Jac, general=True)
            if len(pinned) == 0:
                raise
            log.debug("singular Newton system: pinning %d lambda rows", len(pinned))
            F = FrozenSystem(Jac, pinned, interior, solver)
            return F, F.solve(rhs)

    def _release(self, final: bool = False):
        """Free the current factors; ``final`` also drops the reusable analysis."""
        if self._frozen is not None:
            self._frozen[0].free()
            self._spare = self._frozen[0]
        self._frozen = None
        if final and self._spare is not None:
            lu = self._spare.F.lu
            if self._spare.F.solver == "pardiso" and lu is not None:
                lu.free_memory(everything=True)
            self._spare = None

    def release(self):
        """Free every cached factorization (call after the last step)."""
        self._release(final=True)

    def step(self, prev: SchemeState, t_next: float, forcing=None) -> tuple:
        """Advance one time step; returns (next state, StepReport).

        With ``newton="chord"`` the factorized Jacobian is kept across
        iterations and steps and rebuilt only when the residual contraction
        drops below ``chord_rate`` or the time step changes.
        """
        t0 = time.perf_counter()
        dt = t_next - prev.t
        if not dt > 0:
            raise ValueError("time steps must be positive")
        cfg = self.config
        chord = cfg.newton == "chord"
        if self._frozen is not None and (not chord or self._frozen[1] != dt):
            self._release()
        zero = np.zeros(self.n_unknowns)
        b_norm = np.linalg.norm(self.assemble(prev, zero, dt, forcing, jacobian=False)[0])
        X = prev.E.copy() if self.maxwell else np.concatenate([prev.E, prev.lam])
        X_prev = X.copy()
        last = self._last
        if cfg.predictor == "extrapolate" and last is not None and last[0] == prev.n - 1 and prev.t > last[1]:
            X = X + (X - last[2]) * (dt / (prev.t - last[1]))
        hist = []
        its = factorizations = 0
        npin = 0 if self._frozen is None else len(self._frozen[0].pinned)
        while True:
            refresh = not chord or self._frozen is None
            if chord and len(hist) >= 2 and hist[-1] > cfg.chord_rate * hist[-2]:
                refresh = True
            R, Jac, interior = self.assemble(prev, X, dt, forcing, jacobian=refresh)
            rn = np.linalg.norm(R)
            rel = rn / b_norm if b_norm > 0 else rn
            hist.append(rel)
            if rel <= cfg.newton_tol or (b_norm == 0 and rn == 0):
                break
            if its >= cfg.max_newton:
                self._release(final=True)
                raise NewtonError(
                    f"Newton did not converge in {cfg.max_newton} iterations at t={t_next:.6g} "
                    f"(relative residual {rel:.3e})"
                )
            if refresh:
                self._release()
                F, dx = self._factorize(Jac, interior, -R)
                self._frozen = (F, dt)
                factorizations += 1
                npin = len(F.pinned)
            else:
                dx = self._frozen[0].solve(-R)
            X = X + dx
            its += 1
        if not chord:
            self._release()
        self._last = (prev.n, prev.t, X_prev)
        E = X[: self.nE]
        lam = prev.lam if self.maxwell else X[self.nE :]
        A = prev.A - dt * E
        nxt = SchemeState(prev.n + 1, t_next, A, E.copy(), lam.copy())
        rep = StepReport(nxt.n, t_next, its, hist[-1], hist, time.perf_counter() - t0, npin, factorizations)
        log.debug("step %d t=%.6g newton=%d residual=%.3e", nxt.n, t_next, its, hist[-1])
        return nxt, rep

    # ------------------------------------------------------- diagnostics
    def constraint_operator(self, A: np.ndarray) -> sp.csr_matrix:
        """Matrix K(A) with C(q) = q^T K(A) E, rows over X_grad (x) g."""
        rows, cols, vals = [], [], []
        M = self.lie.metric
        for g in self._chunks():
            An = self._gather(A, g.idx_c)
            CL = forms.kron_metric(g.Mc @ g.UG, M) + forms.trilinear_local(g, An, self.N)
            ie = lie_dofs(g.idx_c.ravel(), self.d).reshape(g.size, -1)
            ig = lie_dofs(g.idx_g.ravel(), self.d).reshape(g.size, -1)
            rows.append(np.repeat(ig, ie.shape[1], axis=1).ravel())
            cols.append(np.tile(ie, (1, ig.shape[1])).ravel())
            vals.append(np.transpose(CL, (0, 2, 1)).ravel())
        K = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.nL, self.nE)
        )
        return K.tocsr()

    def constraint_vector(self, state: SchemeState) -> np.ndarray:
        """Coefficients c with C^n(q) = q . c for all q."""
        if self.maxwell and not self.lie.is_abelian:
            log.debug("constraint functional of the Maxwell mode ignores the bracket term")
        return self.constraint_operator(state.A) @ state.E

    def constraint_functional(self, state: SchemeState, q: np.ndarray) -> float:
        return float(q @ self.constraint_vector(state))

    def riesz(self) -> Factorized:
        if self._riesz is None:
            H = self.Mg + self.UG.T @ self.Mc @ self.UG
            self._riesz = Factorized(H)
        return self._riesz

    def dual_norm(self, c: np.ndarray) -> float:
        """Norm of the functional q -> q . c dual to (q,q)_grad + (uG q, uG q)_curl."""
        y = self.riesz().solve(c)
        return float(np.sqrt(max(c @ y, 0.0)))

    def magnetic_field(self, state: SchemeState, variant: str | None = None) -> list:
        """Per-group cell-local magnetic fields (X_div-local or P^{2k}(T)^3 coefficients)."""
        variant = variant or self._energy_variant()
        return [forms.magnetic_local(g, variant, self._gather(state.A, g.idx_c), self.lie) for g in self._chunks()]

    def _energy_variant(self):
        return "n2" if self.config.nonlinearity == "n2" else "n1"

    def magnetic_energy(self, state: SchemeState, variant: str | None = None) -> float:
        variant = variant or self._energy_variant()
        M = self.lie.metric
        lie = self.lie if not self.maxwell else _abelian_like(self.lie)
        total = 0.0
        for g in self._chunks():
            A = self._gather(state.A, g.idx_c)
            b = forms.magnetic_local(g, variant, A, lie)
            _, Mb, _ = forms.variant_data(g, variant)
            total += 0.5 * np.einsum("biI,bij,IJ,bjJ->", b, Mb, M, b, optimize=True)
            if variant == "n2":
                u = np.einsum("bij,bjI->biI", g.UC, A)
                total += 0.5 * np.einsum("biI,bij,IJ,bjJ->", u, g.Sd, M, u, optimize=True)
        return float(total)

    def energy(self, state: SchemeState, variant: str | None = None) -> float:
        return 0.5 * float(state.E @ (self.Mc @ state.E)) + self.magnetic_energy(state, variant)

    def discrete_vector_bracket(self, V: np.ndarray, W: np.ndarray) -> np.ndarray:
        """Discrete bracket of two X_curl (x) g vectors, as an X_div (x) g vector."""
        out = np.zeros(self.cx.dim("div") * self.d).reshape(-1, self.d)
        for g in self._chunks():
            b = forms.bracket_local(g, "n1", self._gather(V, g.idx_c), self._gather(W, g.idx_c), self.lie)
            out[g.idx_d] = b
        return out.ravel()

    def nonlinear_form(self, An: np.ndarray, Anp1: np.ndarray, v: np.ndarray, variant: str | None = None) -> float:
        """Value of the chosen nonlinear form N(A^n, A^{n+1}; v)."""
        variant = variant or self.config.nonlinearity
        total = 0.0
        for g in self._chunks():
            val, _ = forms.nonlinear_terms(
                g, variant, self._gather(An, g.idx_c), self._gather(Anp1, g.idx_c), self.lie, jacobian=False
            )
            total += float(np.sum(val * self._gather(v, g.idx_c).reshape(g.size, -1)))
        return total

    def project_initial_constraint(self, A0: np.ndarray, E0: np.ndarray) -> tuple:
        """Smallest curl-norm correction of E0 making the constraint functional vanish.

        Returns (corrected E0, correction norm).
        """
        K = self.constraint_operator(A0)
        Z = dependent_combinations(K, self.Q)
        W = self.Q @ Z.T if len(Z) else np.zeros((self.nL, 0))
        S0 = sp.bmat([[self.Mc, K.T], [K, None]], format="csr")
        rhs0 = np.concatenate([np.zeros(self.nE), -(K @ E0)])

        def solve(W):
            pinned = self.nE + pin_rows(W, self._vertex_lam)
            S, rhs = replace_rows(S0, pinned), rhs0.copy()
            rhs[pinned] = 0.0
            return direct_solve(S, rhs, self.config.solver)

        try:
            sol = solve(W)
        except SingularSystemError:
            sol = solve(left_null_space(K))
        dE = sol[: self.nE]
        return E0 + dE, float(np.sqrt(max(dE @ (self.Mc @ dE), 0.0)))

    def initial_state(self, A0, E0, t0: float = 0.0) -> SchemeState:
        return SchemeState(0, t0, np.asarray(A0, float), np.asarray(E0, float), np.zeros(self.nL))

    def run(self, state: SchemeState, times, forcing=None, callback=None):
        """Advance through ``times`` (t^1, t^2, ...); ``forcing(t_prev, t_next)`` returns
        the (E-rows, lambda-rows) source vectors or None."""
        for t in times:
            f = forcing(state.t, t) if forcing is not None else None
            state, rep = self.step(state, t, f)
            if callback is not None:
                callback(state, rep)
        return state


def _abelian_like(lie: LieAlgebra) -> LieAlgebra:
    return replace(lie, c=np.zeros_like(lie.c))
