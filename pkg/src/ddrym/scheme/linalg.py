"""Sparse linear algebra for the Newton solves: direct solve, static condensation, pinning."""

from __future__ import annotations

import ctypes.util
import glob
import os
import sys
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla


class SingularSystemError(np.linalg.LinAlgError):
    pass


SOLVERS = ("auto", "superlu", "pardiso")
_RESIDUAL_CHECK = 1e-8


def _pardiso():
    """The optional pypardiso module, or None when it (or MKL) is unavailable."""
    if "PYPARDISO_MKL_RT" not in os.environ and ctypes.util.find_library("mkl_rt") is None:
        for root in (sys.prefix, "/usr/local", "/usr"):
            hits = sorted(glob.glob(f"{root}/lib*/libmkl_rt.so*"), key=len)
            if hits:
                os.environ["PYPARDISO_MKL_RT"] = hits[0]
                break
    try:
        import pypardiso
    except (ImportError, OSError):
        return None
    return pypardiso


def resolve_solver(name: str = "auto") -> str:
    """Concrete backend for a solver name; ``auto`` prefers PARDISO when installed."""
    if name not in SOLVERS:
        raise ValueError(f"unknown linear solver {name!r}")
    if name == "auto":
        return "pardiso" if _pardiso() is not None else "superlu"
    if name == "pardiso" and _pardiso() is None:
        raise ImportError("the pardiso backend needs the pypardiso package and MKL")
    return name


class Factorized:
    """Reusable sparse LU factorization.

    SuperLU uses a fixed COLAMD column ordering and reports exactly singular
    factors.  PARDISO perturbs tiny pivots instead, so its solves are checked
    for backward stability whenever pivots were perturbed.  Passing a released
    PARDISO factorization of a matrix with the same pattern as ``reuse`` skips
    the reordering and symbolic analysis.
    """

    def __init__(self, A, solver: str = "superlu", reuse: "Factorized | None" = None):
        self.solver = resolve_solver(solver)
        self.A = sp.csr_matrix(A)
        self._norm = spla.norm(self.A, np.inf)
        if self.solver == "pardiso":
            self.A.sort_indices()
            if np.diff(self.A.indptr).min(initial=1) == 0:
                raise SingularSystemError("matrix has an empty row")
            if reuse is not None and reuse.same_pattern(self.A):
                self.lu = reuse.lu
                reuse.lu = None
                phase = 22
            else:
                self.lu = _pardiso().PyPardisoSolver()
                phase = 12
            self.lu.set_iparm(12, 0)
            self.lu.set_phase(phase)
            try:
                self.lu._call_pardiso(self.A, np.zeros(self.A.shape[0]))
            except Exception as exc:
                raise SingularSystemError(str(exc)) from exc
        else:
            try:
                self.lu = spla.splu(sp.csc_matrix(A), permc_spec="COLAMD")
            except RuntimeError as exc:
                raise SingularSystemError(str(exc)) from exc

    def same_pattern(self, A: sp.csr_matrix) -> bool:
        return (
            self.solver == "pardiso"
            and self.lu is not None
            and self.A.shape == A.shape
            and self.A.nnz == A.nnz
            and np.array_equal(self.A.indptr, A.indptr)
            and np.array_equal(self.A.indices, A.indices)
        )

    def solve(self, b: np.ndarray) -> np.ndarray:
        if self.solver == "pardiso":
            self.lu.set_phase(33)
            x = self.lu._call_pardiso(self.A, np.ascontiguousarray(b, dtype=float))
            perturbed = self.lu.get_iparm(14) > 0
        else:
            x = self.lu.solve(b)
            perturbed = False
        if not np.all(np.isfinite(x)):
            raise SingularSystemError("non-finite solution of the linear system")
        if perturbed:
            # normwise backward error; perturbed pivots signal a singular matrix
            scale = self._norm * np.abs(x).max() + np.abs(b).max()
            if np.abs(self.A @ x - b).max() > _RESIDUAL_CHECK * max(scale, 1e-300):
                raise SingularSystemError("linear system is numerically singular")
        return x

    def free(self):
        """Release the factors; a PARDISO analysis stays available for ``reuse``."""
        if self.solver == "pardiso" and self.lu is not None:
            self.lu.free_memory(everything=False)


def direct_solve(A, b: np.ndarray, solver: str = "superlu") -> np.ndarray:
    """One-off sparse direct solve."""
    F = Factorized(A, solver)
    try:
        return F.solve(b)
    finally:
        F.free()


class SparsityPattern:
    """Fixed CSR pattern of a matrix assembled from dense local blocks.

    ``blocks`` is a list of (B, n) arrays of global indices; block b of a group
    contributes an (n x n) dense matrix on those indices.
    """

    def __init__(self, blocks, shape):
        self.shape = shape
        keys = []
        for idx in blocks:
            r = np.repeat(idx, idx.shape[1], axis=1)
            c = np.tile(idx, (1, idx.shape[1]))
            keys.append((r.astype(np.int64) * shape[1] + c).ravel())
        keys = np.concatenate(keys) if keys else np.zeros(0, dtype=np.int64)
        uniq, inv = np.unique(keys, return_inverse=True)
        self.map = inv.astype(np.int64)
        self.nnz = len(uniq)
        rows = uniq // shape[1]
        self.indices = (uniq % shape[1]).astype(np.int32)
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(self.indptr, rows + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.sizes = [idx.size * idx.shape[1] for idx in blocks]

    def assemble(self, values) -> sp.csr_matrix:
        """Sum local block values (list aligned with ``blocks``, each (B, n, n)) into CSR."""
        v = np.concatenate([np.asarray(x).ravel() for x in values])
        data = np.bincount(self.map, weights=v, minlength=self.nnz)
        return sp.csr_matrix((data, self.indices, self.indptr), shape=self.shape)


def replace_rows(A: sp.csr_matrix, rows) -> sp.csr_matrix:
    """Replace the given rows of A by the corresponding identity rows.

    The sparsity pattern is kept whenever the diagonal entries are stored.
    """
    rows = np.asarray(rows, dtype=int)
    if len(rows) == 0:
        return A
    A = sp.csr_matrix(A, copy=True)
    counts = np.diff(A.indptr)
    row_of = np.repeat(np.arange(A.shape[0]), counts)
    hit = np.zeros(A.shape[0], dtype=bool)
    hit[rows] = True
    mask = hit[row_of]
    A.data[mask] = 0.0
    diag = mask & (A.indices == row_of)
    A.data[diag] = 1.0
    missing = np.setdiff1d(rows, row_of[diag])
    if len(missing):
        A = (A + sp.csr_matrix((np.ones(len(missing)), (missing, missing)), shape=A.shape)).tocsr()
    return A


def dependent_combinations(C: sp.spmatrix, Q: np.ndarray, rtol: float = 1e-10) -> np.ndarray:
    """Combinations z of the columns of Q such that (Q z)^T C vanishes.

    Returns the coefficients (r, m) of the numerically dependent row
    combinations, using the SVD of Q^T C.
    """
    if Q.shape[1] == 0:
        return np.zeros((0, 0))
    QC = np.asarray((C.T @ Q).T)
    u, s, _ = np.linalg.svd(QC, full_matrices=False)
    ref = spla.norm(C, np.inf) * np.linalg.norm(Q, axis=0).max()
    if ref == 0:
        return np.eye(Q.shape[1])
    return u[:, s <= rtol * ref].T


def pin_rows(W: np.ndarray, candidates: np.ndarray) -> np.ndarray:
    """Rows to pin for the dependent directions spanned by the columns of ``W``.

    Pivoted QR on the candidate rows picks a set on which W is invertible.
    """
    if W.shape[1] == 0:
        return np.zeros(0, dtype=int)
    _, _, piv = sla.qr(W[candidates].T, mode="economic", pivoting=True)
    return np.sort(candidates[piv[: W.shape[1]]])


def left_null_space(C: sp.spmatrix, rtol: float = 1e-10, max_dense: int = 8000) -> np.ndarray:
    """Orthonormal basis (columns) of the numerical left null space of C."""
    if C.shape[0] > max_dense:
        raise SingularSystemError("singular system too large for a dense null-space search")
    u, s, _ = np.linalg.svd(C.toarray(), full_matrices=True)
    ref = s[0] if len(s) else 0.0
    rank = int(np.sum(s > rtol * ref)) if ref > 0 else 0
    return u[:, rank:]


def grad_components(idx_groups, n: int) -> np.ndarray:
    """Connected components of X_grad DOFs linked through shared cells."""
    rows, cols = [], []
    for idx in idx_groups:
        rows.append(idx[:, :-1].ravel())
        cols.append(idx[:, 1:].ravel())
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    G = sp.coo_matrix((np.ones(len(r)), (r, c)), shape=(n, n))
    return csgraph.connected_components(G, directed=False)[1]


@dataclass
class Condensed:
    """Schur complement of a system on the skeleton unknowns."""

    skeleton: np.ndarray
    interior: np.ndarray
    S: sp.csr_matrix
    Kinv: sp.csr_matrix
    A_si: sp.csr_matrix
    A_is: sp.csr_matrix

    def reduce(self, b: np.ndarray) -> np.ndarray:
        """Condensed right-hand side."""
        return b[self.skeleton] - self.A_si @ (self.Kinv @ b[self.interior])

    def recover(self, x_s: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Full solution from the skeleton solution and the original right-hand side."""
        x = np.zeros(len(self.skeleton) + len(self.interior))
        x[self.skeleton] = x_s
        x[self.interior] = self.Kinv @ (b[self.interior] - self.A_is @ x_s)
        return x


def static_condense(A: sp.csr_matrix, interior_blocks: list, block_inverses: list) -> Condensed:
    """Eliminate cell-interior unknowns.

    ``interior_blocks`` lists (B, m) arrays of global interior indices and
    ``block_inverses`` the matching (B, m, m) inverses of the interior-interior
    blocks.
    """
    n = A.shape[0]
    if interior_blocks:
        interior = np.concatenate([ib.ravel() for ib in interior_blocks])
    else:
        interior = np.zeros(0, dtype=int)
    mask = np.ones(n, dtype=bool)
    mask[interior] = False
    skeleton = np.flatnonzero(mask)
    ni = len(interior)
    # block-diagonal inverse in the interior numbering
    rows, cols, vals = [], [], []
    off = 0
    for ib, inv in zip(interior_blocks, block_inverses):
        B, m = ib.shape
        loc = off + np.arange(B * m).reshape(B, m)
        rows.append(np.repeat(loc, m, axis=1).ravel())
        cols.append(np.tile(loc, (1, m)).ravel())
        vals.append(inv.ravel())
        off += B * m
    if ni:
        Kinv = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(ni, ni))
    else:
        Kinv = sp.csr_matrix((0, 0))
    A = A.tocsr()
    A_ss = A[skeleton][:, skeleton]
    A_si = A[skeleton][:, interior].tocsr()
    A_is = A[interior][:, skeleton].tocsr()
    S = (A_ss - A_si @ (Kinv @ A_is)).tocsr()
    return Condensed(skeleton, interior, S, Kinv, A_si, A_is)


class FrozenSystem:
    """Factorized Newton matrix with pinned rows, optionally condensed, reusable across solves."""

    def __init__(self, A: sp.csr_matrix, pinned=(), interior=None, solver: str = "superlu", reuse=None):
        self.pinned = np.asarray(pinned, dtype=int)
        A = replace_rows(A, self.pinned)
        previous = reuse.F if reuse is not None else None
        if interior is not None:
            blocks = [b for b, _ in interior]
            invs = [i for _, i in interior]
            self.cond = static_condense(A, blocks, invs)
            self.F = Factorized(self.cond.S, solver, previous)
        else:
            self.cond = None
            self.F = Factorized(A, solver, previous)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        rhs = np.array(rhs, dtype=float)
        rhs[self.pinned] = 0.0
        if self.cond is None:
            return self.F.solve(rhs)
        return self.cond.recover(self.F.solve(self.cond.reduce(rhs)), rhs)

    def free(self):
        self.F.free()
