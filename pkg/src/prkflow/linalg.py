"""Stage-operator assembly and sparse linear solves.

Stage systems have the form (I - coeff * P * D_h) over the 3N-dimensional
stacked field, where P is a per-node 3x3 block operator and D_h the scalar
Laplacian applied blockwise.  The matrix is nonsymmetric (tangential
projector and cross term), with <= 15 bands in 2-D.  Sparse storage is
compressed-row with sorted columns; the matvec order is deterministic, so
repeated runs are bit-identical.

Solvers: Jacobi-preconditioned BiCGStab (default), restarted GMRES, and a
sparse direct factorization.  Every successful solve is verified against the
true residual ||A x - b||_2 <= max(rel_tol ||b||_2, abs_tol); iterative
solvers restart from the current iterate when the recursively updated
residual has drifted.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse
import scipy.sparse.linalg as spla

from .field import projector_blocks
from .grid import laplacian

__all__ = [
    "SolverConfig",
    "NonConvergenceError",
    "BreakdownError",
    "StageOperatorTemplate",
    "stage_template",
    "assemble_stage_operator",
    "solve",
]


class NonConvergenceError(RuntimeError):
    """Iteration budget exhausted; carries the best iterate and its residual."""

    def __init__(self, best, residual, iterations):
        super().__init__(f"linear solver did not converge: residual {residual:.3e} "
                         f"after {iterations} iterations")
        self.best = best
        self.residual = residual
        self.iterations = iterations


class BreakdownError(RuntimeError):
    """Krylov recurrence broke down (scipy reported an illegal state)."""


@dataclass(frozen=True)
class SolverConfig:
    method: str = "bicgstab"          # bicgstab | gmres | direct
    rel_tol: float = 1e-11
    abs_tol: float = 1e-14
    max_iters: int = 0                # 0 -> 10 * sqrt(N)
    restart: int = 60                 # gmres restart length
    jacobi: bool = True               # diagonal preconditioning for bicgstab

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.method not in ("bicgstab", "gmres", "direct"):
            raise ValueError(f"unknown method {self.method!r}")

    def iteration_budget(self, n):
        return self.max_iters if self.max_iters > 0 else max(100, int(10 * np.sqrt(n)))


class StageOperatorTemplate:
    """Precomputed sparsity pattern of I - coeff * blocks * D for one Laplacian.

    The 3x3 block structure over a fixed D pattern is itself fixed; assembly
    reduces to filling the CSR data array with gathered products, which keeps
    the per-step cost linear in the nonzero count.
    """

    def __init__(self, d_matrix):
        n = d_matrix.shape[0]
        # inject explicit zero diagonal entries so every row (including the
        # empty rows of Dirichlet-fixed nodes) owns an identity slot
        coo = d_matrix.tocoo()
        d = sparse.csr_matrix(
            (np.concatenate([coo.data, np.zeros(n)]),
             (np.concatenate([coo.row, np.arange(n)]),
              np.concatenate([coo.col, np.arange(n)]))),
            shape=(n, n))
        d.sum_duplicates()
        d.sort_indices()
        self.n = n
        self.d_data = d.data.copy()
        nnz = d.nnz
        big_indptr = np.zeros(3 * n + 1, dtype=np.int64)
        slot_d = np.empty(9 * nnz, dtype=np.int64)
        slot_l = np.empty(9 * nnz, dtype=np.int64)
        slot_m = np.empty(9 * nnz, dtype=np.int64)
        slot_row = np.empty(9 * nnz, dtype=np.int64)
        big_indices = np.empty(9 * nnz, dtype=np.int32)
        pos = 0
        d_slots = np.arange(nnz)
        # build row by row in block order: big row (l, i) concatenates the three
        # column blocks m = 0, 1, 2 of D's row i (columns ascending within a row)
        start = d.indptr[:-1]
        stop = d.indptr[1:]
        for l in range(3):
            for i in range(n):
                for m in range(3):
                    a, b = start[i], stop[i]
                    k = b - a
                    sl = slice(pos, pos + k)
                    slot_d[sl] = d_slots[a:b]
                    slot_l[sl] = l
                    slot_m[sl] = m
                    slot_row[sl] = i
                    big_indices[sl] = d.indices[a:b] + m * n
                    pos += k
                big_indptr[l * n + i + 1] = pos
        self.big_indptr = big_indptr
        self.big_indices = big_indices
        self.slot_d = slot_d
        self.slot_l = slot_l
        self.slot_m = slot_m
        self.slot_row = slot_row
        # identity slots: block m == l, column == row
        diag_cols = self.big_indices == (slot_m * n + slot_row)
        self.diag_slots = np.nonzero(diag_cols & (slot_l == slot_m))[0]
        if self.diag_slots.size != 3 * n:
            raise ValueError("Laplacian pattern lacks diagonal entries")

    def assemble(self, blocks, coeff):
        """CSR matrix I - coeff * blocks * D for per-node blocks (3, 3, N)."""
        data = -coeff * blocks[self.slot_l, self.slot_m, self.slot_row] * self.d_data[self.slot_d]
        data[self.diag_slots] += 1.0
        mat = sparse.csr_matrix((data, self.big_indices, self.big_indptr),
                                shape=(3 * self.n, 3 * self.n))
        return mat


def stage_template(lap):
    """Template for a DiscreteLaplacian, memoized on the instance."""
    tmpl = getattr(lap, "_stage_template", None)
    if tmpl is None:
        tmpl = StageOperatorTemplate(lap.matrix)
        lap._stage_template = tmpl
    return tmpl


def assemble_stage_operator(grid, Mdir, coeff, params):
    """I - coeff * P(Mdir) * D_h over the stacked field (3N x 3N, CSR)."""
    lap = laplacian(grid)
    blocks = projector_blocks(Mdir, params)
    return stage_template(lap).assemble(blocks, coeff)


def _true_residual(A, x, rhs):
    return float(np.linalg.norm(A @ x - rhs))


def solve(A, rhs, cfg=None):
    """Solve A x = rhs; returns (x, iterations, residual).

    The returned residual is the true 2-norm residual, checked against
    max(rel_tol * ||rhs||, abs_tol).  Raises NonConvergenceError (with best
    iterate) or BreakdownError.
    """
    if cfg is None:
        cfg = SolverConfig()
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if A.shape != (n, n):
        raise ValueError("system must be square and match the rhs")
    target = max(cfg.rel_tol * np.linalg.norm(rhs), cfg.abs_tol)

    if cfg.method == "direct":
        lu = spla.splu(A.tocsc())
        x = lu.solve(rhs)
        return x, 1, _true_residual(A, x, rhs)

    budget = cfg.iteration_budget(n)
    precond = None
    if cfg.method == "bicgstab" and cfg.jacobi:
        diag = A.diagonal()
        if np.abs(diag).min() == 0.0:
            raise BreakdownError("zero diagonal entry; Jacobi preconditioner unusable")
        inv_diag = 1.0 / diag
        precond = spla.LinearOperator(A.shape, matvec=lambda v: inv_diag * v)

    x = None
    total_iters = 0
    for _ in range(4):
        iters = [0]

        if cfg.method == "bicgstab":
            def cb(_xk):
                iters[0] += 1
            x, info = spla.bicgstab(A, rhs, x0=x, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                                    maxiter=budget, M=precond, callback=cb)
        else:
            def cb(_rk):
                iters[0] += 1
            outer = max(1, budget // cfg.restart)
            x, info = spla.gmres(A, rhs, x0=x, rtol=cfg.rel_tol, atol=cfg.abs_tol,
                                 restart=cfg.restart, maxiter=outer,
                                 callback=cb, callback_type="pr_norm")
        total_iters += iters[0]
        if info < 0:
            raise BreakdownError(f"solver breakdown (scipy info={info})")
        resid = _true_residual(A, x, rhs)
        if resid <= target:
            return x, total_iters, resid
    raise NonConvergenceError(x, resid, total_iters)
