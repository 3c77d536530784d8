"""
Sparse symmetric linear algebra: CSR construction and preconditioned CG.

Matrices are scipy.sparse CSR matrices with canonical (sorted, summed)
layout. cg_solve is a plain Jacobi-preconditioned conjugate gradient loop so
that the iteration history and the restart guard stay under our control.
"""

import logging
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.exceptions import AssemblyError, BreakdownError, ConfigurationError

logger = logging.getLogger(__name__)

SparseMatrix = sp.csr_matrix

# A residual larger than this multiple of the best one so far triggers a restart.
RESTART_FACTOR = 10.0
MAX_RESTARTS = 5


@dataclass
class SolveStats:
    """Outcome of one CG solve"""
    iterations: int
    residual: float
    converged: bool
    restarts: int = 0
    history: List[float] = field(default_factory=list)

    def to_dict(self):
        return {
            'iterations': self.iterations,
            'residual': self.residual,
            'converged': self.converged,
            'restarts': self.restarts,
        }


def csr_from_triplets(
    n: int,
    triplets: Union[Iterable[Tuple[int, int, float]], Tuple[np.ndarray, np.ndarray, np.ndarray]],
) -> SparseMatrix:
    """
    Build an n x n CSR matrix, summing duplicate entries.

    Args:
        n: dimension
        triplets: iterable of (row, col, value), or a tuple of three equally
            long arrays (rows, cols, values)
    """
    if isinstance(triplets, tuple) and len(triplets) == 3 and np.ndim(triplets[0]) == 1:
        rows, cols, vals = (np.asarray(a) for a in triplets)
    else:
        entries = list(triplets)
        if entries:
            rows, cols, vals = (np.asarray(a) for a in zip(*entries))
        else:
            rows = cols = np.zeros(0, dtype=int)
            vals = np.zeros(0)
    rows = rows.astype(np.int64)
    cols = cols.astype(np.int64)
    if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
        raise AssemblyError(f"triplet index out of range for dimension {n}")
    matrix = sp.coo_matrix((vals.astype(float), (rows, cols)), shape=(n, n)).tocsr()
    matrix.sum_duplicates()
    matrix.sort_indices()
    return matrix


def cg_solve(
    A: SparseMatrix,
    b: np.ndarray,
    tol: float = 1e-10,
    maxit: Optional[int] = None,
    precond: str = "jacobi",
    x0: Optional[np.ndarray] = None,
) -> Tuple[np.ndarray, SolveStats]:
    """
    Preconditioned conjugate gradients for SPD A.

    Args:
        A: SPD matrix
        b: right-hand side
        tol: relative residual target ||b - Ax|| / ||b||
        maxit: iteration cap (default 10 n)
        precond: 'none' or 'jacobi'
        x0: initial guess (default zero)

    Returns:
        (x, stats). On failure to reach tol, x is the best iterate seen and
        stats.converged is False.
    """
    if not 0 < tol < 1:
        raise ConfigurationError(f"CG tolerance must lie in (0, 1), got {tol}")
    if precond not in ("none", "jacobi"):
        raise ConfigurationError(f"unknown preconditioner '{precond}'")
    b = np.asarray(b, dtype=float)
    n = len(b)
    maxit = 10 * max(n, 1) if maxit is None else maxit

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    b_norm = np.linalg.norm(b)
    if b_norm == 0.0 and x0 is None:
        return x, SolveStats(0, 0.0, True)
    target = tol * (b_norm if b_norm > 0 else 1.0)

    if precond == "jacobi":
        diag = A.diagonal()
        if np.any(diag <= 0):
            raise BreakdownError("nonpositive diagonal entry: matrix is not SPD")
        inv_diag = 1.0 / diag
    else:
        inv_diag = np.ones(n)

    r = b - A @ x
    z = inv_diag * r
    p = z.copy()
    rz = r @ z
    res = np.linalg.norm(r)
    best_x, best_res = x.copy(), res
    history = [res]
    restarts = 0
    k = 0
    while res > target and k < maxit:
        Ap = A @ p
        pAp = p @ Ap
        if not np.isfinite(pAp) or pAp <= 0:
            raise BreakdownError(f"CG breakdown at iteration {k}: p^T A p = {pAp}")
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        res = np.linalg.norm(r)
        k += 1
        if not np.isfinite(res):
            raise BreakdownError(f"non-finite residual at iteration {k}")
        history.append(res)
        if res < best_res:
            best_x, best_res = x.copy(), res
        elif res > RESTART_FACTOR * best_res:
            if restarts >= MAX_RESTARTS:
                logger.warning("CG residual keeps growing, giving up after %d restarts", restarts)
                break
            restarts += 1
            logger.warning("CG residual grew to %.3e (best %.3e), restarting", res, best_res)
            x = best_x.copy()
            r = b - A @ x
            res = np.linalg.norm(r)
            z = inv_diag * r
            p = z.copy()
            rz = r @ z
            continue
        z = inv_diag * r
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new

    converged = best_res <= target
    if not converged:
        logger.warning("CG stopped after %d iterations, residual %.3e > %.3e", k, best_res, target)
    else:
        logger.debug("CG converged in %d iterations, residual %.3e", k, best_res)
    rel = best_res / b_norm if b_norm > 0 else best_res
    return best_x, SolveStats(k, float(rel), bool(converged), restarts, history)
