from .sparse import SolveStats, SparseMatrix, cg_solve, csr_from_triplets

__all__ = ['SolveStats', 'SparseMatrix', 'cg_solve', 'csr_from_triplets']
