from .bounds import (
    BoundConstants,
    DataNorms,
    ExtinctionVerdict,
    apriori_bound,
    default_embedding_constant,
    default_poincare_constant,
    extinction_check,
    measure_data_norms,
    theta_curve,
)
from .convergence import (
    ConvergenceResult,
    SplittingReport,
    convergence_study,
    disk_family,
    fit_slope,
    mesh_family,
    splitting_equivalence,
)
from .examples import disk_charges, disk_problem, disk_setup
from .manufactured import CASE_IDS, ManufacturedCase, consistency_residual, manufactured_case
from .suite import CHECKS, run_invariant_suite

__all__ = [
    'BoundConstants', 'DataNorms', 'ExtinctionVerdict', 'apriori_bound',
    'default_embedding_constant', 'default_poincare_constant', 'extinction_check',
    'measure_data_norms', 'theta_curve',
    'ConvergenceResult', 'SplittingReport', 'convergence_study', 'disk_family', 'fit_slope',
    'mesh_family', 'splitting_equivalence',
    'disk_charges', 'disk_problem', 'disk_setup',
    'CASE_IDS', 'ManufacturedCase', 'consistency_residual', 'manufactured_case',
    'CHECKS', 'run_invariant_suite',
]
