from .pbe_solver import (
    IterationRecord,
    NewtonSettings,
    ReconstructedPotential,
    SolvationEnergy,
    SolveReport,
    SplitSolution,
    coulomb_at_nodes,
    dirichlet_data,
    reconstruct_phi,
    solvation_energy,
    solve_gpbe_regular,
    solve_lgpbe,
    solve_semilinear,
    solve_uH,
)

__all__ = [
    'IterationRecord', 'NewtonSettings', 'ReconstructedPotential', 'SolvationEnergy',
    'SolveReport', 'SplitSolution', 'coulomb_at_nodes', 'dirichlet_data', 'reconstruct_phi',
    'solvation_energy', 'solve_gpbe_regular', 'solve_lgpbe', 'solve_semilinear', 'solve_uH',
]
