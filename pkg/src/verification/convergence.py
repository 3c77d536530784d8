"""
Convergence and splitting-equivalence studies over uniformly refined meshes.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Union

import numpy as np
import pandas as pd

from src.core_model import ChargeSystem, PBEProblem, RegionTag, Splitting
from src.coulomb import BoundaryMode, CoulombField
from src.exceptions import ConfigurationError, NonConvergenceError
from src.fem import assemble_load, error_norms, field_l2_norm
from src.mesh import DiscreteField, Mesh, generate_disk_mesh, refine_uniform
from src.solver import NewtonSettings, reconstruct_phi, solve_gpbe_regular, solve_semilinear
from .manufactured import ManufacturedCase

logger = logging.getLogger(__name__)

# Errors below this floor are at solver tolerance; no slope is fitted.
SATURATION_FLOOR = 1e-8

CONVERGENCE_COLUMNS = ["level", "h", "n_nodes", "l2_error", "h1_error", "newton_iterations"]


def mesh_family(base: Mesh, levels: int) -> List[Mesh]:
    """base followed by levels - 1 successive uniform refinements"""
    if levels < 1:
        raise ConfigurationError(f"levels must be >= 1, got {levels}")
    meshes = [base]
    for _ in range(levels - 1):
        meshes.append(refine_uniform(meshes[-1]))
    return meshes


def fit_slope(h: Sequence[float], errors: Sequence[float]) -> float:
    """Least-squares slope of log(error) against log(h)"""
    h = np.asarray(h, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if len(h) < 2 or np.any(errors <= 0):
        return math.nan
    slope, _ = np.polyfit(np.log(h), np.log(errors), 1)
    return float(slope)


@dataclass
class ConvergenceResult:
    """Error table with fitted log-log slopes"""
    case_id: str
    table: pd.DataFrame
    slopes: Dict[str, float] = field(default_factory=dict)
    saturated: bool = False

    def to_dict(self):
        return {
            'case_id': self.case_id,
            'rows': self.table.to_dict(orient='records'),
            'slopes': self.slopes,
            'saturated': self.saturated,
        }


def _solve_level(case: ManufacturedCase, mesh: Mesh, level: int,
                 settings: NewtonSettings) -> Dict[str, float]:
    rhs = assemble_load(mesh, f0=case.f0, order=4)
    u, report = solve_semilinear(case.problem, mesh, rhs, case.dirichlet(mesh), settings=settings)
    l2, h1 = error_norms(u, case.exact, case.exact_grad)
    logger.info("%s level %d: h = %.4f, L2 = %.3e, H1 = %.3e", case.case_id, level,
                mesh.max_edge_length, l2, h1)
    return {
        'level': level,
        'h': mesh.max_edge_length,
        'n_nodes': mesh.n_nodes,
        'l2_error': l2,
        'h1_error': h1,
        'newton_iterations': report.iterations,
    }


def convergence_study(
    case: ManufacturedCase,
    levels: int = 4,
    n: int = 8,
    settings: Optional[NewtonSettings] = None,
    threads: int = 1,
    meshes: Optional[Sequence[Mesh]] = None,
) -> ConvergenceResult:
    """
    Solve a manufactured case on a family of refined meshes.

    Args:
        case: the manufactured problem
        levels: number of meshes (coarsest plus levels - 1 refinements)
        n: angular resolution of the coarsest disk mesh
        threads: mesh levels solved concurrently
        meshes: explicit mesh family (overrides levels and n)

    Raises:
        NonConvergenceError: a level failed; `partial` holds the rows solved
            before the failing level
    """
    settings = settings or NewtonSettings()
    meshes = list(meshes) if meshes is not None else mesh_family(case.mesh(n), levels)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(_solve_level, case, m, i, settings) for i, m in enumerate(meshes)]
        rows = []
        for i, future in enumerate(futures):
            try:
                rows.append(future.result())
            except NonConvergenceError as exc:
                partial = pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)
                raise NonConvergenceError(
                    f"convergence study of {case.case_id} aborted at level {i}: {exc}",
                    partial=partial) from exc

    table = pd.DataFrame(rows, columns=CONVERGENCE_COLUMNS)
    saturated = bool(np.all(table[["l2_error", "h1_error"]].to_numpy() < SATURATION_FLOOR))
    if saturated:
        slopes = {'l2': math.nan, 'h1': math.nan}
    else:
        slopes = {'l2': fit_slope(table["h"], table["l2_error"]),
                  'h1': fit_slope(table["h"], table["h1_error"])}
        errors = table["l2_error"].to_numpy()
        if np.any(np.diff(errors) >= 0):
            logger.warning("%s: L2 error does not decrease monotonically", case.case_id)
    return ConvergenceResult(case.case_id, table, slopes, saturated)


# --------------------------------------------------------------------------
# splitting equivalence


SPLITTING_COLUMNS = ["level", "h", "n_nodes", "phi_solvent_rel_diff", "molecule_rel_diff",
                     "newton_two_term", "newton_three_term"]


@dataclass
class SplittingReport:
    """Per-level differences between the two- and three-term reconstructions"""
    table: pd.DataFrame
    decreasing: bool
    factors: List[float]

    @property
    def final_difference(self) -> float:
        return float(self.table["phi_solvent_rel_diff"].iloc[-1])

    def to_dict(self):
        return {
            'rows': self.table.to_dict(orient='records'),
            'decreasing': self.decreasing,
            'factors': self.factors,
        }


def _relative_l2(diff: np.ndarray, reference: np.ndarray, mesh: Mesh, elements: np.ndarray) -> float:
    num = field_l2_norm(DiscreteField(mesh, diff), elements)
    den = field_l2_norm(DiscreteField(mesh, reference), elements)
    return num / den if den > 0 else num


def _compare_splittings(problem: PBEProblem, mesh: Mesh, field: CoulombField, level: int,
                        bc_mode: BoundaryMode, settings: NewtonSettings) -> Dict[str, float]:
    two = solve_gpbe_regular(problem, mesh, field, Splitting.TWO_TERM, bc_mode, settings)
    three = solve_gpbe_regular(problem, mesh, field, Splitting.THREE_TERM, bc_mode, settings)
    phi_two = np.nan_to_num(reconstruct_phi(two).values)
    phi_three = np.nan_to_num(reconstruct_phi(three).values)
    solvent = mesh.elem_region != RegionTag.MOLECULE

    # on the molecule G cancels: phi_two - phi_three = u_two - uH - u_three
    regular_gap = two.u.values - three.uH.values - three.u.values
    return {
        'level': level,
        'h': mesh.max_edge_length,
        'n_nodes': mesh.n_nodes,
        'phi_solvent_rel_diff': _relative_l2(phi_two - phi_three, phi_two, mesh, solvent),
        'molecule_rel_diff': _relative_l2(regular_gap, two.u.values, mesh, ~solvent),
        'newton_two_term': two.report.iterations,
        'newton_three_term': three.report.iterations,
    }


def splitting_equivalence(
    problem: PBEProblem,
    charges: ChargeSystem,
    meshes: Sequence[Mesh],
    bc_mode: Union[BoundaryMode, str] = BoundaryMode.RESTRICTED_G,
    settings: Optional[NewtonSettings] = None,
    threads: int = 1,
) -> SplittingReport:
    """
    Solve with both splittings on every mesh and compare the reconstructed
    potentials on the solvent region.
    """
    settings = settings or NewtonSettings()
    bc_mode = BoundaryMode(bc_mode)
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = []
        for i, mesh in enumerate(meshes):
            field = CoulombField.from_problem(charges, problem, mesh.diameter)
            futures.append(pool.submit(_compare_splittings, problem, mesh, field, i, bc_mode, settings))
        rows = [f.result() for f in futures]

    table = pd.DataFrame(rows, columns=SPLITTING_COLUMNS)
    diffs = table["phi_solvent_rel_diff"].to_numpy()
    factors = [float(a / b) if b > 0 else math.inf for a, b in zip(diffs[:-1], diffs[1:])]
    decreasing = bool(np.all(np.diff(diffs) < 0)) if len(diffs) > 1 else True
    if not decreasing:
        logger.warning("splitting difference does not decrease under refinement: %s", diffs)
    return SplittingReport(table, decreasing, factors)


def disk_family(r_m: float = 1.0, r_iel: float = 1.5, half_width: float = 3.0,
                n: int = 8, levels: int = 3) -> List[Mesh]:
    return mesh_family(generate_disk_mesh(r_m, r_iel, half_width, n), levels)
