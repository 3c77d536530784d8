"""
pbesolve: Main Pipeline
Orchestrates mesh construction, the splitting solve, potential reconstruction
and the solvation energy.
"""

import json
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Union

import numpy as np

from src.core_model import ChargeSystem, PBEProblem, RegionTag, Splitting
from src.coulomb import BoundaryMode, CoulombField
from src.exceptions import ConfigurationError, LocationError, NonConvergenceError
from src.fem import locate
from src.mesh import DiscreteField, Mesh, generate_disk_mesh, refine_times
from src.solver import (
    NewtonSettings,
    ReconstructedPotential,
    SolvationEnergy,
    SplitSolution,
    reconstruct_phi,
    solvation_energy,
    solve_gpbe_regular,
    solve_lgpbe,
)

logger = logging.getLogger(__name__)


@dataclass
class PBEResult:
    """Complete result from the solve pipeline"""
    model: str
    splitting: str
    bc_mode: str
    n_nodes: int
    n_triangles: int
    converged: bool
    iterations: int
    final_residual: float
    max_abs_b: float
    u_max: float
    phi_masked_nodes: int
    energy: Optional[Dict] = None
    warnings: List[str] = field(default_factory=list)
    solution: Optional[SplitSolution] = field(default=None, repr=False, compare=False)
    phi: Optional[ReconstructedPotential] = field(default=None, repr=False, compare=False)

    def to_dict(self):
        return {
            'model': self.model,
            'splitting': self.splitting,
            'bc_mode': self.bc_mode,
            'n_nodes': self.n_nodes,
            'n_triangles': self.n_triangles,
            'converged': self.converged,
            'iterations': self.iterations,
            'final_residual': self.final_residual,
            'max_abs_b': self.max_abs_b,
            'u_max': self.u_max,
            'phi_masked_nodes': self.phi_masked_nodes,
            'energy': self.energy,
            'warnings': self.warnings,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)


class PBEPipeline:
    """
    Solve pipeline for one molecule.

    Pipeline stages:
    1. Mesh (generated disk mesh or a given interface-fitted mesh)
    2. Coulomb field and charge placement checks
    3. Regular component (LGPBE solve or damped Newton on the GPBE)
    4. Retry from the linearized solution if Newton fails
    5. Reconstruction of phi and the solvation energy
    """

    def __init__(
        self,
        problem: PBEProblem,
        charges: ChargeSystem,
        mesh: Optional[Mesh] = None,
        r_m: float = 1.0,
        r_iel: float = 1.5,
        half_width: float = 3.0,
        n: int = 8,
        refinements: int = 0,
        model: str = "gpbe",
        splitting: Union[Splitting, str] = Splitting.TWO_TERM,
        bc_mode: Union[BoundaryMode, str] = BoundaryMode.RESTRICTED_G,
        settings: Optional[NewtonSettings] = None,
        max_retries: int = 1,
    ):
        """
        Initialize the pipeline.

        Args:
            problem: the continuous model
            charges: point charges (two-dimensional positions)
            mesh: interface-fitted mesh; a disk mesh is generated when None
            r_m, r_iel, half_width, n: disk mesh parameters
            refinements: uniform refinements applied to the mesh
            model: 'gpbe' or 'lgpbe'
            max_retries: Newton restarts from the LGPBE solution
        """
        if model not in ("gpbe", "lgpbe"):
            raise ConfigurationError(f"model must be 'gpbe' or 'lgpbe', got '{model}'")
        self.problem = problem
        self.charges = charges
        self.mesh = mesh
        self.disk = (r_m, r_iel, half_width, n)
        self.refinements = refinements
        self.model = model
        self.splitting = Splitting(splitting)
        self.bc_mode = BoundaryMode(bc_mode)
        self.settings = settings or NewtonSettings()
        self.max_retries = max_retries

    def build_mesh(self) -> Mesh:
        mesh = self.mesh if self.mesh is not None else generate_disk_mesh(*self.disk)
        if self.refinements:
            mesh = refine_times(mesh, self.refinements)
        return mesh.validate(self.charges)

    def _charge_warnings(self, mesh: Mesh) -> List[str]:
        """Charges must lie in the molecule for the harmonic component and the energy"""
        outside = []
        for i, position in enumerate(self.charges.positions[:, :2]):
            try:
                f, _ = locate(mesh, position)
                if mesh.elem_region[f] != RegionTag.MOLECULE:
                    outside.append(i)
            except LocationError:
                outside.append(i)
        if outside and self.splitting is Splitting.THREE_TERM:
            raise ConfigurationError(f"charges {outside} are not inside the molecule region")
        return [f"charge {i} lies outside the molecule region" for i in outside]

    def _solve(self, mesh: Mesh, field: CoulombField, init: Optional[DiscreteField] = None):
        if self.model == "lgpbe":
            return solve_lgpbe(self.problem, mesh, field, self.splitting, self.bc_mode, self.settings)
        return solve_gpbe_regular(self.problem, mesh, field, self.splitting, self.bc_mode,
                                  self.settings, init)

    def process(self, verbose: bool = False) -> PBEResult:
        """
        Run every stage.

        Args:
            verbose: Print intermediate results

        Returns:
            PBEResult with the solution objects attached
        """
        if verbose:
            print("=" * 60)
            print("PBESOLVE PIPELINE")
            print("=" * 60)

        # Stage 1: Mesh
        if verbose:
            print("\n[Stage 1] Building mesh...")
        mesh = self.build_mesh()
        if verbose:
            print(f"  {mesh.n_nodes} nodes, {mesh.n_triangles} triangles, "
                  f"h = {mesh.max_edge_length:.4f}")

        # Stage 2: Coulomb field
        if verbose:
            print("\n[Stage 2] Coulomb potential of the fixed charges...")
        field = CoulombField.from_problem(self.charges, self.problem, mesh.diameter)
        outside = self._charge_warnings(mesh)
        warnings = list(outside)
        if verbose:
            print(f"  {len(self.charges)} charges, net valence {self.charges.valences.sum():+g}")

        # Stage 3: Solve
        if verbose:
            print(f"\n[Stage 3] Solving {self.model.upper()} ({self.splitting.value})...")
        try:
            solution = self._solve(mesh, field)
        except NonConvergenceError as exc:
            solution = None
            failure = exc
            if self.max_retries == 0:
                raise

        # Stage 4: Retry from the linearized solution
        retry_count = 0
        while solution is None and retry_count < self.max_retries:
            retry_count += 1
            if verbose:
                print(f"\n[Stage 4] Newton failed ({failure}). Retry {retry_count}/{self.max_retries} "
                      "from the LGPBE solution...")
            warnings.append(f"Newton restarted from the linearized solution: {failure}")
            init = solve_lgpbe(self.problem, mesh, field, self.splitting, self.bc_mode, self.settings).u
            try:
                solution = self._solve(mesh, field, init)
            except NonConvergenceError as exc:
                failure = exc
                if retry_count == self.max_retries:
                    raise

        report = solution.report
        if verbose:
            print(f"  converged: {report.converged}, {report.iterations} iterations, "
                  f"|F| = {report.final_residual:.3e}")

        # Stage 5: Reconstruction and energy
        if verbose:
            print("\n[Stage 5] Reconstructing phi and the solvation energy...")
        phi = reconstruct_phi(solution)
        energy: Optional[SolvationEnergy] = None
        if self.splitting is Splitting.TWO_TERM and not outside:
            energy = solvation_energy(solution, self.charges)
            if verbose:
                print(f"  solvation energy: {energy.value:.8g} kT ({energy.erg:.6g} erg)")
        elif self.splitting is Splitting.THREE_TERM:
            warnings.append("solvation energy needs the two-term splitting")

        return PBEResult(
            model=self.model,
            splitting=self.splitting.value,
            bc_mode=self.bc_mode.value,
            n_nodes=mesh.n_nodes,
            n_triangles=mesh.n_triangles,
            converged=report.converged,
            iterations=report.iterations,
            final_residual=report.final_residual,
            max_abs_b=report.max_abs_b,
            u_max=solution.u.max_abs(),
            phi_masked_nodes=int(np.count_nonzero(phi.masked)),
            energy=energy.to_dict() if energy else None,
            warnings=warnings,
            solution=solution,
            phi=phi,
        )
