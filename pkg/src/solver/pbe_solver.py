"""
Solution pipeline for the regular component of the potential.

    2-term:  phi = G + u        u solves the GPBE with w = G on the ion region
    3-term:  phi = G + uH + u   uH is harmonic in the molecule and -G outside,
                                u solves the GPBE with w = 0

The nonlinear problem is the minimization of the convex energy
J(u) = 1/2 a(u, u) + integral of B(x, u + w) - <rhs, u>; it is solved by a
damped Newton method whose Armijo line search works on J directly.
"""

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.core_model import (
    ChargeSystem,
    PBEProblem,
    RegionTag,
    Splitting,
    linearized_coefficients,
)
from src.coulomb import BoundaryMode, CoulombField, boundary_data, eval_G
from src.coulomb.potential import SINGULARITY_TOLERANCE
from src.exceptions import (
    ConfigurationError,
    NonConvergenceError,
    StepTooLargeError,
)
from src.fem import (
    WMode,
    apply_dirichlet,
    assemble_linear_reaction,
    assemble_semilinear,
    assemble_splitting_rhs,
    assemble_stiffness,
    energy_J,
    energy_difference,
    max_abs_b,
    point_eval,
    w_at_quadrature,
)
from src.linalg import SolveStats, cg_solve
from src.mesh import DiscreteField, Mesh, extract_submesh

logger = logging.getLogger(__name__)


@dataclass
class NewtonSettings:
    """
    Parameters of the damped Newton iteration.

    Args:
        tol: stop when ||F(u)|| <= tol * (1 + ||rhs||)
        maxit: Newton iteration cap
        armijo_c: sufficient-decrease constant
        backtrack: step reduction factor
        min_step: smallest step length tried before giving up
        cg_tol: relative tolerance of the inner CG solves
        cg_maxit: CG iteration cap (None = 10 n)
        precond: 'jacobi' or 'none'
    """
    tol: float = 1e-10
    maxit: int = 50
    armijo_c: float = 1e-4
    backtrack: float = 0.5
    min_step: float = 1e-12
    cg_tol: float = 1e-12
    cg_maxit: Optional[int] = None
    precond: str = "jacobi"

    def __post_init__(self):
        for name in ("armijo_c", "backtrack"):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise ConfigurationError(f"{name} must lie in (0, 1), got {value}")
        if not self.tol > 0 or self.maxit < 1 or not self.min_step > 0:
            raise ConfigurationError("tol, maxit and min_step must be positive")

    def to_dict(self):
        return asdict(self)


@dataclass
class IterationRecord:
    iteration: int
    residual: float
    energy: float
    step: float = 0.0
    decrement: float = 0.0
    cg_iterations: int = 0


@dataclass
class SolveReport:
    """Iteration history of a solve"""
    method: str
    converged: bool = False
    records: List[IterationRecord] = field(default_factory=list)
    cg: List[SolveStats] = field(default_factory=list)
    final_residual: float = math.nan
    target: float = math.nan
    wall_time: float = 0.0
    max_abs_b: float = math.nan
    settings: Dict[str, Any] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return max(0, len(self.records) - 1)

    @property
    def energies(self) -> List[float]:
        return [r.energy for r in self.records]

    @property
    def decrements(self) -> List[float]:
        return [r.decrement for r in self.records[1:]]

    @property
    def residuals(self) -> List[float]:
        return [r.residual for r in self.records]

    def summary(self, include_timing: bool = True) -> Dict[str, Any]:
        out = {
            'method': self.method,
            'converged': self.converged,
            'iterations': self.iterations,
            'final_residual': self.final_residual,
            'target': self.target,
            'max_abs_b': self.max_abs_b,
            'cg_iterations': sum(s.iterations for s in self.cg),
            'settings': self.settings,
            **self.metadata,
        }
        if include_timing:
            out['wall_time'] = self.wall_time
        return out

    def to_dict(self, include_timing: bool = True):
        return {
            'summary': self.summary(include_timing),
            'records': [asdict(r) for r in self.records],
        }

    def to_json_lines(self, include_timing: bool = True) -> str:
        """One JSON object per iteration followed by a summary object"""
        lines = [json.dumps(asdict(r)) for r in self.records]
        lines.append(json.dumps({'summary': self.summary(include_timing)}))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True, eq=False)
class SplitSolution:
    """
    Solved components of a splitting.

    uH is present only for the three-term splitting, where it equals -G at
    the solvent nodes. G_at_nodes holds the Coulomb potential at each node
    (NaN at a node that coincides with a charge).
    """
    splitting: Splitting
    u: DiscreteField
    uH: Optional[DiscreteField]
    G_at_nodes: np.ndarray
    report: SolveReport
    problem: PBEProblem
    field: CoulombField
    model: str = "gpbe"

    @property
    def mesh(self) -> Mesh:
        return self.u.mesh


@dataclass(frozen=True, eq=False)
class ReconstructedPotential:
    """Full potential phi at the nodes; masked nodes sit on a charge and hold NaN"""
    values: np.ndarray
    masked: np.ndarray
    solution: SplitSolution

    def evaluate(self, points) -> Union[float, np.ndarray]:
        """phi at arbitrary points; raises SingularityError at a charge"""
        regular = point_eval(self.solution.u, points)
        if self.solution.uH is not None:
            regular = regular + point_eval(self.solution.uH, points)
        return regular + eval_G(self.solution.field, points)


@dataclass(frozen=True)
class SolvationEnergy:
    """Electrostatic solvation energy in k_B T units and in erg"""
    value: float
    erg: float
    unit_mode: str

    def to_dict(self):
        return asdict(self)


# --------------------------------------------------------------------------
# helpers


def coulomb_at_nodes(mesh: Mesh, field: CoulombField) -> Tuple[np.ndarray, np.ndarray]:
    """G at every node and the mask of nodes lying on a charge (value NaN there)"""
    positions = field.charges.positions[:, :2]
    active = field.charges.valences != 0
    dist = np.linalg.norm(mesh.nodes[:, None, :] - positions[None, :, :], axis=2)
    masked = np.any(dist[:, active] < SINGULARITY_TOLERANCE * field.length_scale, axis=1)
    values = np.full(mesh.n_nodes, np.nan)
    if np.any(~masked):
        values[~masked] = eval_G(field, mesh.nodes[~masked])
    return values, masked


def _kappa(problem: PBEProblem) -> float:
    m_sq, _ = linearized_coefficients(problem, RegionTag.IONS)
    return math.sqrt(m_sq / problem.eps_s.value)


def dirichlet_data(
    problem: PBEProblem,
    mesh: Mesh,
    field: CoulombField,
    splitting: Union[Splitting, str],
    bc_mode: Union[BoundaryMode, str],
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Boundary values of the regular component.

    Returns (nodes, values): g - G for the two-term splitting, g for the
    three-term splitting, with g from coulomb.boundary_data.
    """
    nodes = mesh.boundary_nodes
    points = mesh.nodes[nodes]
    g = np.asarray(boundary_data(field, bc_mode, points, kappa=_kappa(problem),
                                 eps_s=problem.eps_s.value), dtype=float)
    g = np.broadcast_to(g, (len(nodes),)).copy()
    if Splitting(splitting) is Splitting.TWO_TERM:
        g = g - eval_G(field, points)
    return nodes, g


def _linear_solve(K, rhs, dirichlet, settings: NewtonSettings) -> Tuple[np.ndarray, SolveStats]:
    system = apply_dirichlet(K, rhs, dirichlet)
    x, stats = cg_solve(system.matrix, system.rhs, tol=settings.cg_tol,
                        maxit=settings.cg_maxit, precond=settings.precond)
    return system.expand(x), stats


# --------------------------------------------------------------------------
# solves


def solve_uH(mesh: Mesh, field: CoulombField,
             settings: Optional[NewtonSettings] = None) -> DiscreteField:
    """
    Harmonic component of the three-term splitting.

    Inside the molecule uH is the discrete harmonic function with trace -G
    on the interface; at every other node it equals -G.
    """
    settings = settings or NewtonSettings()
    sub, node_map = extract_submesh(mesh, RegionTag.MOLECULE)
    A = assemble_stiffness(sub, 1.0)
    boundary = sub.boundary_nodes
    trace = -eval_G(field, sub.nodes[boundary])
    values_sub, stats = _linear_solve(A, np.zeros(sub.n_nodes), (boundary, trace), settings)
    if not stats.converged:
        raise NonConvergenceError(
            f"CG did not converge for the harmonic component (residual {stats.residual:.3e})",
            partial=stats,
        )

    values = np.zeros(mesh.n_nodes)
    outside = np.ones(mesh.n_nodes, dtype=bool)
    interior = np.setdiff1d(np.arange(sub.n_nodes), boundary)
    outside[node_map[interior]] = False
    values[outside] = -eval_G(field, mesh.nodes[outside])
    values[node_map] = values_sub
    logger.info("Harmonic component: %d molecule nodes, %d CG iterations",
                sub.n_nodes, stats.iterations)
    return DiscreteField(mesh, values)


def _splitting_rhs(problem, mesh, field, splitting) -> Tuple[np.ndarray, Optional[DiscreteField]]:
    uH = solve_uH(mesh, field) if splitting is Splitting.THREE_TERM else None
    return assemble_splitting_rhs(mesh, field, splitting, problem, uH=uH), uH


def solve_lgpbe(
    problem: PBEProblem,
    mesh: Mesh,
    field: CoulombField,
    splitting: Union[Splitting, str] = Splitting.TWO_TERM,
    bc_mode: Union[BoundaryMode, str] = BoundaryMode.RESTRICTED_G,
    settings: Optional[NewtonSettings] = None,
) -> SplitSolution:
    """Linearized equation: (A + M) u = G-rhs + load, one SPD solve"""
    splitting = Splitting(splitting)
    settings = settings or NewtonSettings()
    start = time.perf_counter()

    A = assemble_stiffness(mesh, problem)
    M, load = assemble_linear_reaction(mesh, problem, field, splitting)
    rhs_G, uH = _splitting_rhs(problem, mesh, field, splitting)
    rhs = rhs_G + load
    K = (A + M).tocsr()
    dirichlet = dirichlet_data(problem, mesh, field, splitting, bc_mode)
    values, stats = _linear_solve(K, rhs, dirichlet, settings)
    if not stats.converged:
        raise NonConvergenceError(
            f"CG did not converge for the linearized problem (residual {stats.residual:.3e})",
            partial=stats,
        )

    u = DiscreteField(mesh, values)
    free = np.setdiff1d(np.arange(mesh.n_nodes), dirichlet[0])
    residual = float(np.linalg.norm((K @ values - rhs)[free]))
    energy = float(0.5 * values @ (K @ values) - rhs @ values)
    report = SolveReport(
        method="lgpbe",
        converged=True,
        records=[IterationRecord(0, residual, energy, cg_iterations=stats.iterations)],
        cg=[stats],
        final_residual=residual,
        target=settings.cg_tol * (1.0 + float(np.linalg.norm(rhs[free]))),
        wall_time=time.perf_counter() - start,
        max_abs_b=0.0,
        settings=settings.to_dict(),
        metadata={'splitting': splitting.value, 'bc_mode': BoundaryMode(bc_mode).value,
                  **problem.to_dict()},
    )
    G_nodes, _ = coulomb_at_nodes(mesh, field)
    logger.info("LGPBE (%s) solved: %d CG iterations", splitting.value, stats.iterations)
    return SplitSolution(splitting, u, uH, G_nodes, report, problem, field, model="lgpbe")


def solve_semilinear(
    problem: PBEProblem,
    mesh: Mesh,
    rhs: np.ndarray,
    dirichlet: Tuple[np.ndarray, np.ndarray],
    w: Optional[np.ndarray] = None,
    settings: Optional[NewtonSettings] = None,
    init: Optional[DiscreteField] = None,
    A=None,
) -> Tuple[DiscreteField, SolveReport]:
    """
    Minimize J(u) = 1/2 u^T A u + integral B(x, u + w) - rhs^T u over the
    nodal vectors with the given Dirichlet values.

    Damped Newton: the step solves (A + T) d = -F with T the tangent of the
    nonlinear term, and is halved until the Armijo condition
    J(u + s d) - J(u) <= c s F.d holds.

    Raises:
        NonConvergenceError: maxit reached or the step underflowed; the
            exception carries the partial SolveReport
    """
    settings = settings or NewtonSettings()
    start = time.perf_counter()
    A = assemble_stiffness(mesh, problem) if A is None else A
    nodes, g = (np.asarray(dirichlet[0], dtype=np.int64), np.asarray(dirichlet[1], dtype=float))
    free = np.setdiff1d(np.arange(mesh.n_nodes), nodes)

    u = np.zeros(mesh.n_nodes) if init is None else init.values.copy()
    u[nodes] = g
    target = settings.tol * (1.0 + float(np.linalg.norm(rhs[free])))
    report = SolveReport(method="newton", target=target, settings=settings.to_dict())

    step_length, decrement, cg_its = 0.0, 0.0, 0
    for k in range(settings.maxit + 1):
        field_u = DiscreteField(mesh, u)
        r_b, T = assemble_semilinear(mesh, problem, field_u, w)
        F = (A @ u + r_b - rhs)[free]
        res = float(np.linalg.norm(F))
        energy = energy_J(mesh, problem, field_u, A, rhs, w)
        report.records.append(IterationRecord(k, res, energy, step_length, decrement, cg_its))
        logger.debug("Newton %2d: |F| = %.3e, J = %.12g, step = %.3g", k, res, energy, step_length)
        if res <= target:
            report.converged = True
            break
        if k == settings.maxit:
            break

        K = (A + T).tocsr()[free][:, free]
        delta_free, stats = cg_solve(K, -F, tol=settings.cg_tol, maxit=settings.cg_maxit,
                                     precond=settings.precond)
        report.cg.append(stats)
        cg_its = stats.iterations
        delta = np.zeros(mesh.n_nodes)
        delta[free] = delta_free
        slope = float(F @ delta_free)

        s = 1.0
        while True:
            decrement = energy_difference(mesh, problem, u, s * delta, A, rhs, w)
            if decrement <= settings.armijo_c * s * slope and decrement < 0:
                break
            s *= settings.backtrack
            if s < settings.min_step:
                report.final_residual = res
                report.wall_time = time.perf_counter() - start
                raise NonConvergenceError(
                    f"line search failed at Newton iteration {k} (|F| = {res:.3e})", partial=report)
            logger.debug("Armijo rejected step, trying s = %.3g", s)
        if s < 1.0:
            logger.warning("Newton iteration %d damped to step %.3g", k, s)
        step_length = s
        u = u + s * delta

    report.final_residual = report.records[-1].residual
    report.wall_time = time.perf_counter() - start
    if not report.converged:
        raise NonConvergenceError(
            f"Newton did not converge in {settings.maxit} iterations "
            f"(|F| = {report.final_residual:.3e} > {target:.3e})", partial=report)
    report.max_abs_b = max_abs_b(mesh, problem, DiscreteField(mesh, u), w)
    logger.info("Newton converged in %d iterations, |F| = %.3e", report.iterations,
                report.final_residual)
    return DiscreteField(mesh, u), report


def _has_active_ions(problem: PBEProblem, mesh: Mesh) -> bool:
    M, _ = problem.species_arrays()
    return bool(np.any(M > 0) and np.any(mesh.elem_region == RegionTag.IONS))


def solve_gpbe_regular(
    problem: PBEProblem,
    mesh: Mesh,
    field: CoulombField,
    splitting: Union[Splitting, str] = Splitting.TWO_TERM,
    bc_mode: Union[BoundaryMode, str] = BoundaryMode.RESTRICTED_G,
    settings: Optional[NewtonSettings] = None,
    init: Optional[DiscreteField] = None,
) -> SplitSolution:
    """
    Regular component of the GPBE solution for either splitting.

    With no active ion species b vanishes and the problem is the linear one
    solved by solve_lgpbe.
    """
    splitting = Splitting(splitting)
    settings = settings or NewtonSettings()
    if not _has_active_ions(problem, mesh):
        logger.info("No active ion species: GPBE reduces to a linear solve")
        return solve_lgpbe(problem, mesh, field, splitting, bc_mode, settings)

    rhs, uH = _splitting_rhs(problem, mesh, field, splitting)
    w_mode = WMode.G_FIELD if splitting is Splitting.TWO_TERM else WMode.ZERO
    w = w_at_quadrature(mesh, field, w_mode)
    dirichlet = dirichlet_data(problem, mesh, field, splitting, bc_mode)
    try:
        u, report = solve_semilinear(problem, mesh, rhs, dirichlet, w, settings, init)
    except NonConvergenceError as exc:
        if isinstance(exc.partial, SolveReport):
            exc.partial.metadata.update(splitting=splitting.value)
        raise
    report.metadata.update({'splitting': splitting.value, 'bc_mode': BoundaryMode(bc_mode).value,
                            **problem.to_dict()})
    G_nodes, _ = coulomb_at_nodes(mesh, field)
    return SplitSolution(splitting, u, uH, G_nodes, report, problem, field, model="gpbe")


def reconstruct_phi(solution: SplitSolution) -> ReconstructedPotential:
    """phi = G + u (two-term) or G + uH + u (three-term) at every node"""
    G, masked = coulomb_at_nodes(solution.mesh, solution.field)
    values = G + solution.u.values
    if solution.uH is not None:
        values = values + solution.uH.values
    if np.any(masked):
        logger.warning("%d nodes coincide with a charge; phi is masked there", int(masked.sum()))
    return ReconstructedPotential(values, masked, solution)


def solvation_energy(solution: SplitSolution,
                     charges: Optional[ChargeSystem] = None) -> SolvationEnergy:
    """
    1/2 sum_i z_i u(x_i) with u the reaction field of the two-term splitting.

    Returns the value in k_B T units and converted to erg.
    """
    if solution.splitting is not Splitting.TWO_TERM:
        raise ConfigurationError(
            "solvation energy needs the two-term reaction field; solve with the two-term "
            "splitting or convert G + uH + u on the molecule first")
    charges = charges or solution.field.charges
    at_charges = np.atleast_1d(point_eval(solution.u, charges.positions[:, :2]))
    value = 0.5 * float(np.sum(charges.valences * at_charges))
    return SolvationEnergy(value, value * solution.problem.thermal_energy,
                           solution.problem.unit_mode.value)
