"""
Quick invariant suite behind the `verify` command.

Each check returns (passed, detail); failures never raise, they are recorded
in the result table.
"""

import logging
from dataclasses import dataclass
from typing import Callable, Dict, List, Tuple

import numpy as np
import pandas as pd
import scipy.sparse as sp

from src.core_model import (
    IonSpecies,
    PBEProblem,
    RegionTag,
    UnitMode,
    eval_B,
    eval_b,
    eval_b_prime,
)
from src.coulomb import eval_G, eval_grad_G, fd_gradient
from src.exceptions import PBEError
from src.geometry import BallUnion, VoxelGrid, close_mask, dist_to_union, open_mask, rolling_ball_close
from src.linalg import cg_solve
from src.mesh import load_mesh, save_mesh
from src.solver import NewtonSettings, solve_gpbe_regular
from .bounds import apriori_bound, extinction_check, measure_data_norms, theta_curve
from .examples import disk_setup

logger = logging.getLogger(__name__)

Check = Callable[[np.random.Generator], Tuple[bool, str]]


@dataclass
class CheckResult:
    check: str
    passed: bool
    detail: str

    def to_dict(self):
        return {'check': self.check, 'passed': self.passed, 'detail': self.detail}


def _random_problem(rng: np.random.Generator) -> PBEProblem:
    species = [IonSpecies(float(rng.uniform(0.1, 2.0)), int(z)) for z in (1, -1, 2)]
    return PBEProblem(species=species, unit_mode=UnitMode.SYNTHETIC)


def check_monotonicity(rng: np.random.Generator) -> Tuple[bool, str]:
    problem = _random_problem(rng)
    t1, t2 = rng.uniform(-20, 20, size=(2, 10_000))
    lhs = (eval_b(problem, RegionTag.IONS, t1) - eval_b(problem, RegionTag.IONS, t2)) * (t1 - t2)
    worst = float(lhs.min())
    return worst >= 0.0, f"min (b(t1) - b(t2))(t1 - t2) = {worst:.3e}"


def check_derivatives(rng: np.random.Generator) -> Tuple[bool, str]:
    problem = _random_problem(rng)
    t = rng.uniform(-5, 5, size=200)
    h = 1e-6
    fd_B = (eval_B(problem, RegionTag.IONS, t + h) - eval_B(problem, RegionTag.IONS, t - h)) / (2 * h)
    fd_b = (eval_b(problem, RegionTag.IONS, t + h) - eval_b(problem, RegionTag.IONS, t - h)) / (2 * h)
    b = eval_b(problem, RegionTag.IONS, t)
    bp = eval_b_prime(problem, RegionTag.IONS, t)
    err = max(np.max(np.abs(fd_B - b) / np.maximum(np.abs(b), 1.0)),
              np.max(np.abs(fd_b - bp) / np.maximum(np.abs(bp), 1.0)))
    return err <= 1e-6, f"max relative finite-difference error {err:.3e}"


def check_sinh_reduction(rng: np.random.Generator) -> Tuple[bool, str]:
    M = float(rng.uniform(0.1, 3.0))
    problem = PBEProblem(species=(IonSpecies(M, 1), IonSpecies(M, -1)), unit_mode=UnitMode.SYNTHETIC)
    t = rng.uniform(-10, 10, size=1000)
    expected = 2.0 * problem.scale * M * np.sinh(t)
    err = float(np.max(np.abs(eval_b(problem, RegionTag.IONS, t) - expected) / np.maximum(np.abs(expected), 1.0)))
    return err <= 1e-12, f"1:1 electrolyte vs 2 M sinh(t): {err:.3e}"


def check_coulomb_gradient(rng: np.random.Generator) -> Tuple[bool, str]:
    _, _, field = disk_setup("neutral")
    points = rng.uniform(0.6, 2.5, size=(20, 2)) * rng.choice([-1.0, 1.0], size=(20, 2))
    err = 0.0
    for p in points:
        exact = eval_grad_G(field, p)
        err = max(err, float(np.linalg.norm(fd_gradient(field, p) - exact) / np.linalg.norm(exact)))
    return err <= 1e-6, f"analytic vs finite-difference grad G: {err:.3e}"


def check_morphology(rng: np.random.Generator) -> Tuple[bool, str]:
    grid = VoxelGrid(np.zeros(2), 0.05, (128, 128))
    radii = (0.2, 0.4)
    failures = 0
    for _ in range(20):
        n = int(rng.integers(2, 4))
        union = BallUnion(rng.uniform(2.2, 4.2, size=(n, 2)), rng.uniform(0.3, 0.7, size=n))
        inside = dist_to_union(union, grid.points()).reshape(grid.extents) <= 0.0
        closings = [rolling_ball_close(union, r, grid) for r in radii]
        opened = open_mask(inside, radii[0], grid.spacing)
        nested = np.all(opened <= inside) and all(np.all(inside <= c) for c in closings)
        monotone = np.all(closings[0] <= closings[1])
        idempotent = all(np.array_equal(close_mask(c, r, grid.spacing), c)
                         for c, r in zip(closings, radii))
        failures += not (nested and monotone and idempotent)
    return failures == 0, f"{failures} of 20 random unions failed nesting, monotonicity or idempotence"


def check_cg(rng: np.random.Generator) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(20):
        n = int(rng.integers(5, 40))
        B = rng.standard_normal((n, n))
        A = B @ B.T + n * np.eye(n)
        b = rng.standard_normal(n)
        x, _ = cg_solve(sp.csr_matrix(A), b, tol=1e-13)
        exact = np.linalg.solve(A, b)
        worst = max(worst, float(np.max(np.abs(x - exact)) / np.max(np.abs(exact))))
    return worst <= 1e-8, f"max relative deviation from dense solve {worst:.3e}"


def check_mesh_roundtrip(rng: np.random.Generator) -> Tuple[bool, str]:
    _, mesh, _ = disk_setup("neutral")
    text = save_mesh(mesh)
    same = save_mesh(load_mesh(text)) == text
    return same, f"{mesh.n_nodes} nodes, {mesh.n_triangles} triangles"


def check_newton_descent(rng: np.random.Generator) -> Tuple[bool, str]:
    problem, mesh, field = disk_setup("cell_model")
    solution = solve_gpbe_regular(problem, mesh, field, settings=NewtonSettings(maxit=25))
    decrements = solution.report.decrements
    ok = solution.report.converged and all(d < 0 for d in decrements)
    return ok, (f"{solution.report.iterations} iterations, residual "
                f"{solution.report.final_residual:.3e}, max decrement {max(decrements, default=0):.3e}")


def check_linf_bound(rng: np.random.Generator) -> Tuple[bool, str]:
    problem, mesh, field = disk_setup("neutral")
    solution = solve_gpbe_regular(problem, mesh, field)
    bound = apriori_bound(measure_data_norms(problem, mesh, field))
    u_max = solution.u.max_abs()
    levels = np.linspace(0.0, 1.05 * u_max + 1e-12, 43)
    curve = theta_curve(solution.u, levels)
    values = [m for _, m in curve]
    monotone = all(b <= a for a, b in zip(values, values[1:]))
    ok = u_max <= bound.k1 and monotone and values[-1] == 0.0
    return ok, f"||u_h||_inf = {u_max:.4g}, k1 = {bound.k1:.4g}, Theta nonincreasing: {monotone}"


def check_extinction(rng: np.random.Generator) -> Tuple[bool, str]:
    levels = np.linspace(0.0, 2.0, 81)
    curve = [(k, max(0.0, 1.0 - k) ** 3) for k in levels]
    verdict = extinction_check(curve, C=0.06, alpha=1.5, beta=1.5)
    return verdict.passed, verdict.detail


CHECKS: Dict[str, Check] = {
    'b_monotone': check_monotonicity,
    'b_derivatives': check_derivatives,
    'sinh_reduction': check_sinh_reduction,
    'coulomb_gradient': check_coulomb_gradient,
    'morphology_invariants': check_morphology,
    'cg_dense_oracle': check_cg,
    'mesh_roundtrip': check_mesh_roundtrip,
    'newton_energy_descent': check_newton_descent,
    'linf_bound': check_linf_bound,
    'extinction_synthetic': check_extinction,
}


def run_invariant_suite(seed: int = 42, checks: List[str] = None) -> pd.DataFrame:
    """
    Run the invariant checks with a seeded generator.

    Returns:
        DataFrame with columns check, passed, detail
    """
    rng = np.random.default_rng(seed)
    results = []
    for name, fn in CHECKS.items():
        if checks is not None and name not in checks:
            continue
        try:
            passed, detail = fn(rng)
        except PBEError as exc:
            passed, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(passed), detail))
        log = logger.info if passed else logger.warning
        log("%-22s %s  %s", name, "PASS" if passed else "FAIL", detail)
    return pd.DataFrame([r.to_dict() for r in results], columns=['check', 'passed', 'detail'])
