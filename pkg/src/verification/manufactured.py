"""
Manufactured solutions for the common weak form

    a(u, v) + integral b(x, u + w) v = integral f0 v,   u = u* on the boundary

on the disk geometry (molecule r < r_m, ion exclusion layer r_m < r < r_iel,
ions outside). Data are derived symbolically with sympy and lambdified to
numpy; every callback takes (points, region tags).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import sympy

from src.core_model import IonSpecies, PBEProblem, RegionTag, UnitMode
from src.exceptions import ConfigurationError
from src.fem import apply_dirichlet, assemble_load, assemble_semilinear, assemble_stiffness
from src.linalg import cg_solve
from src.mesh import DiscreteField, Mesh, generate_disk_mesh

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]

CASE_IDS = ("linear_jump", "semilinear_neutral", "semilinear_nonneutral", "linear_exact")

_x, _y = sympy.symbols("x y", real=True)


@dataclass
class ManufacturedCase:
    """
    A problem with known exact solution.

    Args:
        case_id: one of CASE_IDS
        problem: model parameters (synthetic units)
        expressions: sympy expression of u* per region tag
        f0_expressions: sympy expression of f0 per region tag
        r_m, r_iel, half_width: disk geometry
    """
    case_id: str
    problem: PBEProblem
    expressions: Dict[RegionTag, sympy.Expr]
    f0_expressions: Dict[RegionTag, sympy.Expr]
    r_m: float = 1.0
    r_iel: float = 1.5
    half_width: float = 3.0
    description: str = ""
    _compiled: Dict[str, Dict[RegionTag, Callable]] = field(default_factory=dict, repr=False)

    def __post_init__(self):
        grads = {tag: (sympy.diff(e, _x), sympy.diff(e, _y)) for tag, e in self.expressions.items()}
        self._compiled = {
            'u': {tag: sympy.lambdify((_x, _y), e, "numpy") for tag, e in self.expressions.items()},
            'ux': {tag: sympy.lambdify((_x, _y), g[0], "numpy") for tag, g in grads.items()},
            'uy': {tag: sympy.lambdify((_x, _y), g[1], "numpy") for tag, g in grads.items()},
            'f0': {tag: sympy.lambdify((_x, _y), e, "numpy") for tag, e in self.f0_expressions.items()},
        }

    def _piecewise(self, key: str, points: np.ndarray, regions: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        regions = np.asarray(regions)
        out = np.zeros(points.shape[:-1])
        for tag, fn in self._compiled[key].items():
            sel = regions == tag
            if np.any(sel):
                # lambdify returns a scalar for constant expressions
                out[sel] = np.broadcast_to(fn(points[sel][..., 0], points[sel][..., 1]),
                                           out[sel].shape)
        return out

    def exact(self, points: np.ndarray, regions: np.ndarray) -> np.ndarray:
        return self._piecewise('u', points, regions)

    def exact_grad(self, points: np.ndarray, regions: np.ndarray) -> np.ndarray:
        return np.stack([self._piecewise('ux', points, regions),
                         self._piecewise('uy', points, regions)], axis=-1)

    def f0(self, points: np.ndarray, regions: np.ndarray) -> np.ndarray:
        return self._piecewise('f0', points, regions)

    def mesh(self, n: int = 8) -> Mesh:
        return generate_disk_mesh(self.r_m, self.r_iel, self.half_width, n)

    def nodal_exact(self, mesh: Mesh) -> DiscreteField:
        """Interpolant of u*; interface nodes take the molecule branch (both agree there)"""
        tags = np.full(mesh.n_nodes, int(max(RegionTag)))
        np.minimum.at(tags, mesh.triangles.ravel(), np.repeat(mesh.elem_region, 3))
        return DiscreteField(mesh, self.exact(mesh.nodes, tags))

    def dirichlet(self, mesh: Mesh) -> Tuple[np.ndarray, np.ndarray]:
        nodes = mesh.boundary_nodes
        return nodes, self.nodal_exact(mesh).values[nodes]


def _b_symbolic(problem: PBEProblem, t: sympy.Expr) -> sympy.Expr:
    """b(t) = -scale sum_j M_j xi_j exp(-xi_j t)"""
    return -problem.scale * sum(
        (s.concentration * s.valence * sympy.exp(-s.valence * t) for s in problem.species),
        sympy.Integer(0),
    )


def _semilinear_data(problem: PBEProblem, u_star: sympy.Expr) -> Dict[RegionTag, sympy.Expr]:
    eps = {RegionTag.MOLECULE: problem.eps_m, RegionTag.IEL: problem.eps_s.value,
           RegionTag.IONS: problem.eps_s.value}
    laplacian = sympy.diff(u_star, _x, 2) + sympy.diff(u_star, _y, 2)
    data = {}
    for tag, e in eps.items():
        f0 = -e * laplacian
        if tag is RegionTag.IONS:
            f0 = f0 + _b_symbolic(problem, u_star)
        data[tag] = sympy.simplify(f0)
    return data


def manufactured_case(case_id: str, eps_m: float = 2.0, eps_s: float = 80.0,
                      amplitude: float = 0.02, r_m: float = 1.0, r_iel: float = 1.5,
                      half_width: float = 3.0) -> ManufacturedCase:
    """
    Build one of the bundled manufactured problems.

    linear_jump:            u* = r^2/eps_m inside, r^2/eps_s + r_m^2 (1/eps_m - 1/eps_s)
                            outside; continuous with continuous flux, f0 = -4
    semilinear_neutral:     u* = A (r^2 - r_m^2)^2 with a 1:1 electrolyte (M = 1)
    semilinear_nonneutral:  same u* with a single +1 counterion species
    linear_exact:           u* = x + 2y, eps_s = eps_m, no ions (reproduced exactly)
    """
    if case_id not in CASE_IDS:
        raise ConfigurationError(f"unknown manufactured case '{case_id}', expected one of {CASE_IDS}")
    r_sq = _x ** 2 + _y ** 2
    synthetic = dict(unit_mode=UnitMode.SYNTHETIC, eps_m=eps_m)
    tags = (RegionTag.MOLECULE, RegionTag.IEL, RegionTag.IONS)

    if case_id == "linear_jump":
        problem = PBEProblem(eps_s=eps_s, **synthetic)
        outside = r_sq / eps_s + r_m ** 2 * (1.0 / eps_m - 1.0 / eps_s)
        expressions = {RegionTag.MOLECULE: r_sq / eps_m, RegionTag.IEL: outside,
                       RegionTag.IONS: outside}
        f0 = {tag: sympy.Integer(-4) for tag in tags}
        description = "piecewise quadratic with a kink on the interface"
    elif case_id == "linear_exact":
        problem = PBEProblem(eps_s=eps_m, **synthetic)
        expressions = {tag: _x + 2 * _y for tag in tags}
        f0 = {tag: sympy.Integer(0) for tag in tags}
        description = "linear solution reproduced exactly by P1"
    else:
        if case_id == "semilinear_neutral":
            species = (IonSpecies(1.0, 1), IonSpecies(1.0, -1))
        else:
            species = (IonSpecies(1.0, 1),)
        problem = PBEProblem(eps_s=eps_s, species=species, **synthetic)
        u_star = amplitude * (r_sq - r_m ** 2) ** 2
        expressions = {tag: u_star for tag in tags}
        f0 = _semilinear_data(problem, u_star)
        description = f"smooth quartic, {len(species)} ion species"

    logger.debug("Manufactured case %s: %s", case_id, description)
    return ManufacturedCase(case_id, problem, expressions, f0, r_m, r_iel, half_width, description)


def all_cases() -> List[ManufacturedCase]:
    return [manufactured_case(c) for c in CASE_IDS]


def consistency_residual(case: ManufacturedCase, mesh: Mesh) -> float:
    """
    Discrete residual of the interpolant of u* measured in the dual energy
    norm sqrt(R^T A_ff^{-1} R) at the free nodes.
    """
    u = case.nodal_exact(mesh)
    A = assemble_stiffness(mesh, case.problem)
    rhs = assemble_load(mesh, f0=case.f0)
    r_b, _ = assemble_semilinear(mesh, case.problem, u)
    residual = A @ u.values + r_b - rhs
    system = apply_dirichlet(A, residual, case.dirichlet(mesh))
    free_residual = residual[system.free_nodes]
    z, _ = cg_solve(system.matrix, free_residual, tol=1e-12)
    return math.sqrt(max(float(free_residual @ z), 0.0))
