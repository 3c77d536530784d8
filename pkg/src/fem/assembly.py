"""
P1 finite element assembly for the splitting formulations.

Every form works element-wise on the constant P1 gradients of the mesh and
scatters local contributions into scipy CSR matrices or numpy vectors. The
nonlinear terms, Coulomb terms and loads use the 3-point order-2 rule unless
a rule is passed in; error norms use the order-4 rule.

Functions taking data as callables expect the signature
f(points (N, 2), regions (N,)) so that region-wise data follows the
interface-fitted element tags.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, Iterable, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sp

from src.core_model import (
    PBEProblem,
    RegionTag,
    Splitting,
    eval_B,
    eval_B_increment,
    eval_b,
    eval_b_prime,
    linearized_coefficients,
)
from src.coulomb import CoulombField, eval_G, eval_grad_G
from src.exceptions import (
    AssemblyError,
    ConfigurationError,
    DomainError,
    LocationError,
    StepTooLargeError,
)
from src.linalg import SparseMatrix, csr_from_triplets
from src.mesh import DiscreteField, Mesh
from .quadrature import QuadratureRule, get_rule

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray, np.ndarray], np.ndarray]
Coefficient = Union[float, np.ndarray, PBEProblem, PointFunction]


class WMode(str, Enum):
    """Shift w inside the nonlinearity b(x, u + w)"""
    G_FIELD = "G"
    ZERO = "zero"


# --------------------------------------------------------------------------
# helpers


def _scatter_matrix(mesh: Mesh, local: np.ndarray) -> SparseMatrix:
    t = mesh.triangles
    rows = np.broadcast_to(t[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(t[:, None, :], local.shape).ravel()
    return csr_from_triplets(mesh.n_nodes, (rows, cols, local.ravel()))


def _scatter_vector(mesh: Mesh, local: np.ndarray, elements: Optional[np.ndarray] = None) -> np.ndarray:
    t = mesh.triangles if elements is None else mesh.triangles[elements]
    return np.bincount(t.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def quadrature_points(mesh: Mesh, rule: QuadratureRule) -> np.ndarray:
    """(F, q, 2) physical quadrature points"""
    return np.einsum('qk,fkd->fqd', rule.points, mesh.corners)


def _evaluate(function: PointFunction, points: np.ndarray, regions: np.ndarray) -> np.ndarray:
    """Call a point function on (F, q, 2) points; returns (F, q, ...)"""
    shape = points.shape[:2]
    flat = points.reshape(-1, 2)
    tags = np.broadcast_to(regions[:, None], shape).ravel()
    values = np.asarray(function(flat, tags), dtype=float)
    return values.reshape(shape + values.shape[1:])


def field_at_quadrature(u: DiscreteField, rule: QuadratureRule,
                        elements: Optional[np.ndarray] = None) -> np.ndarray:
    """(F, q) values of a P1 field at quadrature points"""
    t = u.mesh.triangles if elements is None else u.mesh.triangles[elements]
    return u.values[t] @ rule.points.T


def element_gradients(u: DiscreteField) -> np.ndarray:
    """(F, 2) constant gradient of a P1 field per triangle"""
    return np.einsum('fk,fkd->fd', u.values[u.mesh.triangles], u.mesh.barycentric_gradients)


def element_permittivity(mesh: Mesh, eps: Coefficient) -> np.ndarray:
    """
    Permittivity per triangle.

    Args:
        eps: a constant, an (F,) array, a PBEProblem (eps_m on Molecule,
            eps_s at the centroid elsewhere) or a point function
    """
    if isinstance(eps, PBEProblem):
        values = np.full(mesh.n_triangles, float(eps.eps_m))
        solvent = mesh.elem_region != RegionTag.MOLECULE
        if np.any(solvent):
            values[solvent] = eps.eps_s.evaluate(mesh.centroids[solvent])
    elif callable(eps):
        values = np.asarray(eps(mesh.centroids, mesh.elem_region), dtype=float)
    elif np.ndim(eps) == 0:
        values = np.full(mesh.n_triangles, float(eps))
    else:
        values = np.asarray(eps, dtype=float)
    if values.shape != (mesh.n_triangles,):
        raise AssemblyError(f"permittivity has shape {values.shape}, expected ({mesh.n_triangles},)")
    if np.any(values <= 0):
        raise AssemblyError("permittivity must be positive on every element")
    return values


# --------------------------------------------------------------------------
# bilinear forms


def assemble_stiffness(mesh: Mesh, eps: Coefficient) -> SparseMatrix:
    """a(u, v) = integral of eps grad u . grad v, eps constant per element"""
    if np.any(mesh.signed_areas <= 1e-14 * mesh.diameter ** 2):
        raise AssemblyError("cannot assemble on a degenerate element")
    coeff = element_permittivity(mesh, eps) * mesh.areas
    grads = mesh.barycentric_gradients
    local = coeff[:, None, None] * np.einsum('fid,fjd->fij', grads, grads)
    return _scatter_matrix(mesh, local)


def assemble_mass(mesh: Mesh, coefficient: Union[float, np.ndarray] = 1.0) -> SparseMatrix:
    """Consistent P1 mass matrix with an element-wise constant weight"""
    weight = np.broadcast_to(np.asarray(coefficient, dtype=float), (mesh.n_triangles,))
    ref = (np.ones((3, 3)) + np.eye(3)) / 12.0
    local = (weight * mesh.areas)[:, None, None] * ref[None, :, :]
    return _scatter_matrix(mesh, local)


# --------------------------------------------------------------------------
# right-hand sides


def coulomb_at_quadrature(mesh: Mesh, field: CoulombField, rule: QuadratureRule,
                          elements: np.ndarray) -> np.ndarray:
    """(F, q) values of G, evaluated only on the selected elements (0 elsewhere)"""
    values = np.zeros((mesh.n_triangles, rule.size))
    if np.any(elements):
        points = quadrature_points(mesh, rule)[elements]
        values[elements] = eval_G(field, points.reshape(-1, 2)).reshape(points.shape[:2])
    return values


def assemble_splitting_rhs(
    mesh: Mesh,
    field: CoulombField,
    splitting: Union[Splitting, str],
    problem: PBEProblem,
    uH: Optional[DiscreteField] = None,
    order: int = 2,
) -> np.ndarray:
    """
    Coulomb right-hand side of the regular component.

    two_term:   integral over the solvent of (eps_m - eps_s) grad G . grad phi_i
    three_term: -integral over the molecule of eps_m grad uH . grad phi_i
                + integral over the solvent of eps_m grad G . grad phi_i
    """
    splitting = Splitting(splitting)
    rule = get_rule(order)
    solvent = mesh.elem_region != RegionTag.MOLECULE
    rhs = np.zeros(mesh.n_nodes)

    if np.any(solvent):
        points = quadrature_points(mesh, rule)[solvent]
        flat = points.reshape(-1, 2)
        grad_G = eval_grad_G(field, flat).reshape(points.shape)
        if splitting is Splitting.TWO_TERM:
            coeff = (problem.eps_m - problem.eps_s.evaluate(flat)).reshape(points.shape[:2])
        else:
            coeff = np.full(points.shape[:2], float(problem.eps_m))
        weights = coeff * rule.weights[None, :] * mesh.areas[solvent, None]
        # grad phi_i is constant per element
        flux = np.einsum('fq,fqd->fd', weights, grad_G)
        local = np.einsum('fd,fid->fi', flux, mesh.barycentric_gradients[solvent])
        rhs += _scatter_vector(mesh, local, solvent)

    if splitting is Splitting.THREE_TERM:
        if uH is None:
            raise ConfigurationError("three-term right-hand side needs the harmonic component uH")
        molecule = ~solvent
        grad_uH = element_gradients(uH)[molecule]
        local = -problem.eps_m * mesh.areas[molecule, None] * np.einsum(
            'fd,fid->fi', grad_uH, mesh.barycentric_gradients[molecule])
        rhs += _scatter_vector(mesh, local, molecule)
    return rhs


def flux_form_rhs(mesh: Mesh, field: CoulombField, problem: PBEProblem) -> np.ndarray:
    """
    Interface-flux form of the two-term right-hand side.

        -integral over Gamma of (eps_m - eps_s) grad G . n phi_i ds
        + integral over the solvent of grad eps_s . grad G phi_i dx

    n points out of the molecule. Two-point Gauss rule on each interface
    edge; the outer-boundary term is omitted, so compare at free nodes only.
    """
    adj = mesh.edge_triangles
    edges = mesh.edges
    inner = adj[:, 1] >= 0
    molecule = mesh.elem_region == RegionTag.MOLECULE
    left, right = adj[inner, 0], adj[inner, 1]
    on_gamma = molecule[left] != molecule[right]
    rhs = np.zeros(mesh.n_nodes)

    gamma_edges = edges[inner][on_gamma]
    mol_tri = np.where(molecule[left[on_gamma]], left[on_gamma], right[on_gamma])
    gauss = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
    for (a, b), f in zip(gamma_edges, mol_tri):
        tri = list(mesh.triangles[f])
        # orient the edge as it appears in the counterclockwise molecule triangle
        if tri[(tri.index(a) + 1) % 3] != b:
            a, b = b, a
        pa, pb = mesh.nodes[a], mesh.nodes[b]
        d = pb - pa
        length = float(np.hypot(*d))
        normal = np.array([d[1], -d[0]]) / length
        points = pa[None, :] + gauss[:, None] * d[None, :]
        flux = (problem.eps_m - problem.eps_s.evaluate(points)) * (eval_grad_G(field, points) @ normal)
        w = 0.5 * length * flux
        rhs[a] -= np.sum(w * (1.0 - gauss))
        rhs[b] -= np.sum(w * gauss)

    grad_eps = problem.eps_s.grad()
    solvent = ~molecule
    if np.any(grad_eps != 0) and np.any(solvent):
        rule = get_rule(2)
        points = quadrature_points(mesh, rule)[solvent]
        grad_G = eval_grad_G(field, points.reshape(-1, 2)).reshape(points.shape)
        values = grad_G @ grad_eps[:2]
        local = (values * rule.weights[None, :] * mesh.areas[solvent, None]) @ rule.points
        rhs += _scatter_vector(mesh, local, solvent)
    return rhs


def assemble_linear_reaction(
    mesh: Mesh,
    problem: PBEProblem,
    field: Optional[CoulombField] = None,
    splitting: Union[Splitting, str] = Splitting.TWO_TERM,
    order: int = 2,
) -> Tuple[SparseMatrix, np.ndarray]:
    """
    Reaction matrix and load of the linearized equation.

    Returns:
        (M, load) with M the m_bar^2-weighted mass matrix on Ions elements and
        load_i = integral of f0 phi_i, where f0 = -m_bar^2 G + ell (two-term)
        or f0 = ell (three-term).
    """
    splitting = Splitting(splitting)
    m_sq, ell = linearized_coefficients(problem, RegionTag.IONS)
    ions = mesh.elem_region == RegionTag.IONS
    weight = np.where(ions, m_sq, 0.0)
    matrix = assemble_mass(mesh, weight)

    rule = get_rule(order)
    f0 = np.where(ions[:, None], ell, 0.0) * np.ones((1, rule.size))
    if splitting is Splitting.TWO_TERM and m_sq != 0.0:
        if field is None:
            raise ConfigurationError("two-term linearized load needs the Coulomb field")
        f0 = f0 - m_sq * coulomb_at_quadrature(mesh, field, rule, ions)
    local = (f0 * rule.weights[None, :] * mesh.areas[:, None]) @ rule.points
    return matrix, _scatter_vector(mesh, local)


def assemble_load(
    mesh: Mesh,
    f0: Optional[PointFunction] = None,
    fvec: Optional[PointFunction] = None,
    order: int = 2,
) -> np.ndarray:
    """load_i = integral of f0 phi_i + f . grad phi_i"""
    rule = get_rule(order)
    load = np.zeros(mesh.n_nodes)
    if f0 is None and fvec is None:
        return load
    points = quadrature_points(mesh, rule)
    scaled = rule.weights[None, :] * mesh.areas[:, None]
    if f0 is not None:
        values = _evaluate(f0, points, mesh.elem_region)
        load += _scatter_vector(mesh, (values * scaled) @ rule.points)
    if fvec is not None:
        values = _evaluate(fvec, points, mesh.elem_region)
        flux = np.einsum('fq,fqd->fd', scaled, values)
        load += _scatter_vector(mesh, np.einsum('fd,fid->fi', flux, mesh.barycentric_gradients))
    return load


# --------------------------------------------------------------------------
# nonlinear term and energy


def w_at_quadrature(
    mesh: Mesh,
    field: Optional[CoulombField],
    w_mode: Union[WMode, str],
    rule: Optional[QuadratureRule] = None,
) -> np.ndarray:
    """(F, q) shift w: G on Ions elements in G mode, zero otherwise"""
    rule = rule or get_rule(2)
    if WMode(w_mode) is WMode.ZERO:
        return np.zeros((mesh.n_triangles, rule.size))
    if field is None:
        raise ConfigurationError("w_mode 'G' needs the Coulomb field")
    return coulomb_at_quadrature(mesh, field, rule, mesh.elem_region == RegionTag.IONS)


def _ion_state(mesh: Mesh, u: np.ndarray, w: Optional[np.ndarray], rule: QuadratureRule):
    ions = mesh.elem_region == RegionTag.IONS
    t = u[mesh.triangles[ions]] @ rule.points.T
    if w is not None:
        t = t + w[ions]
    return ions, t


def assemble_semilinear(
    mesh: Mesh,
    problem: PBEProblem,
    u: DiscreteField,
    w: Optional[np.ndarray] = None,
    rule: Optional[QuadratureRule] = None,
) -> Tuple[np.ndarray, SparseMatrix]:
    """
    Residual and tangent of the nonlinear term.

    Args:
        u: current iterate
        w: (F, q) shift at quadrature points (see w_at_quadrature), None = 0

    Returns:
        (r, T) with r_i = integral of b(x, u + w) phi_i and
        T_ij = integral of b'(x, u + w) phi_i phi_j

    Raises:
        StepTooLargeError: u + w leaves the exponent guard
    """
    rule = rule or get_rule(2)
    ions, t = _ion_state(mesh, u.values, w, rule)
    residual = np.zeros(mesh.n_nodes)
    local_t = np.zeros((mesh.n_triangles, 3, 3))
    if np.any(ions) and problem.species:
        try:
            b = eval_b(problem, RegionTag.IONS, t)
            bp = eval_b_prime(problem, RegionTag.IONS, t)
        except DomainError as exc:
            raise StepTooLargeError(str(exc), species=exc.species) from exc
        scaled = rule.weights[None, :] * mesh.areas[ions, None]
        residual = _scatter_vector(mesh, (b * scaled) @ rule.points, ions)
        local_t[ions] = np.einsum('fq,qi,qj->fij', bp * scaled, rule.points, rule.points)
    return residual, _scatter_matrix(mesh, local_t)


def integral_B(mesh: Mesh, problem: PBEProblem, u: np.ndarray,
               w: Optional[np.ndarray] = None, rule: Optional[QuadratureRule] = None) -> float:
    """integral of B(x, u + w); raises DomainError on overflow"""
    rule = rule or get_rule(2)
    ions, t = _ion_state(mesh, u, w, rule)
    if not np.any(ions) or not problem.species:
        return 0.0
    B = eval_B(problem, RegionTag.IONS, t)
    return float(np.sum(B * rule.weights[None, :] * mesh.areas[ions, None]))


def energy_J(
    mesh: Mesh,
    problem: PBEProblem,
    u: DiscreteField,
    A: SparseMatrix,
    rhs: np.ndarray,
    w: Optional[np.ndarray] = None,
    rule: Optional[QuadratureRule] = None,
) -> float:
    """
    J(u) = 1/2 u^T A u + integral of B(x, u + w) - rhs^T u

    Returns math.inf when B overflows (J is +infinity there).
    """
    values = u.values
    try:
        nonlinear = integral_B(mesh, problem, values, w, rule)
    except DomainError:
        return math.inf
    return float(0.5 * values @ (A @ values) + nonlinear - rhs @ values)


def energy_difference(
    mesh: Mesh,
    problem: PBEProblem,
    u: np.ndarray,
    step: np.ndarray,
    A: SparseMatrix,
    rhs: np.ndarray,
    w: Optional[np.ndarray] = None,
    rule: Optional[QuadratureRule] = None,
) -> float:
    """
    J(u + step) - J(u) without forming either energy.

    The quadratic part is (u + step/2)^T A step; the nonlinear part uses
    eval_B_increment. Returns math.inf if the trial state overflows.
    """
    rule = rule or get_rule(2)
    quadratic = float((u + 0.5 * step) @ (A @ step) - rhs @ step)
    ions, t = _ion_state(mesh, u, w, rule)
    if not np.any(ions) or not problem.species:
        return quadratic
    dt = step[mesh.triangles[ions]] @ rule.points.T
    try:
        inc = eval_B_increment(problem, RegionTag.IONS, t, dt)
    except DomainError:
        return math.inf
    return quadratic + float(np.sum(inc * rule.weights[None, :] * mesh.areas[ions, None]))


def max_abs_b(mesh: Mesh, problem: PBEProblem, u: DiscreteField,
              w: Optional[np.ndarray] = None, rule: Optional[QuadratureRule] = None) -> float:
    """Largest |b(x, u + w)| over all quadrature points"""
    rule = rule or get_rule(2)
    ions, t = _ion_state(mesh, u.values, w, rule)
    if not np.any(ions) or not problem.species:
        return 0.0
    return float(np.max(np.abs(eval_b(problem, RegionTag.IONS, t))))


# --------------------------------------------------------------------------
# Dirichlet elimination


@dataclass
class AssembledSystem:
    """Reduced SPD system on the free nodes plus the eliminated Dirichlet data"""
    matrix: SparseMatrix
    rhs: np.ndarray
    dirichlet_nodes: np.ndarray
    dirichlet_values: np.ndarray
    free_nodes: np.ndarray
    n: int

    def expand(self, u_free: np.ndarray) -> np.ndarray:
        """Full nodal vector with the Dirichlet values reinstated exactly"""
        u = np.empty(self.n)
        u[self.free_nodes] = u_free
        u[self.dirichlet_nodes] = self.dirichlet_values
        return u

    def restrict(self, u: np.ndarray) -> np.ndarray:
        return np.asarray(u)[self.free_nodes]


def _dirichlet_arrays(values) -> Tuple[np.ndarray, np.ndarray]:
    if isinstance(values, dict):
        pairs = list(values.items())
    elif isinstance(values, tuple) and len(values) == 2 and np.ndim(values[0]) == 1:
        pairs = list(zip(np.asarray(values[0]).tolist(), np.asarray(values[1]).tolist()))
    else:
        pairs = [tuple(p) for p in values]
    seen: Dict[int, float] = {}
    for node, g in pairs:
        node, g = int(node), float(g)
        if node in seen and seen[node] != g:
            raise ConfigurationError(f"conflicting Dirichlet values for node {node}: {seen[node]} and {g}")
        seen[node] = g
    nodes = np.array(sorted(seen), dtype=np.int64)
    return nodes, np.array([seen[i] for i in nodes], dtype=float)


def apply_dirichlet(matrix: SparseMatrix, rhs: np.ndarray, values) -> AssembledSystem:
    """
    Symmetric elimination of Dirichlet nodes.

    Args:
        values: {node: g}, a list of (node, g) pairs or a (nodes, values) tuple

    Returns:
        AssembledSystem with A_ff and rhs_f - A_fc g
    """
    n = matrix.shape[0]
    nodes, g = _dirichlet_arrays(values)
    if nodes.size and (nodes.min() < 0 or nodes.max() >= n):
        raise ConfigurationError("Dirichlet node index out of range")
    free = np.setdiff1d(np.arange(n), nodes)
    A = sp.csr_matrix(matrix)
    A_ff = A[free][:, free].tocsr()
    reduced_rhs = np.asarray(rhs, dtype=float)[free] - A[free][:, nodes] @ g
    A_ff.sort_indices()
    return AssembledSystem(A_ff, reduced_rhs, nodes, g, free, n)


# --------------------------------------------------------------------------
# evaluation and norms


def locate(mesh: Mesh, point: np.ndarray, tol: float = 1e-12) -> Tuple[int, np.ndarray]:
    """Triangle containing a point and the barycentric coordinates there"""
    point = np.asarray(point, dtype=float)
    k = min(16, mesh.n_triangles)
    _, candidates = mesh.centroid_tree.query(point, k=k)
    for group in (np.atleast_1d(candidates), np.arange(mesh.n_triangles)):
        p0 = mesh.corners[group, 0]
        grads = mesh.barycentric_gradients[group]
        lam = np.einsum('fkd,fd->fk', grads, point[None, :] - p0)
        lam[:, 0] += 1.0
        inside = np.flatnonzero(np.all(lam >= -tol, axis=1))
        if inside.size:
            i = inside[0]
            return int(group[i]), lam[i]
    raise LocationError(f"point {point} lies outside the mesh")


def point_eval(u: DiscreteField, x) -> Union[float, np.ndarray]:
    """Barycentric interpolation of a P1 field at one point or an (N, 2) array"""
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    values = []
    for p in np.atleast_2d(points):
        f, lam = locate(u.mesh, p)
        values.append(float(lam @ u.values[u.mesh.triangles[f]]))
    return values[0] if single else np.asarray(values)


def field_l2_norm(u: DiscreteField, elements: Optional[np.ndarray] = None, order: int = 2) -> float:
    """L2 norm of a P1 field over the selected elements"""
    rule = get_rule(order)
    mesh = u.mesh
    sel = np.ones(mesh.n_triangles, dtype=bool) if elements is None else elements
    values = field_at_quadrature(u, rule, sel)
    return float(math.sqrt(np.sum(values ** 2 * rule.weights[None, :] * mesh.areas[sel, None])))


def error_norms(
    u: DiscreteField,
    exact: PointFunction,
    exact_grad: PointFunction,
    order: int = 4,
) -> Tuple[float, float]:
    """(||u_h - u*||_L2, ||grad u_h - grad u*||_L2)"""
    mesh = u.mesh
    rule = get_rule(order)
    points = quadrature_points(mesh, rule)
    scaled = rule.weights[None, :] * mesh.areas[:, None]
    diff = field_at_quadrature(u, rule) - _evaluate(exact, points, mesh.elem_region)
    grad_diff = element_gradients(u)[:, None, :] - _evaluate(exact_grad, points, mesh.elem_region)
    l2 = math.sqrt(float(np.sum(diff ** 2 * scaled)))
    h1 = math.sqrt(float(np.sum(np.sum(grad_diff ** 2, axis=2) * scaled)))
    return l2, h1
