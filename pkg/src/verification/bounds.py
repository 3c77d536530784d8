"""
L-infinity diagnostics based on level-set truncation.

theta_curve measures Theta(k) = |{x : |u_h(x)| > k}| exactly for a P1 field,
apriori_bound turns data norms into the explicit bound k1 >= ||u||_inf, and
extinction_check tests the decay inequality

    Theta(t) <= C Theta(k)^beta / (t - k)^alpha      for k0 <= k < t

together with the predicted extinction level k0 + t_e.
"""

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from src.core_model import PBEProblem, RegionTag, eval_b
from src.coulomb import CoulombField, eval_grad_G
from src.exceptions import DataError, InfeasibleExponentError
from src.fem import coulomb_at_quadrature, get_rule, quadrature_points
from src.mesh import DiscreteField, Mesh

logger = logging.getLogger(__name__)

DIMENSION = 2
DEFAULT_S = 8.0
DEFAULT_R = 4.0
DEFAULT_Q = 4.0


# --------------------------------------------------------------------------
# level-set measure


def _superlevel_fraction(values: np.ndarray, k: float) -> np.ndarray:
    """Fraction of each triangle where the linear interpolant exceeds k"""
    v = np.sort(values, axis=1)
    v0, v1, v2 = v[:, 0], v[:, 1], v[:, 2]
    with np.errstate(divide='ignore', invalid='ignore'):
        lower = 1.0 - (k - v0) ** 2 / ((v1 - v0) * (v2 - v0))
        upper = (v2 - k) ** 2 / ((v2 - v0) * (v2 - v1))
    return np.select(
        [v2 <= k, k < v0, k < v1, k < v2],
        [0.0, 1.0, lower, upper],
        default=0.0,
    )


def theta_curve(u: DiscreteField, levels: Sequence[float]) -> List[Tuple[float, float]]:
    """
    Theta(k) = |A(k)| for each level, A(k) = {|u| > k}.

    The sets {u > k} and {-u > k} are clipped per triangle in closed form.
    """
    levels = np.asarray(levels, dtype=float)
    if np.any(levels < 0) or np.any(np.diff(levels) < 0):
        raise DataError("levels must be nonnegative and sorted ascending")
    nodal = u.values[u.mesh.triangles]
    areas = u.mesh.areas
    curve = []
    for k in levels:
        fraction = _superlevel_fraction(nodal, k) + _superlevel_fraction(-nodal, k)
        curve.append((float(k), float(np.sum(fraction * areas))))
    return curve


# --------------------------------------------------------------------------
# explicit constants


def default_poincare_constant(diameter: float) -> float:
    """diam / pi, a Poincare constant for convex domains"""
    return diameter / math.pi


def default_embedding_constant(q: float = DEFAULT_Q) -> float:
    """2^(1/4) from the two-dimensional Ladyzhenskaya inequality at q = 4"""
    if q != 4:
        logger.warning("embedding constant 2^(1/4) is derived for q = 4, got q = %g", q)
    return 2.0 ** 0.25


@dataclass
class DataNorms:
    """
    Norms of the data of -div(eps grad u) + b(x, u + w) = f0 + div f.

    f_qp/f0_qp/c_qp (L^{q'}) and f_2 (L^2) are derived by Hoelder from the
    L^r / L^s norms when left as None.
    """
    f_s: float = 0.0
    f0_r: float = 0.0
    c_r: float = 0.0
    alpha_lower: float = 1.0
    measure: float = 1.0
    diameter: float = 1.0
    s: float = DEFAULT_S
    r: float = DEFAULT_R
    q: float = DEFAULT_Q
    f_2: Optional[float] = None
    f0_qp: Optional[float] = None
    c_qp: Optional[float] = None

    def to_dict(self):
        return asdict(self)


def _lp_norm(values: np.ndarray, weights: np.ndarray, p: float) -> float:
    if values.size == 0:
        return 0.0
    return float(np.sum(np.abs(values) ** p * weights) ** (1.0 / p))


def measure_data_norms(problem: PBEProblem, mesh: Mesh, field: CoulombField,
                       s: float = DEFAULT_S, r: float = DEFAULT_R, q: float = DEFAULT_Q) -> DataNorms:
    """
    Quadrature norms of the two-term data.

    f = chi_solvent (eps_m - eps_s) grad G, f0 = 0 and c = b(x, chi_ions G).
    """
    rule = get_rule(4)
    points = quadrature_points(mesh, rule)
    weights = rule.weights[None, :] * mesh.areas[:, None]
    solvent = mesh.elem_region != RegionTag.MOLECULE
    ions = mesh.elem_region == RegionTag.IONS

    flat = points[solvent].reshape(-1, 2)
    eps_s = problem.eps_s.evaluate(flat)
    f_abs = np.abs(problem.eps_m - eps_s) * np.linalg.norm(eval_grad_G(field, flat), axis=1)
    f_weights = weights[solvent].ravel()

    G_ions = coulomb_at_quadrature(mesh, field, rule, ions)[ions]
    c_abs = np.abs(np.asarray(eval_b(problem, RegionTag.IONS, G_ions))).ravel()
    c_weights = weights[ions].ravel()
    q_prime = q / (q - 1.0)

    alpha = min(problem.eps_m, float(eps_s.min())) if eps_s.size else problem.eps_m
    return DataNorms(
        f_s=_lp_norm(f_abs, f_weights, s),
        f0_r=0.0,
        c_r=_lp_norm(c_abs, c_weights, r),
        alpha_lower=alpha,
        measure=mesh.total_area,
        diameter=mesh.diameter,
        s=s, r=r, q=q,
        f_2=_lp_norm(f_abs, f_weights, 2.0),
        f0_qp=0.0,
        c_qp=_lp_norm(c_abs, c_weights, q_prime),
    )


@dataclass
class BoundConstants:
    """Constants of the a priori L-infinity bound; k1 bounds ||u||_inf"""
    C_E: float
    C_P: float
    C_D: float
    C_M: float
    k0: float
    k1: float
    beta: float
    norms: DataNorms = field(default_factory=DataNorms)

    def extinction_parameters(self) -> Tuple[float, float, float]:
        """
        (C, alpha, beta) of Theta(t) <= (2 C_M / (t - k))^q Theta(k)^beta.

        With Theta(k0) = |Omega| the extinction level k0 + t_e equals k1.
        """
        q = self.norms.q
        return (2.0 * self.C_M) ** q, q, self.beta

    def to_dict(self):
        out = asdict(self)
        out['norms'] = self.norms.to_dict()
        return out


def apriori_bound(norms: DataNorms, C_E: Optional[float] = None,
                  C_P: Optional[float] = None) -> BoundConstants:
    """
    Explicit L-infinity bound from the data norms.

    beta = q min((s - 2)/(2s), (r - q')/(r q')), with q' = q/(q - 1);
    C_M = C_E (C_P^2 + 1)/alpha max(C_E (|c|_r + |f0|_r), |f|_s);
    C_D = (C_P^2 + 1)/alpha (C_E |c|_q' + C_E |f0|_q' + |f|_2);
    k0 = C_D, k1 = k0 + 2 C_M |Omega|^((beta - 1)/q) 2^(beta/(beta - 1)).

    Raises:
        InfeasibleExponentError: s <= d, r <= d/2 or beta <= 1
    """
    s, r, q = norms.s, norms.r, norms.q
    if not (s > DIMENSION and r > DIMENSION / 2.0):
        raise InfeasibleExponentError(f"need s > {DIMENSION} and r > {DIMENSION / 2:g}, got s={s}, r={r}")
    if not q > 1:
        raise InfeasibleExponentError(f"need q > 1, got {q}")
    q_prime = q / (q - 1.0)
    beta = q * min((s - 2.0) / (2.0 * s), (r - q_prime) / (r * q_prime))
    if not beta > 1:
        raise InfeasibleExponentError(
            f"exponent beta = {beta:.4g} must exceed 1 (s={s}, r={r}, q={q})")

    C_E = default_embedding_constant(q) if C_E is None else C_E
    C_P = default_poincare_constant(norms.diameter) if C_P is None else C_P
    if not (C_E > 0 and C_P > 0 and norms.alpha_lower > 0):
        raise DataError("C_E, C_P and alpha_lower must be positive")

    omega = norms.measure
    holder_r = omega ** (1.0 / q_prime - 1.0 / r)
    f_2 = norms.f_2 if norms.f_2 is not None else omega ** (0.5 - 1.0 / s) * norms.f_s
    f0_qp = norms.f0_qp if norms.f0_qp is not None else holder_r * norms.f0_r
    c_qp = norms.c_qp if norms.c_qp is not None else holder_r * norms.c_r

    factor = (C_P ** 2 + 1.0) / norms.alpha_lower
    C_M = C_E * factor * max(C_E * (norms.c_r + norms.f0_r), norms.f_s)
    C_D = factor * (C_E * c_qp + C_E * f0_qp + f_2)
    k0 = C_D
    k1 = k0 + 2.0 * C_M * omega ** ((beta - 1.0) / q) * 2.0 ** (beta / (beta - 1.0))
    logger.debug("a priori bound: C_D = %.4g, C_M = %.4g, beta = %.3g, k1 = %.4g", C_D, C_M, beta, k1)
    return BoundConstants(C_E, C_P, C_D, C_M, k0, k1, beta, norms)


# --------------------------------------------------------------------------
# extinction


@dataclass
class ExtinctionVerdict:
    passed: bool
    t_e: float
    k0: float
    theta_k0: float
    inequality_holds: bool
    vanishes: bool
    violations: int = 0
    detail: str = ""

    def to_dict(self):
        return asdict(self)


def extinction_check(theta: Sequence[Tuple[float, float]], C: float, alpha: float, beta: float,
                     k0: Optional[float] = None, rtol: float = 1e-9) -> ExtinctionVerdict:
    """
    Check the decay inequality on every sampled pair k0 <= k < t and that
    Theta vanishes at k0 + t_e, t_e^alpha = C Theta(k0)^(beta - 1) 2^(alpha beta/(beta - 1)).

    Raises:
        DataError: theta is not nonincreasing
        InfeasibleExponentError: beta <= 1
    """
    if not beta > 1:
        raise InfeasibleExponentError(f"beta must exceed 1, got {beta}")
    curve = np.asarray(theta, dtype=float).reshape(-1, 2)
    k, values = curve[:, 0], curve[:, 1]
    if np.any(np.diff(k) <= 0):
        raise DataError("theta levels must be strictly increasing")
    scale = max(1.0, float(values.max(initial=0.0)))
    if np.any(np.diff(values) > 1e-12 * scale):
        raise DataError("theta curve is not nonincreasing")

    k0 = float(k[0]) if k0 is None else float(k0)
    start = int(np.searchsorted(k, k0 - 1e-14))
    if start >= len(k):
        return ExtinctionVerdict(False, math.nan, k0, math.nan, False, False,
                                 detail="no samples at or above k0")
    k, values = k[start:], values[start:]
    theta_k0 = float(values[0])

    lo, hi = np.triu_indices(len(k), 1)
    bound = C * values[lo] ** beta / (k[hi] - k[lo]) ** alpha
    violations = int(np.sum(values[hi] > bound * (1.0 + rtol)))
    inequality_holds = violations == 0

    if theta_k0 == 0.0:
        t_e = 0.0
    else:
        t_e = (C * theta_k0 ** (beta - 1.0) * 2.0 ** (alpha * beta / (beta - 1.0))) ** (1.0 / alpha)
    beyond = np.flatnonzero(k >= float(k[0]) + t_e)
    if beyond.size:
        vanishes = bool(values[beyond[0]] == 0.0)
        detail = f"Theta({k[beyond[0]]:.6g}) = {values[beyond[0]]:.6g}"
    else:
        vanishes = False
        detail = f"sampled levels end before k0 + t_e = {k[0] + t_e:.6g}"
    if violations:
        detail += f"; {violations} sampled pairs violate the decay inequality"
    return ExtinctionVerdict(inequality_holds and vanishes, t_e, float(k[0]), theta_k0,
                             inequality_holds, vanishes, violations, detail)
