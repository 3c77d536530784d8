"""
Coulomb (Newtonian) potential G of the fixed charges in a uniform dielectric.

    d = 3:  G(x) =  scale_G * sum_i z_i / |x - x_i|
    d = 2:  G(x) = -2 scale_G * sum_i z_i ln|x - x_i|

Both kernels satisfy -eps_m Laplace(G) = 4 pi eps_m scale_G sum_i z_i delta_{x_i}.
Points may be passed one at a time or as an (N, d) array.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Union

import numpy as np

from src.core_model import ChargeSystem, PBEProblem
from src.exceptions import ConfigurationError, SingularityError, UnsupportedModeError

logger = logging.getLogger(__name__)

# Relative distance (times the length scale) below which G is singular.
SINGULARITY_TOLERANCE = 1e-12


@dataclass(frozen=True)
class CoulombField:
    """
    Point charges in a medium of permittivity eps_m.

    Args:
        charges: the fixed charges
        eps_m: molecular permittivity
        scale_G: e0^2/(eps_m k_B T) in physical units, 1 for synthetic runs
        length_scale: domain diameter, sets the singularity tolerance
    """
    charges: ChargeSystem
    eps_m: float
    scale_G: float = 1.0
    length_scale: float = 1.0

    def __post_init__(self):
        if not self.scale_G > 0:
            raise ConfigurationError(f"scale_G must be positive, got {self.scale_G}")
        if not self.eps_m > 0:
            raise ConfigurationError(f"eps_m must be positive, got {self.eps_m}")

    @classmethod
    def from_problem(cls, charges: ChargeSystem, problem: PBEProblem,
                     length_scale: float = 1.0) -> "CoulombField":
        return cls(charges, problem.eps_m, problem.coulomb_scale, length_scale)

    @property
    def dimension(self) -> int:
        return self.charges.dimension


class BoundaryMode(str, Enum):
    ZERO = "zero"
    RESTRICTED_G = "restricted_G"
    SCREENED = "screened"


def _offsets(field: CoulombField, x) -> tuple:
    """Returns (points, x - x_i, |x - x_i|, valences, single-point flag)"""
    points = np.asarray(x, dtype=float)
    single = points.ndim == 1
    points = np.atleast_2d(points)
    if points.shape[1] != field.dimension:
        raise ConfigurationError(
            f"point dimension {points.shape[1]} does not match charge dimension {field.dimension}"
        )
    z = field.charges.valences
    diff = points[:, None, :] - field.charges.positions[None, :, :]
    dist = np.linalg.norm(diff, axis=2)
    active = z != 0
    near = dist[:, active] < SINGULARITY_TOLERANCE * field.length_scale
    if np.any(near):
        p, _ = np.argwhere(near)[0]
        raise SingularityError(f"Coulomb potential evaluated at a charge location {points[p]}")
    # zero-valence charges contribute nothing, keep the division finite
    dist = np.where(active[None, :], dist, 1.0)
    return points, diff, dist, z, single


def eval_G(field: CoulombField, x) -> Union[float, np.ndarray]:
    """Coulomb potential at one point or at each row of an (N, d) array"""
    _, _, dist, z, single = _offsets(field, x)
    if field.dimension == 3:
        values = field.scale_G * (z / dist).sum(axis=1)
    else:
        values = -2.0 * field.scale_G * (z * np.log(dist)).sum(axis=1)
    return float(values[0]) if single else values


def eval_grad_G(field: CoulombField, x) -> np.ndarray:
    """Analytic gradient of G, shape (d,) or (N, d)"""
    _, diff, dist, z, single = _offsets(field, x)
    if field.dimension == 3:
        weights = -field.scale_G * z / dist ** 3
    else:
        weights = -2.0 * field.scale_G * z / dist ** 2
    grads = np.einsum('nc,ncd->nd', weights, diff)
    return grads[0] if single else grads


def boundary_data(
    field: CoulombField,
    mode: Union[BoundaryMode, str],
    x,
    kappa: float = 0.0,
    eps_s: Optional[float] = None,
) -> Union[float, np.ndarray]:
    """
    Dirichlet data on the outer boundary.

    Args:
        mode: 'zero', 'restricted_G' (g = G, so g - G vanishes) or
            'screened' (3-D Debye-Hueckel sum with screening constant kappa)
        kappa: inverse Debye length, used by 'screened'
        eps_s: solvent permittivity, used by 'screened' (defaults to eps_m)
    """
    mode = BoundaryMode(mode)
    if mode is BoundaryMode.ZERO:
        points = np.asarray(x, dtype=float)
        return 0.0 if points.ndim == 1 else np.zeros(len(points))
    if mode is BoundaryMode.RESTRICTED_G:
        return eval_G(field, x)
    if field.dimension != 3:
        raise UnsupportedModeError("screened Coulomb boundary data is only available in 3-D")
    eps_s = field.eps_m if eps_s is None else eps_s
    _, _, dist, z, single = _offsets(field, x)
    values = field.scale_G * field.eps_m / eps_s * (z * np.exp(-kappa * dist) / dist).sum(axis=1)
    return float(values[0]) if single else values


def fd_gradient(field: CoulombField, x, h: float = 1e-5) -> np.ndarray:
    """Central finite-difference gradient of G at a single point"""
    x = np.asarray(x, dtype=float)
    grad = np.empty(field.dimension)
    for k in range(field.dimension):
        e = np.zeros(field.dimension)
        e[k] = h
        grad[k] = (eval_G(field, x + e) - eval_G(field, x - e)) / (2.0 * h)
    return grad


def fd_laplacian(field: CoulombField, x, h: float) -> float:
    """5-point (2-D) or 7-point (3-D) finite-difference Laplacian of G"""
    x = np.asarray(x, dtype=float)
    stencil = [x]
    for k in range(field.dimension):
        e = np.zeros(field.dimension)
        e[k] = h
        stencil.extend([x + e, x - e])
    values = eval_G(field, np.array(stencil))
    return float((values[1:].sum() - 2 * field.dimension * values[0]) / (h * h))
