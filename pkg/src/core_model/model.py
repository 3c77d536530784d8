"""
Physical model of the General Poisson-Boltzmann equation.

Holds the ion species, the region semantics (molecule, ion exclusion layer,
ion-accessible solvent), the dimensionless nonlinearity b with its derivative
and antiderivative, and the coefficients of the linearized equation.

All evaluators are vectorized: `region` and `t` may be scalars or arrays of
the same shape, and scalar inputs return Python floats.
"""

import logging
import math
from dataclasses import dataclass, field, replace
from enum import Enum, IntEnum
from typing import Iterable, Sequence, Tuple, Union

import numpy as np

from src.exceptions import ConfigurationError, DomainError

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

# Largest |xi * t| accepted before exp() is considered to overflow.
EXPONENT_GUARD = 700.0


@dataclass(frozen=True)
class PhysicalConstants:
    """CGS constants (Avogadro 1/mol, elementary charge esu, Boltzmann erg/K)"""
    avogadro: float = 6.022140857e23
    elementary_charge: float = 4.8032424e-10
    boltzmann: float = 1.38064852e-16

    def __post_init__(self):
        for name in ("avogadro", "elementary_charge", "boltzmann"):
            if not getattr(self, name) > 0:
                raise ConfigurationError(f"physical constant {name} must be positive")

    def to_dict(self):
        return {
            'avogadro': self.avogadro,
            'elementary_charge': self.elementary_charge,
            'boltzmann': self.boltzmann,
        }


class RegionTag(IntEnum):
    """Region of a point of the computational domain"""
    MOLECULE = 0
    IEL = 1
    IONS = 2


class UnitMode(str, Enum):
    PHYSICAL = "physical"
    SYNTHETIC = "synthetic"


@dataclass(frozen=True)
class IonSpecies:
    """Mobile ion species: concentration M (ions per cm^3) and valence xi"""
    concentration: float
    valence: int

    def __post_init__(self):
        if not self.concentration >= 0:
            raise ConfigurationError(f"ion concentration must be >= 0, got {self.concentration}")
        if int(self.valence) != self.valence or self.valence == 0:
            raise ConfigurationError(f"ion valence must be a nonzero integer, got {self.valence}")


@dataclass(frozen=True)
class Charge:
    """Fixed partial charge: position, valence z and van der Waals radius"""
    position: Tuple[float, ...]
    valence: float
    radius: float = 0.0


@dataclass(frozen=True)
class ChargeSystem:
    """Point partial charges of a molecule in 2 or 3 dimensions"""
    charges: Tuple[Charge, ...]
    dimension: int = 2

    def __post_init__(self):
        object.__setattr__(self, 'charges', tuple(self.charges))
        if self.dimension not in (2, 3):
            raise ConfigurationError(f"dimension must be 2 or 3, got {self.dimension}")
        if not self.charges:
            raise ConfigurationError("a charge system needs at least one charge")
        for c in self.charges:
            if len(c.position) != self.dimension:
                raise ConfigurationError(
                    f"charge position {c.position} does not have dimension {self.dimension}"
                )
            if c.radius < 0:
                raise ConfigurationError(f"charge radius must be >= 0, got {c.radius}")
        pos = self.positions
        if len(pos) > 1:
            _, counts = np.unique(pos, axis=0, return_counts=True)
            if np.any(counts > 1):
                raise ConfigurationError("charge positions must be pairwise distinct")

    @classmethod
    def from_arrays(cls, positions, valences, radii=None) -> "ChargeSystem":
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        valences = np.atleast_1d(np.asarray(valences, dtype=float))
        if radii is None:
            radii = np.zeros(len(valences))
        charges = tuple(
            Charge(tuple(float(v) for v in p), float(z), float(r))
            for p, z, r in zip(positions, valences, np.atleast_1d(radii))
        )
        return cls(charges, positions.shape[1])

    @property
    def positions(self) -> np.ndarray:
        return np.array([c.position for c in self.charges], dtype=float)

    @property
    def valences(self) -> np.ndarray:
        return np.array([c.valence for c in self.charges], dtype=float)

    @property
    def radii(self) -> np.ndarray:
        return np.array([c.radius for c in self.charges], dtype=float)

    def __len__(self):
        return len(self.charges)


@dataclass(frozen=True)
class SolventPermittivity:
    """
    Solvent permittivity eps_s(x) = value + gradient . x

    A zero gradient gives the usual constant solvent permittivity. Positivity
    is checked wherever the field is evaluated.
    """
    value: float = 80.0
    gradient: Tuple[float, ...] = (0.0, 0.0)

    @property
    def is_constant(self) -> bool:
        return not any(self.gradient)

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if self.is_constant:
            values = np.full(len(points), float(self.value))
        else:
            g = np.asarray(self.gradient, dtype=float)
            values = self.value + points[:, :len(g)] @ g
        if np.any(values <= 0):
            raise ConfigurationError("solvent permittivity is not positive on the domain")
        return values

    def grad(self) -> np.ndarray:
        return np.asarray(self.gradient, dtype=float)


@dataclass(frozen=True)
class PBEProblem:
    """
    Continuous GPBE model.

    Args:
        eps_m: molecular permittivity (dimensionless)
        eps_s: solvent permittivity (float or SolventPermittivity)
        temperature: absolute temperature in K
        species: mobile ion species
        constants: CGS constants
        unit_mode: 'physical' uses the CGS constants, 'synthetic' pins every
            prefactor to 1 for manufactured problems
        length_unit: centimetres per mesh length unit (1e-8 for Angstrom)
    """
    eps_m: float = 2.0
    eps_s: SolventPermittivity = field(default_factory=SolventPermittivity)
    temperature: float = 298.15
    species: Tuple[IonSpecies, ...] = ()
    constants: PhysicalConstants = field(default_factory=PhysicalConstants)
    unit_mode: UnitMode = UnitMode.PHYSICAL
    length_unit: float = 1.0

    def __post_init__(self):
        if not isinstance(self.eps_s, SolventPermittivity):
            object.__setattr__(self, 'eps_s', SolventPermittivity(float(self.eps_s)))
        object.__setattr__(self, 'species', tuple(self.species))
        object.__setattr__(self, 'unit_mode', UnitMode(self.unit_mode))
        if not self.eps_m > 0:
            raise ConfigurationError(f"eps_m must be positive, got {self.eps_m}")
        if not self.eps_s.value > 0:
            raise ConfigurationError(f"eps_s must be positive, got {self.eps_s.value}")
        if not self.temperature > 0:
            raise ConfigurationError(f"temperature must be positive, got {self.temperature}")
        if not self.length_unit > 0:
            raise ConfigurationError(f"length_unit must be positive, got {self.length_unit}")

    @property
    def thermal_energy(self) -> float:
        """k_B T in erg"""
        return self.constants.boltzmann * self.temperature

    @property
    def scale(self) -> float:
        """Prefactor of b: 4 pi e0^2 / (k_B T), per squared mesh length unit"""
        if self.unit_mode is UnitMode.SYNTHETIC:
            return 1.0
        e0 = self.constants.elementary_charge
        return 4.0 * math.pi * e0 * e0 / self.thermal_energy * self.length_unit ** 2

    @property
    def coulomb_scale(self) -> float:
        """Prefactor of G: e0^2 / (eps_m k_B T), in mesh length units"""
        if self.unit_mode is UnitMode.SYNTHETIC:
            return 1.0
        e0 = self.constants.elementary_charge
        return e0 * e0 / (self.eps_m * self.thermal_energy * self.length_unit)

    def species_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Concentrations M_j and valences xi_j as arrays"""
        M = np.array([s.concentration for s in self.species], dtype=float)
        xi = np.array([s.valence for s in self.species], dtype=float)
        return M, xi

    def with_species(self, species: Iterable[IonSpecies]) -> "PBEProblem":
        return replace(self, species=tuple(species))

    def scaled_species(self, factor: float) -> "PBEProblem":
        """Same problem with all concentrations multiplied by factor"""
        return self.with_species(
            IonSpecies(s.concentration * factor, s.valence) for s in self.species
        )

    @property
    def is_neutral(self) -> bool:
        return charge_neutrality_defect(self.species) == 0.0

    def to_dict(self):
        return {
            'eps_m': self.eps_m,
            'eps_s': self.eps_s.value,
            'eps_s_gradient': list(self.eps_s.gradient),
            'temperature': self.temperature,
            'species': [(s.concentration, s.valence) for s in self.species],
            'unit_mode': self.unit_mode.value,
            'length_unit': self.length_unit,
            'constants': self.constants.to_dict(),
        }


def _as_output(values: np.ndarray) -> ArrayLike:
    return float(values) if np.ndim(values) == 0 else values


def _ion_exponentials(problem: PBEProblem, region, t) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Returns (ions mask, exponent arrays e^{-xi_j t} of shape t.shape + (n_species,), t).

    Non-ion points are evaluated at t = 0 so the guard only applies where b
    is active.
    """
    t = np.asarray(t, dtype=float)
    ions = np.asarray(region) == RegionTag.IONS
    ions, t = np.broadcast_arrays(ions, t)
    if not np.all(np.isfinite(t[ions])):
        raise DomainError("potential is not finite in the ion region")
    _, xi = problem.species_arrays()
    t_eff = np.where(ions, t, 0.0)
    exponent = -np.multiply.outer(t_eff, xi)
    _check_guard(exponent)
    return ions, np.exp(exponent), t_eff


def _check_guard(exponent: np.ndarray) -> None:
    if exponent.size == 0:
        return
    bad = np.abs(exponent) > EXPONENT_GUARD
    if np.any(bad):
        species = int(np.argwhere(bad)[0][-1])
        raise DomainError(
            f"|xi*t| exceeds {EXPONENT_GUARD:g} for ion species {species} "
            f"(max |xi*t| = {np.max(np.abs(exponent)):.6g})",
            species=species,
        )


def eval_b(problem: PBEProblem, region, t) -> ArrayLike:
    """b(x, t) = -scale sum_j M_j xi_j exp(-xi_j t) on Ions, 0 elsewhere"""
    M, xi = problem.species_arrays()
    ions, e, _ = _ion_exponentials(problem, region, t)
    values = -problem.scale * (e @ (M * xi)) if len(M) else np.zeros(ions.shape)
    return _as_output(np.where(ions, values, 0.0))


def eval_b_prime(problem: PBEProblem, region, t) -> ArrayLike:
    """d/dt b(x, t) = scale sum_j M_j xi_j^2 exp(-xi_j t) >= 0"""
    M, xi = problem.species_arrays()
    ions, e, _ = _ion_exponentials(problem, region, t)
    values = problem.scale * (e @ (M * xi * xi)) if len(M) else np.zeros(ions.shape)
    return _as_output(np.where(ions, values, 0.0))


def eval_B(problem: PBEProblem, region, t) -> ArrayLike:
    """Antiderivative B(x, t) = scale sum_j M_j exp(-xi_j t) >= 0"""
    M, _ = problem.species_arrays()
    ions, e, _ = _ion_exponentials(problem, region, t)
    values = problem.scale * (e @ M) if len(M) else np.zeros(ions.shape)
    return _as_output(np.where(ions, values, 0.0))


def eval_B_increment(problem: PBEProblem, region, t, dt) -> ArrayLike:
    """
    B(x, t + dt) - B(x, t) without cancellation.

    Uses scale sum_j M_j exp(-xi_j t) expm1(-xi_j dt), which stays accurate
    when dt is tiny compared to t.
    """
    M, xi = problem.species_arrays()
    ions, e, t_eff = _ion_exponentials(problem, region, t)
    dt = np.where(ions, np.broadcast_to(np.asarray(dt, dtype=float), ions.shape), 0.0)
    if not np.all(np.isfinite(dt)):
        raise DomainError("potential increment is not finite in the ion region")
    _check_guard(-np.multiply.outer(t_eff + dt, xi))
    if not len(M):
        return _as_output(np.zeros(ions.shape))
    values = problem.scale * np.sum(M * e * np.expm1(-np.multiply.outer(dt, xi)), axis=-1)
    return _as_output(np.where(ions, values, 0.0))


def linearized_coefficients(problem: PBEProblem, region: RegionTag) -> Tuple[float, float]:
    """
    Coefficients of the linearized equation in a region.

    Returns:
        (m_bar_sq, ell) = (scale sum M xi^2, scale sum M xi) on Ions, (0, 0)
        elsewhere. The scale factor is included so that m_bar_sq equals
        kappa^2 for a symmetric 1:1 electrolyte.
    """
    if RegionTag(region) is not RegionTag.IONS:
        return 0.0, 0.0
    M, xi = problem.species_arrays()
    return (
        float(problem.scale * np.sum(M * xi * xi)),
        float(problem.scale * np.sum(M * xi)),
    )


def kappa_sq_from_ionic_strength(
    constants: PhysicalConstants,
    ionic_strength: float,
    temperature: float,
) -> float:
    """k_bar^2 = 8 pi N_A e0^2 I_s / (1000 k_B T) for I_s in mol/L"""
    if ionic_strength < 0:
        raise ConfigurationError(f"ionic strength must be >= 0, got {ionic_strength}")
    if not temperature > 0:
        raise ConfigurationError(f"temperature must be positive, got {temperature}")
    e0 = constants.elementary_charge
    return (8.0 * math.pi * constants.avogadro * e0 * e0 * ionic_strength
            / (1000.0 * constants.boltzmann * temperature))


def charge_neutrality_defect(species: Sequence[IonSpecies]) -> float:
    """sum_j M_j xi_j; zero iff the electrolyte is neutral"""
    return float(sum(s.concentration * s.valence for s in species))


def symmetric_electrolyte(
    ionic_strength: float,
    constants: PhysicalConstants = PhysicalConstants(),
    valence: int = 1,
) -> Tuple[IonSpecies, IonSpecies]:
    """
    z:z electrolyte with the given ionic strength (mol/L).

    For z = 1 the concentration satisfies I_s = 1000 M / N_A.
    """
    if ionic_strength < 0:
        raise ConfigurationError(f"ionic strength must be >= 0, got {ionic_strength}")
    z = abs(int(valence))
    M = ionic_strength * constants.avogadro / (1000.0 * z * z)
    return IonSpecies(M, z), IonSpecies(M, -z)


def cell_model_species(concentration: float, valence: int = 1) -> Tuple[IonSpecies]:
    """Single counterion species of the cell model (not charge neutral)"""
    return (IonSpecies(concentration, valence),)


class Splitting(str, Enum):
    """Decomposition of the potential: phi = G + u, or phi = G + u^H + u"""
    TWO_TERM = "two_term"
    THREE_TERM = "three_term"
