"""Small bundled test problems on the disk geometry (synthetic units)"""

from typing import Tuple

from src.core_model import ChargeSystem, IonSpecies, PBEProblem, UnitMode
from src.coulomb import CoulombField
from src.exceptions import ConfigurationError
from src.mesh import Mesh, generate_disk_mesh

EXAMPLE_KINDS = ("neutral", "cell_model", "no_ions")


def disk_charges() -> ChargeSystem:
    """A dipole inside the unit molecule disk"""
    return ChargeSystem.from_arrays([[0.21, 0.13], [-0.33, -0.17]], [1.0, -1.0], [0.5, 0.5])


def disk_problem(kind: str = "neutral", eps_m: float = 2.0, eps_s: float = 80.0,
                 concentration: float = 1.0) -> PBEProblem:
    """
    Args:
        kind: 'neutral' (1:1 electrolyte), 'cell_model' (single +1 counterion)
            or 'no_ions'
    """
    if kind == "neutral":
        species = (IonSpecies(concentration, 1), IonSpecies(concentration, -1))
    elif kind == "cell_model":
        species = (IonSpecies(concentration, 1),)
    elif kind == "no_ions":
        species = ()
    else:
        raise ConfigurationError(f"unknown example '{kind}', expected one of {EXAMPLE_KINDS}")
    return PBEProblem(eps_m=eps_m, eps_s=eps_s, species=species, unit_mode=UnitMode.SYNTHETIC)


def disk_setup(kind: str = "neutral", n: int = 8) -> Tuple[PBEProblem, Mesh, CoulombField]:
    """Problem, validated mesh and Coulomb field of a bundled example"""
    problem = disk_problem(kind)
    charges = disk_charges()
    mesh = generate_disk_mesh(1.0, 1.5, 3.0, n).validate(charges)
    return problem, mesh, CoulombField.from_problem(charges, problem, mesh.diameter)
