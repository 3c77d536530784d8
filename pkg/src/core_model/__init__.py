from .model import (
    EXPONENT_GUARD,
    Charge,
    ChargeSystem,
    IonSpecies,
    PBEProblem,
    PhysicalConstants,
    RegionTag,
    SolventPermittivity,
    Splitting,
    UnitMode,
    cell_model_species,
    charge_neutrality_defect,
    eval_B,
    eval_B_increment,
    eval_b,
    eval_b_prime,
    kappa_sq_from_ionic_strength,
    linearized_coefficients,
    symmetric_electrolyte,
)

__all__ = [
    'EXPONENT_GUARD', 'Charge', 'ChargeSystem', 'IonSpecies', 'PBEProblem',
    'PhysicalConstants', 'RegionTag', 'SolventPermittivity', 'Splitting', 'UnitMode',
    'cell_model_species', 'charge_neutrality_defect', 'eval_B', 'eval_B_increment',
    'eval_b', 'eval_b_prime', 'kappa_sq_from_ionic_strength',
    'linearized_coefficients', 'symmetric_electrolyte',
]
