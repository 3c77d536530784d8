from .assembly import (
    AssembledSystem,
    WMode,
    apply_dirichlet,
    assemble_linear_reaction,
    assemble_load,
    assemble_mass,
    assemble_semilinear,
    assemble_splitting_rhs,
    assemble_stiffness,
    coulomb_at_quadrature,
    element_gradients,
    element_permittivity,
    energy_J,
    energy_difference,
    error_norms,
    field_at_quadrature,
    field_l2_norm,
    flux_form_rhs,
    integral_B,
    locate,
    max_abs_b,
    point_eval,
    quadrature_points,
    w_at_quadrature,
)
from .quadrature import QuadratureRule, get_rule

__all__ = [
    'AssembledSystem', 'WMode', 'apply_dirichlet', 'assemble_linear_reaction', 'assemble_load',
    'assemble_mass', 'assemble_semilinear', 'assemble_splitting_rhs', 'assemble_stiffness',
    'coulomb_at_quadrature', 'element_gradients', 'element_permittivity', 'energy_J',
    'energy_difference', 'error_norms', 'field_at_quadrature', 'field_l2_norm', 'flux_form_rhs',
    'integral_B', 'locate', 'max_abs_b', 'point_eval', 'quadrature_points', 'w_at_quadrature',
    'QuadratureRule', 'get_rule',
]
