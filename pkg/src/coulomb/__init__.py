from .potential import (
    BoundaryMode,
    CoulombField,
    boundary_data,
    eval_G,
    eval_grad_G,
    fd_gradient,
    fd_laplacian,
)

__all__ = ['BoundaryMode', 'CoulombField', 'boundary_data', 'eval_G', 'eval_grad_G',
           'fd_gradient', 'fd_laplacian']
