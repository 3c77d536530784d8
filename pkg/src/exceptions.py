"""
Exception hierarchy for pbesolve.

Input problems (bad files, bad configuration, bad geometry) subclass
ValueError as well as PBEError; numerical failures do not. The CLI relies on
that split to choose its exit code.
"""

from typing import Any, Optional


class PBEError(Exception):
    """Base class for every error raised by the package"""


# ---------------------------------------------------------------- input errors

class InputError(PBEError, ValueError):
    """Invalid user-supplied data (exit code 1 in the CLI)"""


class ConfigurationError(InputError):
    """Inconsistent geometry, parameters or region configuration"""


class UnsupportedModeError(ConfigurationError):
    """A requested mode is not available for this dimension/setup"""


class ParseError(InputError):
    """Malformed text input; carries the 1-based line number when known"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PQRParseError(ParseError):
    """Malformed PQR record"""


class MeshParseError(ParseError):
    """Malformed mesh text file"""


class ConfigParseError(ParseError):
    """Malformed or invalid run configuration"""


class EmptyInputError(InputError):
    """Input contained no usable records"""


class ResolutionError(InputError):
    """Voxel grid too coarse for the requested probe radius"""


class InfeasibleExponentError(InputError):
    """Integrability exponents do not give beta > 1"""


class DataError(InputError):
    """Diagnostic input violates its preconditions (e.g. non-monotone curve)"""


# ------------------------------------------------------------ numerical errors

class DomainError(PBEError):
    """Exponent of the nonlinearity left the overflow guard"""

    def __init__(self, message: str, species: Optional[int] = None):
        self.species = species
        super().__init__(message)


class StepTooLargeError(DomainError):
    """Overflow guard tripped while evaluating a Newton trial state"""


class SingularityError(PBEError):
    """Coulomb potential evaluated at (or numerically at) a charge"""


class MeshError(PBEError):
    """Mesh violates an invariant (orientation, conformity, ...)"""


class RefinementError(MeshError):
    """Refinement produced an inverted element"""

    def __init__(self, message: str, element: Optional[int] = None):
        self.element = element
        super().__init__(message)


class LocationError(PBEError):
    """Point lies outside the mesh"""


class AssemblyError(PBEError):
    """Finite element assembly failed"""


class BreakdownError(PBEError):
    """Conjugate gradients hit non-finite arithmetic"""


class NonConvergenceError(PBEError):
    """Iteration limit reached; `partial` holds whatever was computed"""

    def __init__(self, message: str, partial: Any = None):
        self.partial = partial
        super().__init__(message)
