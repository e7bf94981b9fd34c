"""Exception hierarchy for pencilbench

Numerical failures map to CLI exit code 1, input errors to exit code 2.
"""

from typing import Optional


class PencilBenchError(Exception):
    """Root of all pencilbench errors"""


# ============================================
# NUMERICAL FAILURES (exit 1)
# ============================================

class NumericalError(PencilBenchError):
    """A computation could not produce a trustworthy result"""


class SingularPencil(NumericalError):
    """Second pencil slice is numerically singular"""


class ComplexEigenvalues(NumericalError):
    """Pencil spectrum has imaginary parts above tolerance"""


class RetriesExhausted(NumericalError):
    """Every projection draw led to a failed pencil"""


class DegenerateCompression(NumericalError):
    """A flattening of the projected tensor has numerical rank below r"""


class RankDeficient(NumericalError):
    """Matrix expected to have full column rank does not"""


class ConvergenceError(NumericalError):
    """An iterative method stopped without meeting its tolerance"""


class CombinatorialBudgetExceeded(NumericalError):
    """Exhaustive subset enumeration would exceed the evaluation budget"""


# ============================================
# INPUT ERRORS (exit 2)
# ============================================

class InputError(PencilBenchError, ValueError):
    """Caller supplied invalid data or configuration"""


class DimensionMismatch(InputError):
    """Operands have incompatible shapes"""


class RankTooLarge(InputError):
    """Requested rank exceeds what the tensor dimensions allow"""


class InvalidConfig(InputError):
    """Configuration violates its invariants"""


class NonFiniteInput(InputError):
    """Input contains NaN or Inf"""


class FileFormatError(InputError):
    """Malformed .tns3 or .cpd.json file"""

    def __init__(self, path: str, line: Optional[int], message: str):
        self.path = path
        self.line = line
        self.message = message
        location = f"{path}:{line}" if line is not None else path
        super().__init__(f"{location}: {message}")
