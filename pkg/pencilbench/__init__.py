"""pencilbench: pencil-based tensor rank decomposition and its numerical stability

Dense third-order CPD tools: a pencil-based decomposition algorithm, ALS
refinement, condition numbers, and the adversarial and Monte Carlo
experiments that measure how far pencil-based methods fall short of the
problem's conditioning.
"""

__version__ = "0.1.0"

from .config import BenchSettings, configure_logging, get_settings, reset_settings
from .errors import InputError, NumericalError, PencilBenchError

__all__ = [
    "__version__",
    "BenchSettings",
    "configure_logging",
    "get_settings",
    "reset_settings",
    "PencilBenchError",
    "NumericalError",
    "InputError",
]
