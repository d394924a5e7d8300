"""Simulator and analysis engine for entanglement-assisted nonlocal optical interferometry."""

from .errors import FringeError, InputError, NumericError
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "FringeError", "InputError", "NumericError", "__version__"]
