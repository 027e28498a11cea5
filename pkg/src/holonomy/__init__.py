"""Numerical toolkit for adiabatic quantum holonomies.

Computes phase, eigenvalue and eigenspace anholonomies of parameter-
dependent unitary maps and Hamiltonians by path-ordered integration of
frame gauge connections, and checks the results against closed-form
predictions and direct stroboscopic time evolution.
"""

from .errors import (
    ConfigError,
    ContinuationError,
    DegeneracyError,
    HolonomyError,
    PreconditionError,
    UnsupportedError,
)

__version__ = "0.1.0"

__all__ = [
    "HolonomyError",
    "PreconditionError",
    "DegeneracyError",
    "ContinuationError",
    "UnsupportedError",
    "ConfigError",
    "__version__",
]
