"""Banded evolutions on lattices: propagation, generalized eigenvectors,
polynomial families, and decay-based uniqueness probes."""

__version__ = "0.1.0"

from .exceptions import (ConstraintViolation, InvalidArgument, NumericError,
                         PreconditionViolation, ResourceError, UnsupportedArgument)
from .lattice_ops import BandConstants, BandedOperator, LatticeState, adjoint, apply, audit_constants

__all__ = [
    "BandConstants", "BandedOperator", "LatticeState", "adjoint", "apply", "audit_constants",
    "ConstraintViolation", "InvalidArgument", "NumericError", "PreconditionViolation",
    "ResourceError", "UnsupportedArgument",
]
