"""Thermodynamic bounds from deformations of passive operators, for small finite-dimensional quantum systems."""
from . import deformation, harness, hierarchy, passivity, protocols, qstate
from .errors import (
    ConsistencyError,
    DomainError,
    NumericalError,
    PassDeformError,
    ResourceError,
    ValidationError,
)
from .qstate import DensityMatrix, HermitianOperator, MixtureOfUnitaries
from .setups import SetupSpec, Subsystem, thermal_setup

__version__ = "0.1.0"
