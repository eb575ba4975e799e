"""Numerical laboratory for breather solutions of the Klein-Gordon and
quantum Hamilton-Jacobi equations, in units hbar = m = c = 1."""

__version__ = "0.1.0"

from .analytic import (
    BreatherSpec,
    PlaneWaveSpec,
    breather_action,
    breather_psi,
    dispersion_omega,
    lorentz_boost,
)
from .units import (
    ActionValue,
    ComplexField,
    Grid,
    InsufficientResolutionError,
    SingularPointError,
    SpacetimePoint,
    UnitSystem,
)

__all__ = [
    "ActionValue",
    "BreatherSpec",
    "ComplexField",
    "Grid",
    "InsufficientResolutionError",
    "PlaneWaveSpec",
    "SingularPointError",
    "SpacetimePoint",
    "UnitSystem",
    "breather_action",
    "breather_psi",
    "dispersion_omega",
    "lorentz_boost",
]
