"""Linear and third-order susceptibilities of damped superradiant atoms."""

from .model import (
    DampingRates,
    GammaTriple,
    IndefiniteLimit,
    ModelError,
    PoleError,
    SystemDrive,
    UnsupportedSystemSize,
    gamma_combine,
    resonance_fn,
)
from .stationary import (
    SpectralPoint,
    StationaryExpectations,
    chi1,
    chi3,
    chi3_approx,
    chi3_limit_gd0,
    enhancement_factor,
    spectral_point,
    stationary_expectations,
    verify_stationarity,
)

__version__ = "0.1.0"

__all__ = [
    "DampingRates",
    "GammaTriple",
    "IndefiniteLimit",
    "ModelError",
    "PoleError",
    "SpectralPoint",
    "StationaryExpectations",
    "SystemDrive",
    "UnsupportedSystemSize",
    "chi1",
    "chi3",
    "chi3_approx",
    "chi3_limit_gd0",
    "enhancement_factor",
    "gamma_combine",
    "resonance_fn",
    "spectral_point",
    "stationary_expectations",
    "verify_stationarity",
]
