"""Retinex decomposition for underexposed-image correction and dehazing.

The solver alternates illumination and reflectance updates under a hybrid
prior: explicit smoothness / edge-preserving penalties plus a pluggable
learned descent direction, followed by gamma adjustment of the illumination.
"""

from .solver import (
    SolverConfig,
    EnhanceReport,
    run,
    enhance_color,
    dehaze,
    gamma_adjust,
)
from .denoiser import (
    IdentityDescent,
    GaussianBlurDescent,
    NetworkDescent,
    load_weights,
    save_weights,
)

__all__ = [
    "SolverConfig",
    "EnhanceReport",
    "run",
    "enhance_color",
    "dehaze",
    "gamma_adjust",
    "IdentityDescent",
    "GaussianBlurDescent",
    "NetworkDescent",
    "load_weights",
    "save_weights",
]

__version__ = "0.1.0"
