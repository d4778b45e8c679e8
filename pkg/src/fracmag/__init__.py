"""Pseudorelativistic magnetic fractional operators, energies and ground states.

Submodules: ``specfun`` (Bessel functions), ``kernel`` (Levy densities),
``field`` (potentials, grids, fields), ``operator`` (pointwise operator),
``energy`` (discrete seminorms and Choquard terms), ``bbm`` (``s -> 1``
limits), ``solver`` (ground states) and ``cli``.
"""
__version__ = "0.1.0"

from .specfun import DomainError, bessel_k, theta  # noqa: E402
from .kernel import FracParams, kernel_mass, levy_density  # noqa: E402
from .field import (CartesianGrid, GaussianField, LinearPotential, RadialGrid,  # noqa: E402
                    RadialPotential, SampledField, ZeroPotential)
from .operator import QuadratureSpec, apply_regularized, apply_symbol_nonmagnetic  # noqa: E402
from .energy import ChoquardParams, PairQuadratureSpec, norm_sq, seminorm_sq  # noqa: E402
from .solver import MinimizeConfig, minimize_choquard, minimize_power  # noqa: E402

__all__ = [
    "__version__", "DomainError", "bessel_k", "theta", "FracParams", "kernel_mass",
    "levy_density", "CartesianGrid", "GaussianField", "LinearPotential", "RadialGrid",
    "RadialPotential", "SampledField", "ZeroPotential", "QuadratureSpec", "apply_regularized",
    "apply_symbol_nonmagnetic", "ChoquardParams", "PairQuadratureSpec", "norm_sq",
    "seminorm_sq", "MinimizeConfig", "minimize_choquard", "minimize_power",
]
