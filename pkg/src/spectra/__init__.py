# flake8: noqa

__version__ = "1.0.dev0"

from .exc import (
    SpectraError,
    InputError,
    DescriptorError,
    ConfigError,
    DomainError,
    HypothesisError,
    ResourceLimitError,
    ConvergenceError,
    StepLimitError,
    PrecisionError,
)

from .numerics import DEFAULT_TOLERANCE, Tolerance

# Potentials from descriptors
from .potentials import make_decaying, make_periodic, truncate

# Periodic background
from .floquet import band_edges, discriminant, floquet_data, monodromy

# Perturbed operator
from .pruefer import pruefer_flow, reconstruct_solution
from .spectral import density_prufer, density_weyl
from .wkb import series_solution, wkb_compare
