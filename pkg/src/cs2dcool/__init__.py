"""Linear-response toolkit for two-dimensional cavity cooling of a levitated
nanoparticle by coherent scattering."""
__version__ = "0.1.0"

from .errors import (ConfigError, ConvergenceError, EquilibriumError,
                     InstabilityError, NonRayleighParticleError, TrackingError)
from .params import DerivedParams, ExperimentConfig, derive_params, load_config, coupling_rates
from .equilibrium import CouplingTable, EquilibriumSolution, axial_equilibrium, coupling_table
