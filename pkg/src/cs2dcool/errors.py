"""Exception types raised by the toolkit."""


class ConfigError(ValueError):
    """Invalid or malformed experiment configuration."""


class NonRayleighParticleError(ConfigError):
    """Particle radius too large for the point-dipole (Rayleigh) treatment."""


class EquilibriumError(RuntimeError):
    """No axial equilibrium: scattering force beats the gradient force."""


class InstabilityError(RuntimeError):
    """The linearized dynamics has an eigenvalue with non-negative real part."""


class ConvergenceError(RuntimeError):
    """Frequency-domain quadrature failed to converge."""


class TrackingError(RuntimeError):
    """Eigenmode continuation lost a branch between neighbouring grid points."""
