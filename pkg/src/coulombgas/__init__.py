"""Log-gas / random-matrix toolkit: finite-N samplers, equilibrium measures
and free-energy estimates for two-dimensional Coulomb systems."""

__version__ = "0.1.0"
