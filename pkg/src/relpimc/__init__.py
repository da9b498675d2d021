"""Relativistic path integral Monte Carlo for a 1D regularized Coulomb potential."""
__version__ = "0.1.0"
