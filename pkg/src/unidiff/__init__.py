"""Multiplicative diffusion on the unitary group: simulation and large-N theory."""

__version__ = "0.1.0"
