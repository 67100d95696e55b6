"""Coalgebra-symmetric symplectic maps built on the two-photon algebra h6."""

__version__ = "0.1.0"
