"""Dynamical quantum phase transitions in two-band non-Hermitian lattices."""

__version__ = "0.1.0"
