"""Adiabatic elimination of a fast dissipative subsystem with fast unitary slow dynamics."""

__version__ = "0.1.0"
