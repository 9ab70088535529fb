"""Simulation and verification tools for a flowing photonic cluster-state architecture."""

__version__ = "0.1.0"
