"""Geometric projectors and augmented-Lagrangian trajectory optimization."""

__version__ = "0.1.0"
