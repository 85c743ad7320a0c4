"""Overlapping Schwarz preconditioners with spectral coarse spaces for 2D
Stokes and nearly incompressible elasticity."""

__version__ = "0.1.0"
