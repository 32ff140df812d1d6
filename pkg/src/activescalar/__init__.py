"""Pseudo-spectral solver and diagnostics for forced active scalar equations on the torus."""

__version__ = "0.1.0"
