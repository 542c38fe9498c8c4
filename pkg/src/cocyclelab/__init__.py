"""Numerical laboratory for matrix-group cocycles over hyperbolic bases."""

__version__ = "0.1.0"
