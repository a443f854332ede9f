"""Fractional Navier-Stokes mild solutions and variable-exponent norm checks."""

__version__ = "0.1.0"
