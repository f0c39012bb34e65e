"""Numerical checks for weakly (anti)commuting operators, torus Dirac operators and Wick rotations."""

__version__ = "0.1.0"
