"""Spectral radius analysis of nonnegative networks."""

__version__ = "0.1.0"
