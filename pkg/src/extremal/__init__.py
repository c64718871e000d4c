"""Numerical toolkit for a matrix-constrained extremal entropy inequality."""

__version__ = "0.1.0"
