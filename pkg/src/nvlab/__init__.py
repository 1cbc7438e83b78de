"""Computational toolkit for the zero-energy Novikov-Veselov equation."""

__version__ = "0.1.0"
