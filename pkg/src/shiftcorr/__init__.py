"""Numerical experiments on correlations of multiplicative functions with Hecke eigenform coefficients."""

__version__ = "0.1.0"
