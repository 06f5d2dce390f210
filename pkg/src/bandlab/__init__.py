"""Numerical laboratory for localization in Gaussian block band matrices."""

__version__ = "0.1.0"
