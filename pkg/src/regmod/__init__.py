"""Numerical laboratory for regularity moduli of structured nonsmooth functions."""

__version__ = "0.1.0"
