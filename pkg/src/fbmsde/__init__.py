"""Fractional Brownian motion, singular-drift SDEs and ergodicity diagnostics."""

__version__ = "0.1.0"
