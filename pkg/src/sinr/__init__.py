"""Continuous spectral reconstruction for coded-aperture snapshot imaging."""

__version__ = "0.1.0"
