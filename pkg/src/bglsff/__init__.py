"""Fidelity-based spectral form factors under balanced gain and loss."""

__version__ = "0.1.0"
