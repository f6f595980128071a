"""Implicit neural representations with Nyquist-informed frequency multipliers."""

__version__ = "0.1.0"
