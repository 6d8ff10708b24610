"""Saturation-time prediction for ALD reactors from single growth profiles."""

__version__ = "0.1.0"
