"""Numerical laboratory for twistor spaces of vector bundles over complex charts."""

__version__ = "0.1.0"
