"""Numerical laboratory for c-projective Kähler geometry."""

__version__ = "0.1.0"
