"""Impulsive control-affine optimal control tools."""

__version__ = "0.1.0"
