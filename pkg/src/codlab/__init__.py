"""Numerical workbench for unions of tangent, normal and line fibres of embedded manifolds."""

__version__ = "0.1.0"
