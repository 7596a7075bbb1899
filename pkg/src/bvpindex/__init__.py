"""Numerical index theory for elliptic boundary value problems on model manifolds."""

__version__ = "0.1.0"
