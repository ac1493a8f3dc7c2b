"""Exact and numerical tools for the k-Cauchy-Fueter complex on the quaternionic Heisenberg group."""

__version__ = "0.1.0"

__all__ = ["algebra", "group", "cfcomplex", "appendix", "hypersurface", "torus", "cli"]
