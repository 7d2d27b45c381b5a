"""Numerical laboratory for compact groups, random walks, couplings and approximate homomorphisms."""

__version__ = "0.1.0"
