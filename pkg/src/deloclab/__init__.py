"""Numerical laboratory for eigenvector delocalization of Wigner-type matrices."""

__version__ = "0.1.0"
