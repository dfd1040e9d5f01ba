"""Numerical laboratory for random quasiconformal maps and circle packings
of random Delaunay triangulations."""

__version__ = "0.1.0"
