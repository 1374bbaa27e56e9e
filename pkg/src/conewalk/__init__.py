"""Numerical toolkit for Wiener measures on positive, planar and cone paths,
their orbit decomposition under reparametrizations, and the covering-space
geometry of the Minkowski future cone."""

__version__ = "0.1.0"
