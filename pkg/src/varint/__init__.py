"""Generalized Galerkin variational integrators."""

__version__ = "0.1.0"
