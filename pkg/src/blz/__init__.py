"""Integrable-structure toolkit: NLIE, TBA, functional relations, classical
KdV monodromy, and the spectral-determinant side of the same objects."""

__version__ = "0.1.0"
