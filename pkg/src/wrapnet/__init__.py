"""Mesh autoencoder that sends a codeword plus a base graph and rebuilds the surface from a sphere grid."""

from .kernels import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
