"""Discrete de Rham discretization of the Yang-Mills equations on polyhedral meshes."""

__version__ = "0.1.0"
