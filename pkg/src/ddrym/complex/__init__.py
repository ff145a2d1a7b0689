"""Discrete de Rham complex on polyhedral meshes."""

from .ddr import CellData, DDRComplex, DDRSerendipity, build_complex, serendipity
from .layout import KINDS, SpaceLayout, make_layouts
from .local import LocalSystemError

__all__ = [
    "CellData",
    "DDRComplex",
    "DDRSerendipity",
    "KINDS",
    "LocalSystemError",
    "SpaceLayout",
    "build_complex",
    "make_layouts",
    "serendipity",
]
