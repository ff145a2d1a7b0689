"""Polynomial spaces, quadrature and projections on mesh entities."""

from .bases import BasisError, EntityBases, EntityBasis, l2_project, make_bases, quadrature_budget
from .polynomials import MonomialSet, dim_poly, monomial_set
from .quadrature import MAX_DEGREE, QuadratureRule, quadrature, reference_rule

__all__ = [
    "BasisError",
    "EntityBases",
    "EntityBasis",
    "MAX_DEGREE",
    "MonomialSet",
    "QuadratureRule",
    "dim_poly",
    "l2_project",
    "make_bases",
    "monomial_set",
    "quadrature",
    "quadrature_budget",
    "reference_rule",
]
