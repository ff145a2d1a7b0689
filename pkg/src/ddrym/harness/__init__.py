"""Manufactured solution, studies and report emission."""

from .forcing import ForcingAssembler, weak_residual
from .manufactured import ManufacturedSolution
from .study import (
    CaseResult,
    StepRecord,
    StudyError,
    StudySpec,
    compare_schemes,
    lie_interpolate,
    rates,
    run_case,
    run_study,
    step_count,
)
from .verify import complex_property, polynomial_consistency


def exact_fields(t: float, lie=None):
    """(A(t), E(t)) of the manufactured solution as callables on (n, 3) point arrays."""
    from ..lie import so3

    sol = ManufacturedSolution(lie or so3())
    return (lambda p: sol.A(p, t)), (lambda p: sol.E(p, t))


__all__ = [
    "CaseResult",
    "ForcingAssembler",
    "ManufacturedSolution",
    "StepRecord",
    "StudyError",
    "StudySpec",
    "compare_schemes",
    "complex_property",
    "exact_fields",
    "lie_interpolate",
    "polynomial_consistency",
    "rates",
    "run_case",
    "run_study",
    "step_count",
    "weak_residual",
]
