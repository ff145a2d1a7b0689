"""Time stepping of the discrete Yang-Mills equations."""

from .core import NewtonError, SchemeConfig, SchemeState, StepReport, YangMillsScheme
from .forms import bracket_local, nonlinear_terms, trilinear_local
from .linalg import SingularSystemError, static_condense

__all__ = [
    "NewtonError",
    "SchemeConfig",
    "SchemeState",
    "SingularSystemError",
    "StepReport",
    "YangMillsScheme",
    "bracket_local",
    "nonlinear_terms",
    "static_condense",
    "trilinear_local",
]
