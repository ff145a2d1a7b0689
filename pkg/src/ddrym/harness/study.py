"""Convergence, constraint and energy studies with the manufactured solution."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np

from ..complex import build_complex
from ..lie import LieAlgebra, algebra_from_spec
from ..mesh import mesh_from_spec
from ..scheme import NewtonError, SchemeConfig, YangMillsScheme
from .forcing import ForcingAssembler, weak_residual
from .manufactured import ManufacturedSolution

log = logging.getLogger(__name__)

VALIDATION_TOL = 1e-10


class StudyError(RuntimeError):
    pass


def step_count(h: float, k: int, steps="auto") -> int:
    """max(10, ceil(5 / h^(k+1))) for ``auto``, otherwise the given count."""
    if steps in (None, "auto"):
        return max(10, math.ceil(5.0 / h ** (k + 1) - 1e-12))
    n = int(steps)
    if n < 1:
        raise ValueError("the number of time steps must be positive")
    return n


@dataclass
class StudySpec:
    meshes: list
    degree: int = 0
    scheme: str = "n1"
    algebra: str = "so3"
    steps: object = "auto"
    t_final: float = 1.0
    newton_tol: float = 1e-12
    max_newton: int = 50
    newton: str = "exact"
    predictor: str = "previous"
    solver: str = "superlu"
    static_condensation: bool = False
    forced: bool = True  # manufactured sources; False gives the unforced scheme
    project: bool = False  # make the initial constraint vanish
    diagnostics: bool = True  # energy and constraint at every step

    def config(self) -> SchemeConfig:
        return SchemeConfig(
            nonlinearity=self.scheme,
            newton_tol=self.newton_tol,
            max_newton=self.max_newton,
            static_condensation=self.static_condensation,
            newton=self.newton,
            predictor=self.predictor,
            solver=self.solver,
        )


@dataclass
class StepRecord:
    n: int
    t: float
    newton_iterations: int
    residual: float
    energy: float
    constraint: float  # dual norm of C^n
    drift: float  # dual norm of C^n - C^0
    wall_time: float


@dataclass
class CaseResult:
    mesh: str
    h: float
    degree: int
    scheme: str
    steps: int
    err_E: float
    err_A: float
    max_drift: float
    runtime: float
    validation: float
    projection: float
    records: list = field(default_factory=list)

    def row(self) -> dict:
        out = asdict(self)
        out.pop("records")
        return out


def lie_interpolate(cx, space: str, F, tt: float, d: int) -> np.ndarray:
    """Interpolate an algebra-valued field F(points, t) -> (n, 3, d) into X_space (x) g."""
    pts, S = cx.interpolation_operator(space)
    vals = F(pts, tt)
    return (S @ vals.reshape(-1, d)).ravel()


def run_case(spec: StudySpec, mesh_spec: str, lie: LieAlgebra | None = None, callback=None) -> CaseResult:
    """Run one (mesh, degree, scheme) case from t = 0 to t_final."""
    t_start = time.perf_counter()
    lie = lie or algebra_from_spec(spec.algebra)
    mesh = mesh_from_spec(mesh_spec)
    k = spec.degree
    cx = build_complex(mesh, k)
    sch = YangMillsScheme(cx, lie, spec.config())
    sol = ManufacturedSolution(lie, bracket=spec.scheme != "maxwell")
    validation = weak_residual(cx, lie, sol, 0.0)
    if spec.forced and not validation <= VALIDATION_TOL:
        raise StudyError(f"manufactured source fails its validation on {mesh_spec}: residual {validation:.3e}")
    d = lie.dim
    A0 = lie_interpolate(cx, "curl", sol.A, 0.0, d)
    E0 = lie_interpolate(cx, "curl", sol.E, 0.0, d)
    proj = 0.0
    if spec.project and not sch.maxwell:
        E0, proj = sch.project_initial_constraint(A0, E0)
    state = sch.initial_state(A0, E0)
    nsteps = step_count(mesh.h, k, spec.steps)
    times = spec.t_final * np.arange(1, nsteps + 1) / nsteps
    forcing = ForcingAssembler(cx, lie, sol, constraint_rows=not sch.maxwell) if spec.forced else None
    c0 = sch.constraint_vector(state)
    records = [StepRecord(0, 0.0, 0, 0.0, sch.energy(state), sch.dual_norm(c0), 0.0, 0.0)] if spec.diagnostics else []
    max_drift = 0.0
    for tn in times:
        f = forcing(state.t, tn) if forcing is not None else None
        try:
            state, rep = sch.step(state, tn, f)
        except NewtonError as exc:
            raise StudyError(f"{mesh_spec}, k={k}, scheme={spec.scheme}: {exc}") from exc
        if spec.diagnostics:
            c = sch.constraint_vector(state)
            drift = sch.dual_norm(c - c0)
            max_drift = max(max_drift, drift)
            rec = StepRecord(
                rep.n, tn, rep.newton_iterations, rep.residual, sch.energy(state), sch.dual_norm(c), drift, rep.wall_time
            )
            records.append(rec)
            if callback is not None:
                callback(rec)
        log.info("%s k=%d %s step %d/%d newton=%d", mesh_spec, k, spec.scheme, rep.n, nsteps, rep.newton_iterations)
    sch.release()
    E_ex = lie_interpolate(cx, "curl", sol.E, spec.t_final, d)
    A_ex = lie_interpolate(cx, "curl", sol.A, spec.t_final, d)

    def rel(a, b):
        da = a - b
        return float(np.sqrt(da @ (sch.Mc @ da)) / np.sqrt(a @ (sch.Mc @ a)))

    return CaseResult(
        mesh=mesh_spec,
        h=mesh.h,
        degree=k,
        scheme=spec.scheme,
        steps=nsteps,
        err_E=rel(state.E, E_ex),
        err_A=rel(state.A, A_ex),
        max_drift=max_drift,
        runtime=time.perf_counter() - t_start,
        validation=validation,
        projection=proj,
        records=records,
    )


def rates(h, err) -> list:
    """Observed orders log(e_i / e_{i-1}) / log(h_i / h_{i-1}); NaN for the first row."""
    out = [float("nan")]
    for i in range(1, len(h)):
        out.append(float(np.log(err[i] / err[i - 1]) / np.log(h[i] / h[i - 1])))
    return out


def run_study(spec: StudySpec, callback=None) -> list:
    """All meshes of a study, coarse to fine."""
    lie = algebra_from_spec(spec.algebra)
    return [run_case(spec, m, lie, callback) for m in spec.meshes]


def compare_schemes(first: list, second: list) -> list:
    """Per-mesh |err_1 - err_2| for two runs on identical meshes and step counts."""
    if len(first) != len(second):
        raise ValueError("mismatched specs: different numbers of meshes")
    rows = []
    for a, b in zip(first, second):
        if a.mesh != b.mesh or a.steps != b.steps or a.degree != b.degree:
            raise ValueError(f"mismatched specs: {a.mesh}/{a.steps} vs {b.mesh}/{b.steps}")
        rows.append(
            {
                "mesh": a.mesh,
                "MeshSize": a.h,
                "diff_A": abs(a.err_A - b.err_A),
                "diff_E": abs(a.err_E - b.err_E),
                f"E_L2Pot_{a.scheme}": a.err_A,
                f"E_L2Pot_{b.scheme}": b.err_A,
                f"E_L2Elec_{a.scheme}": a.err_E,
                f"E_L2Elec_{b.scheme}": b.err_E,
            }
        )
    return rows


__all__ = [
    "CaseResult",
    "StepRecord",
    "StudyError",
    "StudySpec",
    "compare_schemes",
    "lie_interpolate",
    "rates",
    "run_case",
    "run_study",
    "step_count",
]
