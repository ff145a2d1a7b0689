"""Report emission: delimited tables, a JSON summary and optional figures.

CSV files hold only deterministic quantities, so identical inputs give
byte-identical tables.  Wall times go to ``summary.json``.
"""

from __future__ import annotations

import csv
import json
import math
import os
import platform
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .study import CaseResult, StudySpec, rates

RATE_COLUMNS = ["mesh", "steps", "MeshSize", "E_L2Elec", "E_L2Pot", "rate_E", "rate_A", "drift"]
STEP_COLUMNS = ["mesh", "n", "t", "newton_iterations", "residual", "energy", "constraint", "drift"]


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.10e}"
    return str(v)


def write_csv(path, rows: list, columns: list) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])
    return path


def rate_rows(results: list) -> list:
    """One row per mesh with observed orders against the previous row."""
    h = [r.h for r in results]
    rE = rates(h, [r.err_E for r in results])
    rA = rates(h, [r.err_A for r in results])
    return [
        {
            "mesh": r.mesh,
            "steps": r.steps,
            "MeshSize": r.h,
            "E_L2Elec": r.err_E,
            "E_L2Pot": r.err_A,
            "rate_E": a,
            "rate_A": b,
            "drift": r.max_drift,
        }
        for r, a, b in zip(results, rE, rA)
    ]


def case_rows(results: list) -> list:
    """Per-case summary of an unforced run: drift and largest relative energy increase."""
    rows = []
    for r in results:
        e = np.array([rec.energy for rec in r.records])
        inc = np.diff(e) / max(np.abs(e).max(), 1e-300) if len(e) > 1 else np.zeros(1)
        rows.append(
            {
                "mesh": r.mesh,
                "scheme": r.scheme,
                "degree": r.degree,
                "steps": r.steps,
                "drift": r.max_drift,
                "energy_initial": float(e[0]) if len(e) else float("nan"),
                "energy_final": float(e[-1]) if len(e) else float("nan"),
                "max_energy_increase": float(inc.max()),
                "projection": r.projection,
            }
        )
    return rows


def step_rows(results: list) -> list:
    return [{"mesh": r.mesh, **asdict(rec)} for r in results for rec in r.records]


def environment() -> dict:
    import scipy
    import sympy

    from .. import __version__
    from ..scheme.linalg import resolve_solver

    env = {
        "package": __version__,
        "python": sys.version.split()[0],
        "platform": platform.platform(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "sympy": sympy.__version__,
        "cpus": os.cpu_count(),
        "default_solver": resolve_solver("auto"),
    }
    try:
        from threadpoolctl import threadpool_info

        env["threadpools"] = [{k: p.get(k) for k in ("internal_api", "num_threads", "version")} for p in threadpool_info()]
    except ImportError:
        pass
    return env


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.generic):
        return _jsonable(v.item())
    return v


def write_summary(path, command: str, spec: StudySpec | list, rows: list, extra: dict | None = None) -> Path:
    specs = spec if isinstance(spec, list) else [spec]
    doc = {
        "command": command,
        "spec": [asdict(s) for s in specs] if len(specs) > 1 else asdict(specs[0]),
        "rows": rows,
        "environment": environment(),
    }
    if extra:
        doc.update(extra)
    path = Path(path)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=False) + "\n")
    return path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def plot_rates(path, results: list, title: str = "") -> Path:
    """Log-log plot of the relative errors against the mesh size with a reference slope."""
    plt = _pyplot()
    h = np.array([r.h for r in results])
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(h, [r.err_E for r in results], "o-", label="E")
    ax.loglog(h, [r.err_A for r in results], "s-", label="A")
    if len(results):
        k = results[0].degree
        ref = results[-1].err_E * (h / h[-1]) ** (k + 1)
        ax.loglog(h, ref, "k--", lw=0.8, label=f"slope {k + 1}")
    ax.set_xlabel("MeshSize")
    ax.set_ylabel("relative error")
    ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_series(path, results: list, key: str, ylabel: str, log: bool = False) -> Path:
    """Per-step quantity against time, one line per case."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 4))
    for r in results:
        t = [rec.t for rec in r.records]
        v = [getattr(rec, key) for rec in r.records]
        if log:
            v = np.maximum(np.abs(v), 1e-300)
            ax.semilogy(t, v, ".-", label=f"{r.mesh} {r.scheme}")
        else:
            ax.plot(t, v, ".-", label=f"{r.mesh} {r.scheme}")
    ax.set_xlabel("t")
    ax.set_ylabel(ylabel)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def plot_compare(path, rows: list, first: str, second: str) -> Path:
    plt = _pyplot()
    h = [r["MeshSize"] for r in rows]
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.loglog(h, [max(r["diff_E"], 1e-300) for r in rows], "o-", label="|E err difference|")
    ax.loglog(h, [max(r["diff_A"], 1e-300) for r in rows], "s-", label="|A err difference|")
    ax.set_xlabel("MeshSize")
    ax.set_title(f"{first} vs {second}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def runtime_rows(results: list) -> list:
    return [
        {"mesh": r.mesh, "scheme": r.scheme, "degree": r.degree, "runtime": r.runtime, "validation": r.validation}
        for r in results
    ]


__all__ = [
    "RATE_COLUMNS",
    "STEP_COLUMNS",
    "CaseResult",
    "environment",
    "plot_compare",
    "plot_rates",
    "plot_series",
    "case_rows",
    "rate_rows",
    "runtime_rows",
    "step_rows",
    "write_csv",
    "write_summary",
]
