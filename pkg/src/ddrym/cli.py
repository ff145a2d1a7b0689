"""Command line driver: ``ddrym converge|constraint|energy|compare|verify-complex``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

DEFAULT_MESHES = {
    "converge": ["cubic:2", "cubic:4", "cubic:8"],
    "compare": ["cubic:2", "cubic:4", "cubic:8"],
    "constraint": ["cubic:2", "tet:1"],
    "energy": ["cubic:2", "tet:1"],
    "verify-complex": ["cubic:2", "cubic:4", "tet:1", "tet:2"],
}


def _on_off(v: str) -> bool:
    if v.lower() in ("on", "true", "1", "yes"):
        return True
    if v.lower() in ("off", "false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError("expected on or off")


def _steps(v: str):
    if v == "auto":
        return v
    try:
        n = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'auto' or a positive integer") from None
    if n < 1:
        raise argparse.ArgumentTypeError("the number of steps must be positive")
    return n


def _positive(v: str) -> float:
    x = float(v)
    if not x > 0:
        raise argparse.ArgumentTypeError("expected a positive number")
    return x


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--mesh", action="append", help="cubic:N, tet:N or a mesh file (repeatable)")
    common.add_argument("--degree", type=int, action="append", help="polynomial degree k (repeatable for verify-complex)")
    common.add_argument("--scheme", choices=["n1", "n2", "maxwell"], default="n1")
    common.add_argument("--algebra", default="so3", help="so3 or abelian:D")
    common.add_argument("--steps", type=_steps, default=None, help="auto (step rule) or a fixed count")
    common.add_argument("--newton-tol", type=_positive, default=1e-12)
    common.add_argument("--newton", choices=["exact", "chord"], default="exact")
    common.add_argument("--predictor", choices=["previous", "extrapolate"], default="previous")
    common.add_argument("--solver", choices=["auto", "superlu", "pardiso"], default="superlu")
    common.add_argument("--static-condensation", type=_on_off, default=False, metavar="on|off")
    common.add_argument("--out", type=Path, default=Path("ddrym-out"))
    common.add_argument("--threads", type=int, default=None)
    common.add_argument("--plots", type=_on_off, default=True, metavar="on|off", help="write PNG figures")
    common.add_argument("-v", "--verbose", action="count", default=0)

    p = argparse.ArgumentParser(prog="ddrym", description="DDR Yang-Mills studies")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("converge", parents=[common], help="forced convergence study")
    sub.add_parser("constraint", parents=[common], help="constraint drift of unforced runs")
    sub.add_parser("energy", parents=[common], help="energy of unforced runs from projected data")
    sub.add_parser("compare", parents=[common], help="error difference of the n1 and n2 schemes")
    v = sub.add_parser("verify-complex", parents=[common], help="complex property and polynomial consistency")
    v.add_argument("--samples", type=int, default=20)
    return p


def _limit_threads(n):
    if n is None:
        return nullcontext()
    for var in ("OMP_NUM_THREADS", "MKL_NUM_THREADS", "OPENBLAS_NUM_THREADS"):
        os.environ[var] = str(n)
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        return nullcontext()
    return threadpool_limits(n)


def _spec(args, command: str, scheme: str | None = None):
    from .harness.study import StudySpec

    forced = command in ("converge", "compare")
    steps = args.steps if args.steps is not None else ("auto" if forced else 10)
    degree = args.degree[0] if args.degree else 0
    return StudySpec(
        meshes=args.mesh or DEFAULT_MESHES[command],
        degree=degree,
        scheme=scheme or args.scheme,
        algebra=args.algebra,
        steps=steps,
        newton_tol=args.newton_tol,
        newton=args.newton,
        predictor=args.predictor,
        solver=args.solver,
        static_condensation=args.static_condensation,
        forced=forced,
        project=command == "energy",
        diagnostics=True,
    )


def _progress(rec):
    logging.getLogger("ddrym").info("step %d t=%.4f newton=%d", rec.n, rec.t, rec.newton_iterations)


def _print_csv(path: Path):
    sys.stdout.write(path.read_text())


def cmd_study(args, command: str) -> list:
    from .harness import report
    from .harness.study import run_study

    spec = _spec(args, command)
    results = run_study(spec, _progress)
    out = args.out
    written = []
    rows = report.rate_rows(results) if command == "converge" else report.case_rows(results)
    steps = report.step_rows(results)
    if command == "converge":
        written.append(report.write_csv(out / "data_rates.csv", rows, report.RATE_COLUMNS))
        if args.plots:
            written.append(report.plot_rates(out / "rates.png", results, f"k={spec.degree} {spec.scheme}"))
    elif command == "constraint":
        written.append(report.write_csv(out / "constraint.csv", steps, report.STEP_COLUMNS))
        if args.plots:
            written.append(report.plot_series(out / "constraint.png", results, "drift", "constraint drift", log=True))
    else:
        written.append(report.write_csv(out / "energy.csv", steps, report.STEP_COLUMNS))
        if args.plots:
            written.append(report.plot_series(out / "energy.png", results, "energy", "energy"))
    extra = {
        "runtime": report.runtime_rows(results),
        "wall_times": [{"mesh": r.mesh, "step_wall_time": [s.wall_time for s in r.records]} for r in results],
    }
    written.append(report.write_summary(out / "summary.json", command, spec, rows, extra))
    _print_csv(written[0])
    return written


def cmd_compare(args) -> list:
    from .harness import report
    from .harness.study import compare_schemes, run_study

    specs = [_spec(args, "compare", "n1"), _spec(args, "compare", "n2")]
    first, second = (run_study(s, _progress) for s in specs)
    rows = compare_schemes(first, second)
    out = args.out
    written = [report.write_csv(out / "compare.csv", rows, list(rows[0]))]
    written.append(report.write_csv(out / "data_rates.csv", report.rate_rows(first) + report.rate_rows(second), report.RATE_COLUMNS))
    if args.plots:
        written.append(report.plot_compare(out / "compare.png", rows, "n1", "n2"))
    extra = {"runtime": report.runtime_rows(first + second)}
    written.append(report.write_summary(out / "summary.json", "compare", specs, rows, extra))
    _print_csv(written[0])
    return written


def cmd_verify(args) -> list:
    from .complex import build_complex
    from .harness import report
    from .harness.verify import complex_property, polynomial_consistency
    from .mesh import mesh_from_spec

    meshes = args.mesh or DEFAULT_MESHES["verify-complex"]
    degrees = args.degree or [0, 1, 2]
    rows = []
    for m in meshes:
        mesh = mesh_from_spec(m)
        for k in degrees:
            cx = build_complex(mesh, k)
            row = {"mesh": m, "degree": k, **complex_property(cx, args.samples), **polynomial_consistency(cx)}
            rows.append(row)
            logging.getLogger("ddrym").info("verified %s k=%d", m, k)
    cols = list(rows[0])
    out = args.out
    written = [report.write_csv(out / "verify_complex.csv", rows, cols)]
    from .harness.study import StudySpec

    written.append(report.write_summary(out / "summary.json", "verify-complex", StudySpec(meshes=meshes), rows))
    _print_csv(written[0])
    return written


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    from .harness.study import StudyError
    from .mesh import MeshError
    from .scheme import NewtonError

    try:
        with _limit_threads(args.threads):
            if args.command == "verify-complex":
                written = cmd_verify(args)
            elif args.command == "compare":
                written = cmd_compare(args)
            else:
                written = cmd_study(args, args.command)
    except (StudyError, NewtonError, MeshError, ValueError, ImportError) as exc:
        print(f"ddrym: error: {exc}", file=sys.stderr)
        return 1
    for w in written:
        print(f"wrote {w}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
