"""Command-line front end.

::

    quadhull build          instance.json [--format cbf|text] [--out PATH]
    quadhull optimize       instance.json --c 1,0 [--per-leaf] [--from-artifact PATH]
    quadhull verify         instance.json [--objectives K] [--samples S] [--seed N] [--artifact PATH]
    quadhull export         instance.json [--format cbf|text] [--out PATH] [--c VEC]
    quadhull stats          instance.json
    quadhull sample-surface instance.json [--density D] [--seed N] [--out PATH]

Exit codes: 0 success, 1 invalid input, 2 infeasible (``S`` empty),
3 leaf budget or dimension cap exceeded, 4 unbounded polytope,
5 ``verify`` reported a violation, 6 conic solver failure,
7 internal consistency check failed.
"""

import argparse
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, oracle, socmodel
from .corpus import load_instance
from .errors import (
    BudgetExceeded,
    CapacityError,
    InfeasibleError,
    InternalInconsistency,
    InvalidInputError,
    QuadHullError,
    SolverError,
    UnboundedPolytopeError,
)
from .hullcore import build_hull_report

log = logging.getLogger("quadhull")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_BUDGET = 3
EXIT_UNBOUNDED = 4
EXIT_VERIFY_FAILED = 5
EXIT_SOLVER = 6
EXIT_INTERNAL = 7

# verify tolerances: |optimize - brute_max| and how far optimize may fall below the oracle
SUPPORT_GAP_TOL = 1e-3
RELAXATION_TOL = 1e-6

_EXIT_CODES = [
    # order matters: InconsistentSystemError is an InfeasibleError
    (InvalidInputError, EXIT_INPUT),
    (InfeasibleError, EXIT_INFEASIBLE),
    (BudgetExceeded, EXIT_BUDGET),
    (CapacityError, EXIT_BUDGET),
    (UnboundedPolytopeError, EXIT_UNBOUNDED),
    (SolverError, EXIT_SOLVER),
    (InternalInconsistency, EXIT_INTERNAL),
]


def exit_code(exc):
    """Process exit code for a library exception."""
    for cls, code in _EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return EXIT_INTERNAL


def parse_vector(text, n=None):
    """Parse ``"1,0,-2.5"`` into a float array, optionally checking the length."""
    try:
        v = np.array([float(t) for t in text.replace(" ", "").split(",") if t != ""])
    except ValueError:
        raise InvalidInputError(f"cannot parse vector {text!r}") from None
    if not np.all(np.isfinite(v)):
        raise InvalidInputError(f"vector {text!r} has non-finite entries")
    if n is not None and v.shape[0] != n:
        raise InvalidInputError(f"vector {text!r} has length {v.shape[0]}, expected {n}")
    return v


def _fmt(v):
    return f"{float(v):.12g}"


def _threads(args):
    if args.threads is not None:
        k = args.threads
    else:
        env = os.environ.get("QUADHULL_THREADS", "1")
        try:
            k = int(env)
        except ValueError:
            raise InvalidInputError(f"QUADHULL_THREADS must be an integer, got {env!r}") from None
    if k < 1:
        raise InvalidInputError("thread count must be at least 1")
    return k


def _load(args, validate=True):
    inst, config = load_instance(args.instance, validate=validate)
    if args.aggregate_linear:
        config = config.with_overrides({"aggregate_linear": True})
    return inst, config


def _build(inst, config):
    report = build_hull_report(inst, config)
    return report, socmodel.flatten(report.hull)


def _default_out(args, suffix):
    return Path(f"{Path(args.instance).stem}.hull.{suffix}")


def _write(path, text, out):
    Path(path).write_text(text)
    print(f"wrote {path}", file=out)


def _read_artifact(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from None
    return socmodel.import_cbf(text)


# --- commands ----------------------------------------------------------------------


def cmd_build(args, out):
    inst, config = _load(args)
    report, prog = _build(inst, config)
    for line in report.trace:
        print(line, file=out)
    for k, v in socmodel.stats(prog).items():
        print(f"{k}: {v}", file=out)
    suffix = "cbf" if args.format == "cbf" else "txt"
    _write(args.out or _default_out(args, suffix), socmodel.export_text(prog, args.format), out)
    return EXIT_OK


def cmd_export(args, out):
    inst, config = _load(args)
    objective = parse_vector(args.c, inst.n) if args.c is not None else None
    _, prog = _build(inst, config)
    text = socmodel.export_text(prog, args.format, objective)
    if args.out:
        Path(args.out).write_text(text)
    else:
        out.write(text)
    return EXIT_OK


def cmd_stats(args, out):
    inst, config = _load(args)
    report, prog = _build(inst, config)
    print(f"instance: {inst.name} (n={inst.n}, m={inst.P.m})", file=out)
    print(f"root: {report.trace[0].strip()}", file=out)
    print(f"nodes: {report.nodes}", file=out)
    for k, v in socmodel.stats(prog).items():
        print(f"{k}: {v}", file=out)
    return EXIT_OK


def cmd_optimize(args, out):
    inst, config = _load(args)
    c = parse_vector(args.c, inst.n)
    if args.from_artifact:
        prog = _read_artifact(args.from_artifact)
        if prog.n_original != inst.n:
            raise InvalidInputError(f"artifact has {prog.n_original} original variables, instance has {inst.n}")
        res = socmodel.optimize(prog, c, config)
    elif args.per_leaf:
        report = build_hull_report(inst, config)
        res = socmodel.support_per_leaf(report.hull, c, config, threads=_threads(args))
    else:
        _, prog = _build(inst, config)
        res = socmodel.optimize(prog, c, config)
    print(f"value: {_fmt(res.value)}", file=out)
    print("point: " + " ".join(_fmt(v) for v in res.point), file=out)
    return EXIT_OK


def cmd_sample_surface(args, out):
    inst, _ = _load(args)
    sample = oracle.sample_surface(inst, density=args.density, seed=args.seed)
    text = oracle.to_csv(sample)
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {len(sample)} points to {args.out}", file=out)
    else:
        out.write(text)
    return EXIT_OK


def _directions(n, k, seed):
    rng = np.random.default_rng(seed)
    D = rng.normal(size=(k, n))
    return D / np.linalg.norm(D, axis=1, keepdims=True)


def cmd_verify(args, out):
    inst, config = _load(args, validate=False)
    threads = _threads(args)
    lines = [f"verify {inst.name}: n={inst.n} seed={args.seed} objectives={args.objectives} samples={args.samples}"]
    failures = []

    def finish():
        lines.extend(f"violated: {f}" for f in failures)
        lines.append("FAIL" if failures else "PASS")
        out.write("\n".join(lines) + "\n")
        return EXIT_VERIFY_FAILED if failures else EXIT_OK

    try:
        inst.validate(config)
        report, prog = _build(inst, config)
    except InfeasibleError:
        sample = oracle.sample_surface(inst, density=args.density, seed=args.seed) if inst.P.m else None
        if sample is not None and not sample.empty:
            lines.append(f"build reported S empty; oracle found {len(sample)} points")
            failures.append("emptiness")
        else:
            lines.append("S is empty: nothing to verify")
        return finish()

    if args.artifact:
        try:
            prog = _read_artifact(args.artifact)
        except (InvalidInputError, ValueError, IndexError, KeyError) as exc:
            lines.append(f"artifact {args.artifact}: unreadable ({exc})")
            failures.append("artifact-format")
            return finish()
        if prog.n_original != inst.n:
            lines.append(f"artifact has {prog.n_original} original variables, instance has {inst.n}")
            failures.append("dimension")
            return finish()
        lines.append(f"artifact: {args.artifact}")
    st = socmodel.stats(prog)
    lines.append(f"hull: leaves={st['leaves']} variables={st['variables']} soc_blocks={st['soc_blocks']}")

    def run(fn, items):
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as ex:
                return list(ex.map(fn, items))
        return [fn(x) for x in items]

    # soundness: surface points must lie in the formulation
    sample = oracle.sample_surface(inst, density=args.density, seed=args.seed)
    points = oracle.subsample(sample, args.samples, seed=args.seed)
    member = run(lambda x: socmodel.membership(prog, x, config=config), points)
    worst = max((m.violation for m in member), default=0.0)
    bad = sum(not m.member for m in member)
    lines.append(f"membership: {len(points)} points, {bad} outside, max violation {worst:.3e} (tol {config.member_tol:.0e})")
    if bad:
        failures.append("soundness")

    # tightness: supports must match the brute-force oracle
    dirs = _directions(inst.n, args.objectives, args.seed)
    opt = run(lambda c: socmodel.optimize(prog, c, config).value, dirs)
    ref = [oracle.brute_max(inst, c, seed=args.seed).value for c in dirs]
    gaps = [abs(o - r) / (1.0 + abs(r)) for o, r in zip(opt, ref)]
    below = [r - o for o, r in zip(opt, ref)]
    lines.append(
        f"support: {len(dirs)} directions, max gap {max(gaps, default=0.0):.3e} (tol {SUPPORT_GAP_TOL:.0e}), "
        f"max shortfall {max(below, default=0.0):.3e} (tol {RELAXATION_TOL:.0e})"
    )
    if any(g > SUPPORT_GAP_TOL for g in gaps):
        failures.append("support-agreement")
    if any(b > RELAXATION_TOL * (1.0 + abs(r)) for b, r in zip(below, ref)):
        failures.append("relaxation")
    return finish()


# --- argument parsing ----------------------------------------------------------------


def _parser():
    p = argparse.ArgumentParser(
        prog="quadhull",
        description="Convex hulls of a quadratic equation over a polytope, as second-order cone programs.",
        epilog="Exit codes: 0 ok, 1 invalid input, 2 infeasible, 3 budget/capacity exceeded, "
        "4 unbounded polytope, 5 verification failed, 6 solver failure, 7 internal inconsistency.",
    )
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("instance", help="instance JSON file")
    common.add_argument("--aggregate-linear", action="store_true",
                        help="collapse all linear canonical coordinates into one before classifying")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for per-leaf optimization and verify (default: $QUADHULL_THREADS or 1)")
    common.add_argument("-v", "--verbose", action="store_true", help="log reduction details to stderr")
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    b = sub.add_parser("build", parents=[common], help="build the hull, print the trace and write the artifact")
    b.add_argument("--format", choices=("cbf", "text"), default="cbf", help="artifact format (default cbf)")
    b.add_argument("--out", help="artifact path (default <instance stem>.hull.cbf or .txt in the working directory)")
    b.set_defaults(func=cmd_build)

    o = sub.add_parser("optimize", parents=[common], help="maximize c'x over the hull")
    o.add_argument("--c", required=True, help="objective as comma-separated numbers; write --c=-1,0 for a leading minus")
    o.add_argument("--per-leaf", action="store_true", help="take the best leaf maximum instead of solving the flat program")
    o.add_argument("--from-artifact", metavar="PATH", help="optimize over a CBF artifact written by build")
    o.set_defaults(func=cmd_optimize)

    v = sub.add_parser("verify", parents=[common], help="check the hull against the sampling oracle")
    v.add_argument("--objectives", type=int, default=8, help="random unit directions to compare (default 8)")
    v.add_argument("--samples", type=int, default=200, help="surface points to test for membership (default 200)")
    v.add_argument("--seed", type=int, default=0, help="seed for directions and samples (default 0)")
    v.add_argument("--density", type=int, default=100, help="oracle grid density (default 100)")
    v.add_argument("--artifact", metavar="PATH", help="verify this CBF artifact instead of a fresh build")
    v.set_defaults(func=cmd_verify)

    e = sub.add_parser("export", parents=[common], help="write the flattened program")
    e.add_argument("--format", choices=("cbf", "text"), default="cbf", help="output format (default cbf)")
    e.add_argument("--out", help="output path (default stdout)")
    e.add_argument("--c", help="objective to include, comma-separated")
    e.set_defaults(func=cmd_export)

    s = sub.add_parser("stats", parents=[common], help="print program and recursion sizes")
    s.set_defaults(func=cmd_stats)

    ss = sub.add_parser("sample-surface", parents=[common], help="write oracle samples of S as CSV")
    ss.add_argument("--density", type=int, default=100, help="grid lines per coordinate (default 100)")
    ss.add_argument("--seed", type=int, default=0, help="grid offset seed (default 0)")
    ss.add_argument("--out", help="CSV path (default stdout)")
    ss.set_defaults(func=cmd_sample_surface)
    return p


def main(argv=None, out=None):
    """Entry point; returns the exit code."""
    out = sys.stdout if out is None else out
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(name)s: %(message)s", stream=sys.stderr)
    for name in ("objectives", "samples", "density"):
        if getattr(args, name, 1) < 1:
            print(f"quadhull: error: --{name} must be positive", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.func(args, out)
    except QuadHullError as exc:
        print(f"quadhull: error: {exc}", file=sys.stderr)
        return exit_code(exc)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
