"""``mnadec`` command line: check, decouple, init, simulate.

Exit codes: 0 success, 1 verification failure, 2 input error, 3 numerical
failure.  ``MNADEC_LOG`` (error, warning, info, debug) sets the log level.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .basis import build_split_chain
from .decouple import assemble
from .errors import (
    AssumptionViolation,
    DimensionMismatch,
    NetlistError,
    NewtonDivergence,
    NumericalFailure,
    SingularStageMatrix,
)
from .graph import incidence_reduced
from .io import write_matrix
from .netlist import load_netlist
from .numeric import INTEGRATORS, SolverConfig, consistent_initial_conditions, integrate
from .verify import verify_circuit

__all__ = ["CommandOutcome", "main", "build_parser"]

log = logging.getLogger("mnadec")

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3


@dataclass
class CommandOutcome:
    exit_code: int = EXIT_OK
    artifacts: list = field(default_factory=list)


def _configure_logging():
    level = os.environ.get("MNADEC_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _write(path, text, outcome):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)
        outcome.artifacts.append(str(path))


def cmd_check(args) -> CommandOutcome:
    out = CommandOutcome()
    c = load_netlist(args.netlist, order=args.order)
    report = verify_circuit(c)
    if args.json is not None:
        _write(args.json, report.to_json(), out)
    if report.passed:
        print(f"{c.name or args.netlist}: all decoupling assumptions hold")
    else:
        for v in report.violations:
            print(f"{v.code}: {v.message}")
        out.exit_code = EXIT_VERIFY
    return out


def cmd_decouple(args) -> CommandOutcome:
    out = CommandOutcome()
    c = load_netlist(args.netlist, order=args.order)
    report = verify_circuit(c)
    if not report.passed:
        for v in report.violations:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        out.exit_code = EXIT_VERIFY
        return out
    chain = build_split_chain(c)
    system = assemble(c, chain, report)
    outdir = Path(args.outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    files = {"A": "A.mtx"}
    write_matrix(outdir / "A.mtx", incidence_reduced(c))
    for name, m in chain.matrices().items():
        path = outdir / f"{name}.mtx"
        write_matrix(path, m)
        files[name] = path.name
    desc = system.description()
    desc["matrices"] = files
    desc["chain"] = chain.summary()
    desc["order"] = args.order
    for name, text in (("system.json", json.dumps(desc, indent=2, sort_keys=True) + "\n"),
                       ("partition.json",
                        json.dumps(system.partition.to_dict(), indent=2, sort_keys=True) + "\n")):
        (outdir / name).write_text(text)
    out.artifacts = [str(outdir / f) for f in sorted(files.values())] + \
        [str(outdir / "system.json"), str(outdir / "partition.json")]
    print(f"wrote {len(out.artifacts)} files to {outdir}")
    return out


def _parse_x0(spec, system):
    """``zeros``, inline ``a,b,...`` or a CSV file (optional header of x names)."""
    if spec is None or spec == "zeros":
        return np.zeros(system.nx)
    p = Path(spec)
    if p.exists():
        rows = [r for r in csv.reader(p.read_text().splitlines()) if r]
        if not rows:
            raise DimensionMismatch(f"{spec}: empty x0 file")
        if len(rows) >= 2:
            header, values = rows[0], rows[1]
            names = list(system.partition.x_names)
            if sorted(h.strip() for h in header) == sorted(names):
                pos = {h.strip(): float(v) for h, v in zip(header, values)}
                return np.array([pos[n] for n in names])
            values = rows[-1]
        else:
            values = rows[0]
    else:
        values = spec.split(",") if spec.strip() else []
    try:
        x0 = np.array([float(v) for v in values], dtype=float)
    except ValueError:
        raise DimensionMismatch(f"cannot read x0 from {spec!r}") from None
    if x0.size != system.nx:
        raise DimensionMismatch(f"x0 has {x0.size} entries, expected {system.nx}")
    return x0


def _load_system(args, out):
    c = load_netlist(args.netlist, order=args.order)
    report = verify_circuit(c)
    if not report.passed:
        for v in report.violations:
            print(f"{v.code}: {v.message}", file=sys.stderr)
        out.exit_code = EXIT_VERIFY
        return None
    return assemble(c, report=report)


def cmd_init(args) -> CommandOutcome:
    out = CommandOutcome()
    system = _load_system(args, out)
    if system is None:
        return out
    cfg = SolverConfig(newton_tol=args.tol, newton_max_iter=args.max_iter)
    x0 = _parse_x0(args.x0, system)
    x, y, z = consistent_initial_conditions(system, x0, args.t0, cfg)
    res = float(np.max(np.abs(system.mna_residual(x, y, z, args.t0)), initial=0.0))
    p = system.partition
    doc = {
        "t0": args.t0,
        "x": dict(zip(p.x_names, x.tolist())),
        "y": dict(zip(p.y_names, y.tolist())),
        "z": dict(zip(p.z_names, z.tolist())),
        "order": {"x": list(p.x_names), "y": list(p.y_names), "z": list(p.z_names)},
        "mna_residual_inf": res,
    }
    _write(args.out, json.dumps(doc, indent=2) + "\n", out)
    print(f"mna residual inf-norm: {res:.3e}", file=sys.stderr if args.out in (None, "-")
          else sys.stdout)
    return out


def cmd_simulate(args) -> CommandOutcome:
    out = CommandOutcome()
    system = _load_system(args, out)
    if system is None:
        return out
    cfg = SolverConfig(newton_tol=args.tol, newton_max_iter=args.max_iter, h=args.h,
                       integrator=args.integrator)
    x0 = _parse_x0(args.x0, system)
    fmt = args.format or ("json" if str(args.out).endswith(".json") else "csv")
    try:
        traj = integrate(system, x0, args.t0, args.t_end, cfg)
    except NewtonDivergence as exc:
        if exc.trajectory is not None and len(exc.trajectory):
            _emit_trajectory(exc.trajectory, args.out, fmt, out)
        raise
    _emit_trajectory(traj, args.out, fmt, out)
    worst = max(traj.mna_residual)
    print(f"{len(traj)} states, max mna residual {worst:.3e}",
          file=sys.stderr if args.out in (None, "-") else sys.stdout)
    return out


def _emit_trajectory(traj, path, fmt, out):
    _write(path, traj.to_json() if fmt == "json" else traj.to_csv(), out)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="mnadec", description=(
        "Topological decoupling of MNA circuit equations into a semi-explicit index-1 DAE."))
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("netlist", help="netlist file")
        p.add_argument("--order", choices=("file", "paper-example"), default="file",
                       help="node ordering: first appearance (default) or natural numeric")

    p = sub.add_parser("check", help="verify the decoupling assumptions")
    common(p)
    p.add_argument("--json", nargs="?", const="-", default=None,
                   help="write the verification report as JSON (to stdout without a path)")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("decouple", help="write chain matrices and the system description")
    common(p)
    p.add_argument("--outdir", required=True)
    p.set_defaults(func=cmd_decouple)

    def numeric_opts(p):
        p.add_argument("--x0", default="zeros",
                       help="'zeros', comma separated values, or a CSV file")
        p.add_argument("--t0", type=float, default=0.0)
        p.add_argument("--out", default=None, help="output file (stdout if omitted)")
        p.add_argument("--tol", type=float, default=1e-10, help="Newton residual tolerance")
        p.add_argument("--max-iter", type=int, default=50)

    p = sub.add_parser("init", help="consistent initial values")
    common(p)
    numeric_opts(p)
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("simulate", help="fixed-step transient simulation")
    common(p)
    numeric_opts(p)
    p.add_argument("--t-end", type=float, required=True)
    p.add_argument("--h", type=float, required=True)
    p.add_argument("--integrator", choices=INTEGRATORS, default="implicit-euler")
    p.add_argument("--format", choices=("csv", "json"), default=None)
    p.set_defaults(func=cmd_simulate)
    return ap


def run(argv=None) -> CommandOutcome:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (AssumptionViolation, SingularStageMatrix) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandOutcome(EXIT_VERIFY)
    except NewtonDivergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        if exc.iterate is not None:
            print("last iterate: " + json.dumps(np.asarray(exc.iterate).tolist()),
                  file=sys.stderr)
        return CommandOutcome(EXIT_NUMERIC)
    except NumericalFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandOutcome(EXIT_NUMERIC)
    except (NetlistError, DimensionMismatch, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return CommandOutcome(EXIT_INPUT)


def main(argv=None) -> int:
    _configure_logging()
    return run(argv).exit_code


if __name__ == "__main__":
    sys.exit(main())
