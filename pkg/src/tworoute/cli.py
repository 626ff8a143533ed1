"""Command-line entry point: ``tworoute <subcommand> ...``.

Exit codes: 0 success, 1 invalid input (parse or validation failure), 2 a
verification check or internal consistency check failed, 64 usage error.
Diagnostics go to standard error; data goes to files or standard output.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .analysis import grenoble_scenario, make_grid, sweep
from .equilibrium import ConvergenceError, InconsistencyError, active_equilibrium, general_equilibrium
from .integrate import default_dt, default_horizon, integrate
from .model import DomainError
from .plots import CHANNELS, emit_svg
from .scenario_io import ScenarioFileError, parse_scenario
from .verify import CHECKS, run_checks

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_VERIFY = 2
EXIT_USAGE = 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated numbers, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise argparse.ArgumentTypeError(f"not numeric: {text!r}") from None


def _write_text(text: str, out):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tworoute", description="Two-route traffic model with partial app routing.")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)

    s = sub.add_parser("simulate", help="integrate the ODE from one initial state")
    s.add_argument("--scenario", required=True, type=Path)
    s.add_argument("--x0", required=True, type=_pair, help="initial densities x1,x2 [veh/km]")
    s.add_argument("--horizon", type=float, help="final time [h]; default scales with the slowest rate")
    s.add_argument("--dt", type=float, help="step [h]; default from a Lipschitz bound")
    s.add_argument("--out", type=Path, help="CSV path (default: standard output)")
    s.add_argument("--locate-events", action="store_true",
                   help="refine samples at mode switches")
    s.add_argument("--allow-invalid", action="store_true",
                   help="simulate even when the standing assumptions fail")

    e = sub.add_parser("equilibrium", help="compute the unique equilibrium")
    e.add_argument("--scenario", required=True, type=Path)
    e.add_argument("--general", action="store_true", help="use the numeric solver")
    e.add_argument("--out", type=Path, help="JSON path (default: standard output)")

    w = sub.add_parser("sweep", help="equilibrium along a parameter grid")
    w.add_argument("--scenario", required=True, type=Path)
    w.add_argument("--vary", required=True, choices=("alpha", "phi"))
    w.add_argument("--from", dest="start", required=True, type=float)
    w.add_argument("--to", dest="stop", required=True, type=float)
    w.add_argument("--step", required=True, type=float)
    w.add_argument("--out", type=Path, help="CSV path (default: standard output)")
    w.add_argument("--svg", type=Path,
                   help="directory or file stem for split/J/unsat charts")

    v = sub.add_parser("verify", help="run numerical property checks")
    v.add_argument("--scenario", required=True, type=Path)
    v.add_argument("--checks", help=f"comma-separated subset of {','.join(CHECKS)}")
    v.add_argument("--seed", type=int, default=0)

    c = sub.add_parser("case-study", help="reproduce the Grenoble penetration-rate study")
    c.add_argument("--phi", required=True, type=int, choices=(2000, 3000))
    c.add_argument("--out", required=True, type=Path, help="output directory")
    return p


def _svg_paths(target: Path, vary: str) -> dict[str, Path]:
    if target.suffix.lower() == ".svg":
        stem = target.with_suffix("")
        return {ch: stem.with_name(f"{stem.name}_{ch}.svg") for ch in CHANNELS}
    target.mkdir(parents=True, exist_ok=True)
    return {ch: target / f"sweep_{vary}_{ch}.svg" for ch in CHANNELS}


def _simulate(args) -> int:
    scn = parse_scenario(args.scenario, validate=not args.allow_invalid)
    dt = args.dt if args.dt is not None else default_dt(scn)
    horizon = args.horizon if args.horizon is not None else default_horizon(scn, 1e-6)
    if not (dt > 0 and horizon > 0):
        raise UsageError("--dt and --horizon must be positive")
    traj = integrate(scn, args.x0, horizon, dt, locate_events=args.locate_events,
                     allow_invalid=args.allow_invalid)
    text = traj.to_csv()
    _write_text(text, args.out)
    return EXIT_OK


def _equilibrium(args) -> int:
    scn = parse_scenario(args.scenario)
    rep = general_equilibrium(scn) if args.general else active_equilibrium(scn)
    _write_text(rep.to_json(indent=2) + "\n", args.out)
    return EXIT_OK


def _run_sweep(scn, vary, grid, out, svg):
    res = sweep(scn, vary, grid)
    text = res.to_csv()
    _write_text(text, out)
    if out is not None:
        Path(out).with_suffix(".thresholds.json").write_text(res.sidecar_json(indent=2) + "\n")
    if svg is not None:
        for ch, path in _svg_paths(svg, vary).items():
            emit_svg(res, ch, path)
    return res


def _sweep(args) -> int:
    scn = parse_scenario(args.scenario)
    try:
        grid = make_grid(args.start, args.stop, args.step)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _run_sweep(scn, args.vary, grid, args.out, args.svg)
    return EXIT_OK


def _verify(args) -> int:
    scn = parse_scenario(args.scenario)
    names = list(CHECKS) if args.checks is None else [n.strip() for n in args.checks.split(",")]
    unknown = [n for n in names if n not in CHECKS]
    if unknown:
        raise UsageError(f"unknown checks {unknown}; known: {list(CHECKS)}")
    reports = run_checks(scn, names, seed=args.seed)
    sys.stdout.write(json.dumps([r.to_dict() for r in reports], indent=2) + "\n")
    for r in reports:
        print(f"{r.name}: {r.status} (worst margin {r.worst_margin:.3g} {r.margin_units})",
              file=sys.stderr)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_VERIFY


def _case_study(args) -> int:
    out = args.out
    out.mkdir(parents=True, exist_ok=True)
    scn = grenoble_scenario(float(args.phi))
    grid = make_grid(0.0, 1.0, 0.01)
    _run_sweep(scn, "alpha", grid, out / f"case_study_phi{args.phi}.csv", out)
    return EXIT_OK


_COMMANDS = {
    "simulate": _simulate,
    "equilibrium": _equilibrium,
    "sweep": _sweep,
    "verify": _verify,
    "case-study": _case_study,
}


def main(argv=None) -> int:
    """Run the CLI and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return _COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tworoute: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ScenarioFileError, DomainError) as exc:
        print(f"tworoute: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"tworoute: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (InconsistencyError, ConvergenceError) as exc:
        print(f"tworoute: numerical check failed: {exc}", file=sys.stderr)
        return EXIT_VERIFY


if __name__ == "__main__":
    sys.exit(main())
