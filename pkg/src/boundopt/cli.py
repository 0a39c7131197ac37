"""Command-line entry point: ``boundopt run|compare|figure|selftest``."""
import argparse
import json
import sys
from pathlib import Path

from .exceptions import BoundOptError, ConfigError, IncomparableRunsError, NumericError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_ACCEPTANCE = 4


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="boundopt", description="Bound-optimizer experiments and diagnostics.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("--config", required=True, type=Path)
    r.add_argument("--out", type=Path, help="run directory (default: $BOUNDOPT_OUT/<name>)")
    r.add_argument("--seed", type=int, help="data seed, overrides the config")
    r.add_argument("--no-diagnostics", action="store_true", help="skip rate-matrix and direction analysis")

    c = sub.add_parser("compare", help="tabulate iteration counts and speedups; the first run is the baseline")
    c.add_argument("runs", nargs="+", type=Path)
    c.add_argument("--out", type=Path, help="write the table as CSV here instead of stdout")

    f = sub.add_parser("figure", help="write plot-ready CSV files")
    f.add_argument("kind", choices=["fig1-quiver", "fig2-curves", "fig3-curves", "fig4-curves"])
    f.add_argument("runs", nargs="+", type=Path)
    f.add_argument("--out", type=Path, required=True)

    s = sub.add_parser("selftest", help="run the acceptance checks")
    s.add_argument("--only", help="comma-separated criterion numbers, e.g. 1,4,9")
    s.add_argument("--seed", type=int, help="accepted for symmetry; the checks use fixed seeds")
    s.add_argument("--config", type=Path, help="unused; accepted for a uniform flag set")
    s.add_argument("--out", type=Path, help="write the results as JSON here")
    return p


def _cmd_run(args) -> int:
    from .experiments import ExperimentSpec, run_experiment

    try:
        text = args.config.read_text()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {args.config} ({exc.strerror})") from None
    spec = ExperimentSpec.from_json(text)
    if args.seed is not None:
        spec = spec.with_seed(args.seed)
    outcome = run_experiment(spec, args.out, diagnose=not args.no_diagnostics)
    m = outcome.manifest
    print(f"{spec.name}: {m['status']} after {m['iterations']} iterations, "
          f"final objective {m['final_objective']!r} -> {outcome.directory}")
    return EXIT_OK


def _load(paths):
    from .experiments import load_manifest

    out = []
    for p in paths:
        try:
            out.append(load_manifest(p))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"runs: cannot load manifest from {p} ({exc})") from None
    return out


def _cmd_compare(args) -> int:
    from .experiments import compare_runs, comparison_to_csv

    table = comparison_to_csv(compare_runs(_load(args.runs)))
    if args.out:
        args.out.write_text(table)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def _cmd_figure(args) -> int:
    from .experiments import emit_figure_data

    for p in emit_figure_data(args.kind, _load(args.runs), args.out):
        print(p)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .acceptance import CRITERIA, run_criteria

    only = None
    if args.only:
        try:
            only = [int(x) for x in args.only.split(",") if x.strip()]
        except ValueError:
            raise ConfigError(f"--only: expected comma-separated integers, got {args.only!r}") from None
        bad = [k for k in only if k not in CRITERIA]
        if bad:
            raise ConfigError(f"--only: unknown criteria {bad}")
    results = run_criteria(only, echo=True)
    if args.out:
        args.out.write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n")
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


COMMANDS = {"run": _cmd_run, "compare": _cmd_compare, "figure": _cmd_figure, "selftest": _cmd_selftest}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, IncomparableRunsError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, BoundOptError, ArithmeticError) as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
