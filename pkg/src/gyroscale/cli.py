"""Command-line entry point: ``gyroscale {check,run,sweep,report}``.

Exit codes: 0 when every check passes, 1 on an acceptance failure (or a
warning under ``--strict``), 2 on usage or configuration errors.
"""

from __future__ import annotations

import argparse
import sys
import time
import warnings
from pathlib import Path

from . import config as config_mod
from .checks import property_suite
from .config import EXPERIMENTS, ConfigError, load_config
from .experiments import run_experiment
from .parallel import executor_for, resolve_threads
from .report import MixedHashError, read_reports, render_table, write_report

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
SWEEP_BUDGET_S = 15 * 60


class BudgetWarning(RuntimeWarning):
    """A sweep exceeded the desk wall-time budget."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        print("\nScenario file schema:\n" + config_mod.__doc__, file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: all cores; GYROSCALE_THREADS overrides)")
    common.add_argument("--out", default=None, help="output directory (default: scenario output_dir)")
    common.add_argument("--format", choices=("csv", "json", "both"), default="both")
    common.add_argument("--strict", action="store_true", help="treat warnings as errors")
    common.add_argument("--timings", action="store_true",
                        help="record wall times (outputs are then not byte-reproducible)")

    p = _Parser(prog="gyroscale", description="Strong-magnetic-field Vlasov asymptotics harness.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("check", parents=[common], help="projector and rotation property suite")
    run = sub.add_parser("run", parents=[common], help="run one experiment of a scenario")
    run.add_argument("config")
    run.add_argument("--experiment", choices=EXPERIMENTS, default=None,
                     help="override the scenario's experiment")
    sw = sub.add_parser("sweep", parents=[common], help="run every experiment of a scenario")
    sw.add_argument("config")
    rp = sub.add_parser("report", parents=[common], help="render the JSON reports of a directory")
    rp.add_argument("directory")
    return p


def _print_report(rep):
    print(f"{rep.experiment}: {rep.status} (config {rep.config_hash})")
    for name, fit in rep.slopes.items():
        print(f"  slope[{name}] = {fit['slope']:.4f}, log residual {fit['residual']:.4f}")
    for c in rep.checks:
        print(f"  {'PASS' if c.passed else 'FAIL'} {c.name}: {c.detail}")


def _cmd_check(args):
    ok = True
    for res in property_suite():
        print(res.line())
        ok &= res.passed
    return EXIT_OK if ok else EXIT_FAIL


def _run(args, names):
    cfg = load_config(args.config)
    out = Path(args.out if args.out is not None else cfg.output_dir)
    threads = resolve_threads(args.threads)
    ok = True

    def flush(rep):
        write_report(rep, out, args.format, args.timings)

    start = time.perf_counter()
    with executor_for(threads) as ex:
        for name in names:
            rep = run_experiment(name, cfg, ex, on_partial=flush)
            flush(rep)
            _print_report(rep)
            ok &= rep.passed
    elapsed = time.perf_counter() - start
    if len(names) > 1 and elapsed > SWEEP_BUDGET_S:
        warnings.warn(f"sweep took {elapsed:.0f} s, over the {SWEEP_BUDGET_S} s budget", BudgetWarning)
    return EXIT_OK if ok else EXIT_FAIL


def _cmd_report(args):
    reports = read_reports(args.directory)
    print(render_table(reports))
    return EXIT_OK if all(d["status"] in ("pass", "degenerate-exact") for d in reports) else EXIT_FAIL


def main(argv=None):
    """Run the CLI and return the exit code."""
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    with warnings.catch_warnings():
        if args.strict:
            warnings.simplefilter("error")
        try:
            if args.command == "check":
                return _cmd_check(args)
            if args.command == "report":
                return _cmd_report(args)
            if args.command == "run":
                cfg_name = args.experiment or load_config(args.config).experiment
                return _run(args, [cfg_name])
            return _run(args, list(EXPERIMENTS))
        except (FileNotFoundError, ConfigError, MixedHashError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            if isinstance(exc, ConfigError):
                print("\nScenario file schema:\n" + config_mod.__doc__, file=sys.stderr)
            return EXIT_USAGE
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        except Warning as exc:
            print(f"error (strict): {exc}", file=sys.stderr)
            return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
