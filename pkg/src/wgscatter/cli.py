"""Command-line entry point.

Verbs: ``run`` (one configured simulation), ``sweep`` (a parameter ladder
with a resumable journal), ``calibrate`` (coupling calibration record),
``validate`` (config check only).  Exit codes: 0 success, 2 configuration
error, 3 numerical failure, 4 sweep finished with failed points.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import (
    ConfigError,
    SWEEPABLE_PARAMETERS,
    apply_overrides,
    build_config,
    read_sections,
    serialize_config,
)
from .core import SimulationError
from .runner import calibrate_run, run, sweep

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_PARTIAL = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wgscatter",
        description="Two-photon scattering on a waveguide-coupled two-level "
                    "emitter: exact time-domain dynamics and observables.")
    sub = parser.add_subparsers(dest="verb", required=True)

    def common(p, outdir=True):
        p.add_argument("-c", "--config", required=True, help="path to the run config")
        if outdir:
            p.add_argument("-o", "--outdir", required=True, help="output directory")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config entry (repeatable)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker process count (sweep points)")

    common(sub.add_parser("run", help="execute one simulation"))
    p_sweep = sub.add_parser("sweep", help="run a parameter ladder")
    common(p_sweep)
    p_sweep.add_argument("--parameter", required=True, choices=SWEEPABLE_PARAMETERS)
    p_sweep.add_argument("--values", required=True,
                         help="comma-separated values ('inf' allowed for sigma_p)")
    common(sub.add_parser("calibrate", help="calibrate the coupling for the grid"))
    common(sub.add_parser("validate", help="parse and validate the config"),
           outdir=False)
    return parser


def _load_config(args):
    text = Path(args.config).read_text(encoding="utf-8")
    sections = read_sections(text)
    apply_overrides(sections, args.set)
    return build_config(sections)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        if args.verb == "validate":
            sys.stdout.write(serialize_config(cfg))
            return EXIT_OK
        if args.verb == "run":
            result = run(cfg, args.outdir)
            for key, value in result.report.items():
                print(f"{key} = {value!r}")
            return EXIT_OK
        if args.verb == "calibrate":
            calib = calibrate_run(cfg, args.outdir)
            print(f"g = {calib.g!r} (fitted rate {calib.fitted_rate!r}, "
                  f"residual {calib.fit_residual:.3e})")
            return EXIT_OK
        # sweep
        values = [v.strip() for v in args.values.split(",") if v.strip()]
        failures = sweep(cfg, args.parameter, values, args.outdir,
                         workers=args.workers)
        if failures:
            print(f"sweep finished with {failures} failed point(s)", file=sys.stderr)
            return EXIT_PARTIAL
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
