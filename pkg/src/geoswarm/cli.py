"""Command-line entry point.

    geoswarm <simulate|analyze|control|oracle> --config PATH [--out DIR] [--quiet]

``--config`` takes a scenario file, or the name of a bundled scenario
(``geoswarm analyze --config fig6_striction``).  Exit status is 0 on
success, 1 for parse/validation errors and 2 for numerical failures.
"""

import argparse
import logging
import sys
from pathlib import Path

from .config import load_config, scenario_path, shipped_scenarios
from .errors import InputError, NumericalError
from .runner import COMMANDS, run_sweep

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2


def build_parser():
    parser = argparse.ArgumentParser(
        prog="geoswarm",
        description="Swarm formation on a potential manifold: simulation, curvature estimation and DMD control.",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument(
        "--config", required=True,
        help="scenario YAML file, or a bundled scenario name (%s)" % ", ".join(shipped_scenarios()),
    )
    parser.add_argument("--out", help="output directory (overrides output.directory)")
    parser.add_argument("--quiet", action="store_true", help="print nothing on success")
    return parser


def _resolve(config):
    p = Path(config)
    if p.suffix in (".yaml", ".yml") or p.exists():
        return p
    return scenario_path(config)


def _summary(report):
    lines = [f"{report.command} {report.scenario or '-'} [{report.scenario_hash[:12]}] {report.wall_clock_s:.2f}s"]
    for kind, path in report.files.items():
        lines.append(f"  {kind}: {path}")
    if report.stats and "mean_pct" in report.stats:
        s = report.stats
        lines.append(
            f"  pct_error mean {s['mean_pct']:.4g}  range [{s['min']:.4g}, {s['max']:.4g}]"
            f"  samples {s['samples']}  excluded {s['excluded']}"
        )
    if report.odmd:
        for name, o in report.odmd.items():
            lines.append(
                f"  {name}: max rel error {o['max_rel_error']:.3%}  mean {o['mean_rel_error']:.3%}"
                f"  fallback steps {o['fallback_steps']}"
            )
    for note in report.notes:
        lines.append(f"  note: {note}")
    return "\n".join(lines)


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(_resolve(args.config))
        reports = run_sweep(args.command, cfg, args.out)
    except InputError as exc:
        print(f"geoswarm: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"geoswarm: numerical failure in {args.config}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.quiet:
        for r in reports:
            print(_summary(r))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
