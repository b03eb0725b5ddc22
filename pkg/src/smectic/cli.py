"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, parse_config
from .output import CsvSink, SummarySink, VtkSink, ensure_dir
from .timestepping import run

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# flag dest -> config key
_FLAG_KEYS = {"scheme": "scheme", "nx": "nx", "dt": "dt", "t_end": "t_end",
              "out_every": "out_every", "out_dir": "out_dir"}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError([message])


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smectic",
                description="Smectic-A flow simulator: writes energy.csv and VTK snapshots.")
    p.add_argument("--config", metavar="PATH", help="key = value configuration file")
    p.add_argument("--out-dir", metavar="PATH", help="output directory (default: output)")
    p.add_argument("--scheme", metavar="od2|mp", help="potential approximation")
    p.add_argument("--nx", metavar="N", help="mesh cells per side")
    p.add_argument("--dt", metavar="K", help="time step")
    p.add_argument("--t-end", metavar="T", help="final time")
    p.add_argument("--out-every", metavar="N", help="snapshot every N steps (0 disables)")
    p.add_argument("--override-solvability", action="store_true",
                   help="run OD2 even when dt >= 2 epsilon^2 / gamma")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    return p


def load_config(args):
    text = ""
    if args.config is not None:
        try:
            with open(args.config) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError([f"cannot read config file {args.config}: {exc.strerror}"]) from None
    overrides = {key: getattr(args, dest) for dest, key in _FLAG_KEYS.items()
                 if getattr(args, dest) is not None}
    if args.override_solvability:
        overrides["override_solvability"] = "true"
    return parse_config(text, overrides)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print(parser.format_usage(), end="", file=sys.stderr)
        return EXIT_CONFIG

    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG

    csv_sink = summary = None
    try:
        out = ensure_dir(cfg.out_dir)
        csv_sink, summary = CsvSink(out / "energy.csv"), SummarySink()
        sinks = [csv_sink, summary]
        if cfg.snapshots and cfg.params.out_every > 0:
            sinks.append(VtkSink(out))
        run(cfg.params, sinks, initial_phi=cfg.initial_phi,
            override_solvability=cfg.override_solvability)
    except Exception as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    finally:
        if csv_sink is not None:
            csv_sink.close()

    for line in summary.lines():
        print(line)
    print(f"energy series: {csv_sink.path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
