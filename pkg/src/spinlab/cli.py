"""``spinlab`` command-line entry point."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys
import time

from . import __version__
from .config import ConfigError, FORMATS, load_config, parse_config_text
from .experiments import NOISE_EXPERIMENTS, run

EXIT_OK, EXIT_CONFIG, EXIT_VERIFY = 0, 2, 3

# subcommand -> accepted experiment names (first is the default)
COMMANDS = {
    "sensitivity-vs-chit": ("sensitivity-vs-chit",),
    "noise-scans": ("maxcfi-vs-sigma", "sensitivity-vs-sigma"),
    "histograms": ("histograms",),
    "fixed-T": ("fixed-T",),
    "verify-theorem": ("verify-theorem",),
}
assert set(NOISE_EXPERIMENTS) == set(COMMANDS["noise-scans"])

log = logging.getLogger("spinlab")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spinlab", description=__doc__)
    parser.add_argument("--version", action="version", version=f"spinlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")
    for name, experiments in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {' / '.join(experiments)} scan")
        p.add_argument("--config", help="key = value scan config (defaults are used when omitted)")
        p.add_argument("--out", help="output file (default: output.path from the config, else stdout)")
        p.add_argument("--format", choices=FORMATS, help="output format (default: output.format or csv)")
        p.add_argument("--seed", type=int, help="random seed (verify-theorem)")
        p.add_argument("--threads", type=int, help="worker threads (default: $SPINLAB_THREADS or 1)")
        p.add_argument("--timing", action="store_true", help="record wall time in the metadata")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def _threads(arg: int | None) -> int:
    if arg is None:
        env = os.environ.get("SPINLAB_THREADS", "").strip()
        if not env:
            return 1
        try:
            arg = int(env)
        except ValueError:
            raise ConfigError(f"SPINLAB_THREADS must be an integer, got {env!r}", source="environment") from None
    if arg < 1:
        raise ConfigError(f"thread count must be >= 1, got {arg}", source="arguments")
    return arg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    allowed = COMMANDS[args.command]
    try:
        if args.config:
            cfg = load_config(args.config, allowed)
        else:
            cfg = parse_config_text("", source="<defaults>", experiment=allowed)
        overrides = {}
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("seed must be a non-negative integer", source="arguments")
            overrides["seed"] = args.seed
        if args.out:
            overrides["output_path"] = args.out
        if args.format:
            overrides["output_format"] = args.format
        cfg = dataclasses.replace(cfg, **overrides)
        threads = _threads(args.threads)
    except (ConfigError, OSError) as exc:
        print(f"spinlab: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    log.info("running %s with %d thread(s)", cfg.experiment, threads)
    start = time.perf_counter()
    table = run(cfg, threads)
    if args.timing:
        table.metadata["wall_time_s"] = round(time.perf_counter() - start, 3)
    text = table.render(cfg.output_format)
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        log.info("wrote %s", cfg.output_path)
    else:
        sys.stdout.write(text)

    results = table.metadata.get("results", {})
    if cfg.experiment == "verify-theorem" and not results.get("passed", False):
        report = {"status": "failed", "max_relative_deviation": results["max_relative_deviation"],
                  "tolerance": results["tolerance"], "violations": results["violations"],
                  "falsification": results["falsification"]}
        print(json.dumps(report, indent=1), file=sys.stderr)
        return EXIT_VERIFY
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
