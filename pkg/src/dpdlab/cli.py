"""Command line entry point: ``dpdlab run <config>`` and ``dpdlab validate <config>``."""

import argparse
from dataclasses import replace
import logging
import sys

from .experiments import ConfigParseError, load_config, run_experiment, validate_config


def _load(path, args):
    """Parse ``path`` and apply command line overrides; print diagnostics on failure."""
    try:
        cfg = load_config(path)
    except OSError as err:
        print(f"{path}: {err.strerror}", file=sys.stderr)
        return None
    except ConfigParseError as err:
        for d in err.diagnostics:
            print(f"{path}: {d}", file=sys.stderr)
        return None
    if getattr(args, "output_dir", None):
        cfg = replace(cfg, output_dir=args.output_dir)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    diags = validate_config(cfg)
    for d in diags:
        print(f"{path}: {d}", file=sys.stderr)
    return None if diags else cfg


def cmd_validate(args):
    cfg = _load(args.config, args)
    if cfg is None:
        return 2
    print(f"{args.config}: ok ({cfg.experiment})")
    return 0


def cmd_run(args):
    cfg = _load(args.config, args)
    if cfg is None:
        return 2
    result = run_experiment(cfg, jobs=args.jobs, timestamp=not args.no_timestamp)
    for e in result.errors:
        print(f"error: {e}", file=sys.stderr)
    if result.status == 0:
        print(f"wrote {result.summary_path}")
    return result.status


def build_parser():
    parser = argparse.ArgumentParser(prog="dpdlab",
                                     description="Adaptive DPD simulation experiments.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--output-dir", help="override [experiment] output_dir")
    run.add_argument("--seed", type=int, help="override [experiment] seed")
    run.add_argument("--jobs", type=int, default=1, help="parallel sweep points")
    run.add_argument("--no-timestamp", action="store_true",
                     help="omit the generated-at line so reruns are byte-identical")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    val.add_argument("--seed", type=int)
    val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if getattr(args, "jobs", 1) < 1:
        print("--jobs must be >= 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
