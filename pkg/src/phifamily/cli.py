"""Command-line entry point: ``phifamily <experiment> [--config FILE] [--out FILE]``."""

from __future__ import annotations

import argparse
import logging
import sys

import yaml
from pydantic import ValidationError

from .config import EXPERIMENTS, load_config
from .errors import PhiFamilyError
from .runner import ExpressionError, emit_csv, render_csv, run

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="phifamily", description=__doc__)
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="YAML or JSON experiment file")
        p.add_argument("--out", help="CSV destination (default: config output_path, else stdout)")
        p.add_argument("--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log = logging.getLogger("phifamily")
    try:
        cfg = load_config(args.config)
    except (OSError, yaml.YAMLError, ValidationError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run(cfg, args.experiment)
    except (ExpressionError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PhiFamilyError as exc:
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    out = args.out or cfg.output_path
    try:
        if out:
            emit_csv(table, out)
        else:
            sys.stdout.write(render_csv(table))
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    verdict = table.metadata.get("verdict", "")
    print(f"{args.experiment}: {len(table.rows)} rows"
          + (f", verdict {verdict}" if verdict else "")
          + (f" -> {out}" if out else ""), file=sys.stderr)
    log.debug("metadata: %s", table.metadata)
    return EXIT_OK if table.ok else EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
