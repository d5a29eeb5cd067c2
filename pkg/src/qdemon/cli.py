"""Command-line entry point ``demon``.

Exit codes: 0 success, 1 configuration error (including an exact-solver horizon
beyond the recurrence time), 2 numerical failure budget exceeded, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from .errors import ConfigError, DemonError, HorizonExceeded
from .sweep import FAILURE_BUDGET, SOLVER_CHOICES, execute, load_run_config

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3
COMMANDS = {"trace": "trace", "tau-scan": "tau_scan", "grid": "grid",
            "zeno-check": "zeno_check", "benchmark": "benchmark"}

log = logging.getLogger("qdemon")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="demon", description="Feedback-controlled SET sweeps.")
    p.add_argument("command", choices=list(COMMANDS))
    p.add_argument("--config", required=True, help="TOML run configuration")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--solver", choices=SOLVER_CHOICES, default=None)
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        rc = load_run_config(args.config, COMMANDS[args.command])
        overrides = {}
        if args.workers is not None:
            if args.workers < 1:
                raise ConfigError("--workers must be >= 1")
            overrides["workers"] = args.workers
        if args.solver is not None:
            overrides["solver"] = args.solver
        if overrides:
            rc = replace(rc, **overrides)
        result = execute(rc, args.out)
    except (ConfigError, HorizonExceeded) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    except DemonError as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    for f in result.files:
        log.info("wrote %s", f)
    if result.budget_exceeded:
        log.error("%d of %d points failed (budget %.0f%%)", result.n_failed, result.n_points,
                  100 * FAILURE_BUDGET)
        return EXIT_NUMERIC
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
