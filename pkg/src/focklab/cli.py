"""Command-line entry point.

Subcommands: hartree, product-scan, coherent-scan, fluctuation-suite,
coeff-suite, all.  Each takes --config, --out, --threads and --seed.

Exit codes: 0 success; 1 configuration error; 2 capacity error; 3 a
tolerance violation (flagged rows or recorded probe failures) in a run.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import load_config
from .errors import CapacityError, ConfigError, FockLabError
from .experiments import (
    COEFFICIENT_FILES,
    FLUCTUATION_FILES,
    emit_rate_csv,
    emit_suite_csvs,
    emit_trajectory_csv,
    run_coefficient_suite,
    run_coherent_rate_scan,
    run_fluctuation_suite,
    run_hartree_trajectory,
    run_product_rate_scan,
)

COMMANDS = ("hartree", "product-scan", "coherent-scan", "fluctuation-suite", "coeff-suite", "all")


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="focklab",
        description="Mean-field boson dynamics laboratory on a truncated lattice Fock space",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, desc in (
        ("hartree", "integrate the Hartree equation and export the trajectory"),
        ("product-scan", "marginal convergence rate for product initial states"),
        ("coherent-scan", "marginal convergence rate for coherent initial states"),
        ("fluctuation-suite", "number growth, dynamics gaps, parity and identity probes"),
        ("coeff-suite", "coefficient tables, partial-sum identity, reconstruction, remainder"),
        ("all", "run every suite"),
    ):
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to the JSON experiment config")
        p.add_argument("--out", default="out", help="output directory for CSV files")
        p.add_argument("--threads", type=int, default=None, help="parallel worker count")
        p.add_argument(
            "--seed", type=int, default=0,
            help="seed for randomized self-checks (deterministic runs ignore it)",
        )
    return parser


def _flagged(rows) -> int:
    return sum(1 for r in rows if getattr(r, "flagged", False))


def _run(command: str, config, out: Path) -> int:
    violations = 0
    if command in ("hartree", "all"):
        emit_trajectory_csv(out / "trajectory.csv", run_hartree_trajectory(config))
        print(f"hartree: trajectory written to {out / 'trajectory.csv'}")
    if command in ("product-scan", "all"):
        rows = run_product_rate_scan(config)
        emit_rate_csv(out / "product_rate.csv", rows)
        violations += _flagged(rows)
        print(f"product-scan: {len(rows)} rows, {_flagged(rows)} flagged")
    if command in ("coherent-scan", "all"):
        rows = run_coherent_rate_scan(config)
        emit_rate_csv(out / "coherent_rate.csv", rows)
        violations += _flagged(rows)
        print(f"coherent-scan: {len(rows)} rows, {_flagged(rows)} flagged")
    if command in ("fluctuation-suite", "all"):
        result = run_fluctuation_suite(config)
        emit_suite_csvs(out, result, FLUCTUATION_FILES)
        for probe, cell, msg in result.failures:
            print(f"fluctuation-suite FLAG [{probe} {cell}]: {msg}", file=sys.stderr)
        violations += len(result.failures)
        print(f"fluctuation-suite: {sum(len(v) for v in result.tables.values())} rows, "
              f"{len(result.failures)} failed cells")
    if command in ("coeff-suite", "all"):
        result = run_coefficient_suite(config)
        emit_suite_csvs(out, result, COEFFICIENT_FILES)
        for probe, cell, msg in result.failures:
            print(f"coeff-suite FLAG [{probe} {cell}]: {msg}", file=sys.stderr)
        violations += len(result.failures)
        print(f"coeff-suite: {sum(len(v) for v in result.tables.values())} rows, "
              f"{len(result.failures)} failed cells")
    return 3 if violations else 0


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        config = load_config(args.config)
        if args.threads is not None:
            config.threads = max(1, args.threads)
        config.seed = args.seed
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        return _run(args.command, config, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CapacityError as exc:
        print(f"capacity error: {exc}", file=sys.stderr)
        return 2
    except FockLabError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
