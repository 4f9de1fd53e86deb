"""Command-line entry point: ``twrelay --figure 2 --trials 1000 --output fig2.csv``."""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from .config import SystemConfig
from .errors import ConfigError, ExperimentAborted, SolverError
from .harness import figure_spec, run_experiment, write_csv, write_gnuplot

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_IO = 0, 2, 3, 4


def parse_grid(text: str) -> tuple[float, ...]:
    """``a:step:b`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            a, step, b = (float(x) for x in text.split(":"))
            if step <= 0 or b < a:
                raise ValueError
            n = int(np.floor((b - a) / step + 1e-9)) + 1
            return tuple(float(a + k * step) for k in range(n))
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad SNR grid {text!r}; expected a:step:b") from None


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="twrelay", description=__doc__.split(":")[0])
    p.add_argument("--figure", type=int, choices=(1, 2, 3), required=True)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--seed", type=int, default=None, help="overrides the seed in --config")
    p.add_argument("--snr-grid", type=parse_grid, default=parse_grid("0:5:30"))
    p.add_argument("--output", default=None, help="CSV path (default figN.csv)")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--config", default=None, help="JSON file with SystemConfig fields")
    p.add_argument("--decouple-powers", action="store_true",
                   help="sweep only the studied stage's power; take the others from --config")
    p.add_argument("--stage1-boost-db", type=float, default=20.0)
    p.add_argument("--emit-gnuplot", action="store_true")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    output = args.output or f"fig{args.figure}.csv"
    try:
        config = SystemConfig.from_file(args.config) if args.config else SystemConfig()
        if args.seed is not None:
            config = config.replace(seed=args.seed)
        spec = figure_spec(args.figure, snr_db=args.snr_grid, trials=args.trials, config=config,
                           output=output, threads=args.threads, decouple_powers=args.decouple_powers,
                           stage1_boost_db=args.stage1_boost_db)
    except OSError as exc:
        print(f"twrelay: cannot read config: {exc}", file=sys.stderr)
        return EXIT_IO
    except ConfigError as exc:
        print(f"twrelay: invalid experiment: {exc}", file=sys.stderr)
        return EXIT_INVALID

    try:
        records = run_experiment(spec)
    except (SolverError, ExperimentAborted) as exc:
        print(f"twrelay: {exc}", file=sys.stderr)
        return EXIT_SOLVER

    try:
        path = write_csv(records, output)
        if args.emit_gnuplot:
            write_gnuplot(records, path, path.with_suffix(".gp"))
    except OSError as exc:
        print(f"twrelay: cannot write {output}: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
