"""Command-line entry point: ``jscmd run | check-monge | codebook | selftest``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from jscmd.harness import ConfigError, ExperimentConfig, emit_csv, run_experiment
from jscmd.map_decoder import check_monge
from jscmd.mdq import build_2dsq, uniform_boundaries
from jscmd.source_model import GaussMarkovSource, derive_markov_model


def _run(args) -> int:
    try:
        config = ExperimentConfig.from_json(Path(args.config).read_text())
        if args.decoders:
            config.decoders = [d.strip() for d in args.decoders.split(",") if d.strip()]
        if args.seed is not None:
            config.base_seed = args.seed
        if args.threads is not None:
            config.threads = args.threads
        if args.timing:
            config.timing = True
        config.validate()
    except (OSError, ConfigError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    rows = run_experiment(config)
    text = emit_csv(rows)
    if args.out == "-":
        sys.stdout.write(text)
    else:
        Path(args.out).write_text(text)
    bad = sum(r.infeasible for r in rows)
    if bad:
        print(f"warning: {bad} infeasible trial decodes excluded", file=sys.stderr)
    return 0


def _check_monge(args) -> int:
    if args.cells < 2 or not 0.0 <= args.rho < 1.0:
        print("error: need cells >= 2 and rho in [0, 1)", file=sys.stderr)
        return 2
    model = derive_markov_model(GaussMarkovSource(args.rho), uniform_boundaries(args.cells, args.cell_width))
    result = check_monge(model, exhaustive=args.exhaustive)
    if result.ok:
        print(f"monge: true (rho={args.rho}, L={args.cells})")
        return 0
    a, a2, b, b2 = result.violation
    print(f"monge: false (rho={args.rho}, L={args.cells}) violated at a={a} a'={a2} b={b} b'={b2}")
    return 1


def _codebook(args) -> int:
    try:
        cb = build_2dsq(args.side_size, args.spread, args.cells, args.cell_width)
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(cb.to_json())
    return 0


def _selftest(args) -> int:
    from jscmd.selftest import run_selftest

    return 0 if run_selftest(args.instances, np.random.default_rng(args.seed)) else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="jscmd", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a Monte-Carlo experiment and write a CSV table")
    p.add_argument("--config", required=True, help="JSON experiment config")
    p.add_argument("--out", required=True, help="CSV output path, '-' for stdout")
    p.add_argument("--decoders", help="comma-separated decoder list overriding the config")
    p.add_argument("--seed", type=int, help="base seed overriding the config")
    p.add_argument("--threads", type=int, help="worker threads")
    p.add_argument("--timing", action="store_true", help="fill wall_ms (breaks byte-identical output)")
    p.set_defaults(func=_run)

    p = sub.add_parser("check-monge", help="check the Monge condition of a quantized Gauss-Markov model")
    p.add_argument("--rho", type=float, required=True)
    p.add_argument("--cells", type=int, required=True)
    p.add_argument("--cell-width", type=float)
    p.add_argument("--exhaustive", action="store_true", help="scan all quadruples instead of adjacent pairs")
    p.set_defaults(func=_check_monge)

    p = sub.add_parser("codebook", help="print a 2DSQ codebook as JSON")
    p.add_argument("--side-size", type=int, default=8)
    p.add_argument("--spread", type=int, default=3)
    p.add_argument("--cells", type=int, default=21)
    p.add_argument("--cell-width", type=float)
    p.set_defaults(func=_codebook)

    p = sub.add_parser("selftest", help="run decoders against brute-force oracles on random tiny instances")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
