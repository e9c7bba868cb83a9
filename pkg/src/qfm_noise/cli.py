"""``qfm`` command line entry point."""

from __future__ import annotations

import argparse
import dataclasses
import sys

from .experiments import NOISE_KINDS, PAPER_LEVELS, RUNNERS, ExperimentConfig, paper_scale_overrides
from .plotdata import MissingResults, emit_plot_data


def _csv(cast):
    def parse(text: str):
        try:
            return tuple(cast(v) for v in text.split(",") if v.strip())
        except ValueError as exc:
            raise argparse.ArgumentTypeError(str(exc)) from None

    return parse


def _choices(allowed):
    def parse(text: str):
        values = tuple(v.strip().lower() for v in text.split(",") if v.strip())
        bad = [v for v in values if v not in allowed]
        if bad or not values:
            raise argparse.ArgumentTypeError(f"expected values from {sorted(allowed)}, got {text!r}")
        return values

    return parse


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("master seed must fit in 64 bits")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qfm", description="Noise studies of quantum Fourier models.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        p = sub.add_parser(name)
        p.add_argument("--ansatz", type=_choices({"sea", "hea", "c15", "c19"}),
                       default=("sea", "hea", "c15", "c19"), help="comma-separated list")
        p.add_argument("--qubits", type=_csv(int), default=(4,), help="N or comma-separated list")
        p.add_argument("--layers", type=int, default=1)
        p.add_argument("--encoding", choices=("x", "y", "z", "xy"), default="y")
        p.add_argument("--features", type=int, default=None)
        p.add_argument("--noise", type=_choices(set(NOISE_KINDS) | {"none"}), default=("none",))
        p.add_argument("--levels", type=_csv(float), default=PAPER_LEVELS)
        p.add_argument("--cge-scope", choices=("enc", "train", "both"), default="both")
        p.add_argument("--oversample", type=int, default=1)
        p.add_argument("--seeds", type=_csv(int), default=None)
        p.add_argument("--problem-seeds", type=_csv(int), default=None)
        p.add_argument("--samples", type=int, default=50)
        p.add_argument("--bins", type=int, default=75)
        p.add_argument("--pairs", type=int, default=5000)
        p.add_argument("--steps", type=int, default=1000)
        p.add_argument("--lr", type=float, default=0.01)
        p.add_argument("--paper-scale", action="store_true")
        p.add_argument("--out", default="results")
        p.add_argument("--master-seed", type=_u64, default=0)
        p.add_argument("--threads", type=int, default=None, help="overrides QFM_THREADS")
    p = sub.add_parser("plot-data")
    p.add_argument("--out", default="results", help="completed results directory")
    p.add_argument("--no-images", action="store_true")
    return parser


def config_from_args(args) -> ExperimentConfig:
    training = args.command == "train"
    seeds = args.seeds or ((0, 1, 2) if training else (0, 1, 2, 3, 4))
    config = ExperimentConfig(
        command=args.command, ansatz=args.ansatz, qubits=args.qubits, layers=args.layers,
        encoding=args.encoding, features=args.features, noise=args.noise, levels=args.levels,
        cge_scope=args.cge_scope, oversample=args.oversample, seeds=seeds,
        problem_seeds=args.problem_seeds or (0, 1, 2), samples=args.samples, bins=args.bins,
        pairs=args.pairs, steps=args.steps, lr=args.lr, paper_scale=args.paper_scale,
        out=args.out, master_seed=args.master_seed, threads=args.threads,
    )
    if args.paper_scale:
        overrides = {k: v for k, v in paper_scale_overrides(config).items()
                     if getattr(args, k, None) is None}
        config = dataclasses.replace(config, **overrides)
    return config


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "plot-data":
        try:
            files = emit_plot_data(args.out, images=not args.no_images)
        except MissingResults as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        for f in files:
            print(f)
        return 0
    try:
        config = config_from_args(args)
    except ValueError as exc:
        parser.error(str(exc))
    result = RUNNERS[args.command](config)
    for f in result.files:
        print(f)
    if result.failures:
        print(f"{len(result.failures)} cell(s) failed; see {config.command}.FAILED",
              file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
