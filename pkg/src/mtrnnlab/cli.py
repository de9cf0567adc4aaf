"""Command-line experiment runner.

Subcommands: cosine, dataset, train, generate, eval, sweep, export.
Exit codes: 0 success, 2 configuration error, 3 training divergence.
"""

import argparse
import sys

from .config import ExperimentConfig, apply_overrides, load_config
from .errors import CheckpointError, ConfigError, DataError, TrainingDiverged
from .experiments import (
    DEFAULT_PSI_S_GRID,
    run_cosine,
    run_dataset,
    run_eval,
    run_export,
    run_generate,
    run_sweep,
    run_train,
)


def _add_common(parser: argparse.ArgumentParser, needs_config: bool = True):
    if needs_config:
        parser.add_argument("--config", metavar="PATH",
                            help="JSON config file (defaults apply if omitted)")
        parser.add_argument("--seed", type=int, metavar="N",
                            help="master seed override")
        parser.add_argument("--set", dest="overrides", action="append",
                            default=[], metavar="KEY=VALUE",
                            help="config override, e.g. "
                                 "model.somatosensory_hyper.psi=5e-4")
    parser.add_argument("--out", required=True, metavar="DIR",
                        help="run output directory")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mtrnnlab",
        description="Multi-timescale recurrent network laboratory: "
                    "reproducible training, generation and evaluation runs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cosine", help="self-organisation study on the "
                                      "contrary-cosine toy data")
    _add_common(p)

    p = sub.add_parser("dataset", help="write the synthetic scene files")
    _add_common(p)

    p = sub.add_parser("train", help="train the full multi-modal model")
    _add_common(p)

    p = sub.add_parser("generate", help="produce utterances from a checkpoint")
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    p.add_argument("--scenes", metavar="ID[,ID...]",
                   help="scene ids or indices (default: all)")
    _add_common(p, needs_config=False)

    p = sub.add_parser("eval", help="score a checkpoint and export "
                                    "context-space analyses")
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    p.add_argument("--split", choices=("train", "test", "all"), default="all")
    _add_common(p, needs_config=False)

    p = sub.add_parser("sweep", help="grid sweep over one parameter")
    p.add_argument("--parameter", required=True,
                   help="psi_s, psi_v, alpha, tau_cs or a dotted config path")
    p.add_argument("--grid", metavar="V[,V...]",
                   help="comma-separated values "
                        "(default: the psi_s grid)")
    p.add_argument("--sweep-seeds", type=int, default=10, metavar="N")
    p.add_argument("--folds", type=int, default=1, metavar="N")
    p.add_argument("--jobs", type=int, default=1, metavar="N",
                   help="concurrent sweep cells")
    _add_common(p)

    p = sub.add_parser("export", help="plot-ready CSVs from a checkpoint")
    p.add_argument("--checkpoint", required=True, metavar="PATH")
    _add_common(p, needs_config=False)
    return parser


def _config_from_args(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    if args.overrides:
        cfg = apply_overrides(cfg, args.overrides)
    if args.seed is not None:
        cfg = apply_overrides(cfg, [f"seed={args.seed}"])
    cfg.validate()
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "cosine":
            run_cosine(_config_from_args(args), args.out)
        elif args.command == "dataset":
            run_dataset(_config_from_args(args), args.out)
        elif args.command == "train":
            run_train(_config_from_args(args), args.out)
        elif args.command == "generate":
            scenes = args.scenes.split(",") if args.scenes else None
            run_generate(args.checkpoint, args.out, scenes)
        elif args.command == "eval":
            run_eval(args.checkpoint, args.out, args.split)
        elif args.command == "sweep":
            grid = ([float(v) for v in args.grid.split(",")]
                    if args.grid else list(DEFAULT_PSI_S_GRID))
            run_sweep(_config_from_args(args), args.out, args.parameter,
                      grid, seeds=args.sweep_seeds, folds=args.folds,
                      jobs=args.jobs)
        elif args.command == "export":
            run_export(args.checkpoint, args.out)
    except (ConfigError, DataError, CheckpointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except TrainingDiverged as exc:
        print(f"divergence: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
