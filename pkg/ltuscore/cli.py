import argparse
import logging
import sys
from typing import List, Optional

from rich import print
from rich.logging import RichHandler
from rich.markup import escape

from ltuscore.utils.errors import LtuError
from ltuscore.utils.module_experiment import (
    ExperimentConfig,
    compare_attackers,
    compare_table,
    grid_table,
    report_table,
    run_experiment,
    run_grid,
    run_oracle,
)
from ltuscore.version import __version__

logger = logging.getLogger("ltuscore")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ltuscore",
        description="Leave-two-unlabeled membership inference privacy and utility evaluation",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="flat YAML configuration file")
    common.add_argument("--seed", type=int, default=None, help="master seed, drawn and recorded when missing")
    common.add_argument("--out", type=str, default=None, help="directory receiving the run directories")
    common.add_argument("--rounds", type=int, default=None, help="number of LTU rounds N")
    common.add_argument("--trials", type=int, default=None, help="number of trials averaged")
    common.add_argument(
        "--set",
        dest="assignments",
        action="append",
        default=list(),
        metavar="KEY=VALUE",
        help="override one configuration key, may be repeated",
    )
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true", help="log per-round details")
    verbosity.add_argument("-q", "--quiet", action="store_true", help="log warnings only")

    subparsers = parser.add_subparsers(dest="command", required=True)
    subparsers.add_parser("run", parents=[common], help="evaluate utility and privacy of one trainer")
    subparsers.add_parser("grid", parents=[common], help="sweep trainers and randomness regimes")
    subparsers.add_parser("oracle", parents=[common], help="exact pair statistics and expected losses")
    compare = subparsers.add_parser("compare", parents=[common], help="evaluate attackers on shared rounds")
    compare.add_argument("attackers", nargs="*", help="attackers such as `gap`, `blf`, `gap:entropy`")
    return parser


def _setup_logging(verbose: bool, quiet: bool):
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.basicConfig(
        level=level,
        format="%(message)s",
        datefmt="[%X]",
        handlers=[RichHandler(rich_tracebacks=False, show_path=False)],
        force=True,
    )


def load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    config = config.with_overrides(
        args.assignments,
        seed=args.seed,
        out=args.out,
        rounds=args.rounds,
        trials=args.trials,
    )
    resolved = config.resolved()
    logger.info("Master seed: %d", resolved.seed)
    return resolved


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    _setup_logging(args.verbose, args.quiet)

    try:
        config = load_config(args)

        if args.command == "run":
            run_dir, report = run_experiment(config)
            print(report_table(report))
            if report["example_based"]:
                print("[red]The trainer stores its training samples verbatim.[/red]")
        elif args.command == "grid":
            run_dir, rows = run_grid(config)
            print(grid_table(rows))
        elif args.command == "oracle":
            run_dir, report = run_oracle(config)
            for kind, values in report["losses"].items():
                print(
                    f"{kind}: p_R={values['p_r']:.4f} p_D={values['p_d']:.4f} "
                    f"e_R={values['e_r']:.4f} e_D={values['e_d']:.4f}"
                )
            zero_one = report["zero_one"]
            print(f"0-1 loss: margin {zero_one['margin']:.6f}, gap {zero_one['gap']:.6f}, equal: {zero_one['equal']}")
        else:
            run_dir, comparison = compare_attackers(config, args.attackers or None)
            print(compare_table(comparison))
    except LtuError as error:
        print(f"[red]error:[/red] {escape(str(error))}")
        return 2

    print(f"Results written to {run_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
