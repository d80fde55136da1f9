"""Command-line entry point.

``discount run --config run.toml`` executes one search and exits with 0
(feasible), 2 (infeasible) or 1 (error). ``discount serve-model model.json``
serves a saved built-in model over the stdio protocol.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .config import load_config
from .errors import DiscountError
from .models import load_model, serve
from .run import EXIT_ERROR, run_command

__all__ = ["main", "build_parser"]


class _Parser(argparse.ArgumentParser):
    # exit code 2 is reserved for infeasible runs
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="discount", description="Distributional counterfactual search.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="run one counterfactual search from a config file")
    run.add_argument("--config", required=True, help="TOML or JSON run configuration")
    run.add_argument("--alpha", type=float)
    run.add_argument("--ux", type=float, help="bound on the sliced-distance UCL")
    run.add_argument("--uy", type=float, help="bound on the output-distance UCL")
    run.add_argument("--projections", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--tau", type=float)
    run.add_argument("--max-iters", type=int, dest="max_iters")
    run.add_argument("--eta-schedule", dest="eta_schedule",
                     help="interval:l,r,kappa or discrete:v1,v2,...")
    run.add_argument("--out", help="output directory")

    srv = sub.add_parser("serve-model", help="serve a saved model over stdin/stdout")
    srv.add_argument("model", help="model JSON written by save_model")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    if args.command == "serve-model":
        try:
            model = load_model(args.model)
        except (DiscountError, OSError) as exc:
            print(f"discount: error: {exc}", file=sys.stderr)
            return EXIT_ERROR
        serve(model)
        return 0
    try:
        cfg = load_config(args.config).with_overrides(
            alpha=args.alpha, ux=args.ux, uy=args.uy, projections=args.projections, seed=args.seed,
            tau=args.tau, max_iters=args.max_iters, eta_schedule=args.eta_schedule, out=args.out,
        )
    except (DiscountError, OSError, ValueError) as exc:
        print(f"discount: error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    return run_command(cfg)


if __name__ == "__main__":
    sys.exit(main())
