"""Command-line interface.

Subcommands map one-to-one onto the pipeline stages (``ranks``, ``graphs``,
``embed``, ``train``), plus ``infer``, ``baselines``, ``evaluate``, and
``sweep-l``. Progress goes to standard error; results go to files only.
Exit code 0 on success, with a distinct nonzero code per error class.
"""

from __future__ import annotations

import argparse
import logging
import sys

from . import pipeline
from .errors import FusegraphError, exit_code_for

logger = logging.getLogger("fusegraph")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="pipeline config file (YAML)")
    parser.add_argument("--seed", type=int, default=None, help="override the config seed")
    parser.add_argument("--out", default=None, help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fusegraph",
        description=(
            "Graph-based rank fusion: build fusion graphs from multi-descriptor "
            "ranks, embed them as sparse fusion vectors, train a linear estimator, "
            "and evaluate with ranking and classification metrics."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    stages = {
        "ranks": "split the collection and build the train rank store",
        "graphs": "extract fusion graphs for the train set",
        "embed": "embed train graphs as fusion vectors (learning a codebook for K)",
        "train": "grid-search and fit the estimator",
        "infer": "run the full inference phase on the test split",
        "baselines": "train and score concatenation / majority-vote baselines",
        "evaluate": "recompute the metric report from persisted predictions",
    }
    for name, help_text in stages.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)

    p = sub.add_parser("sweep-l", help="retrain at several rank cut-offs and tabulate metrics")
    _add_common(p)
    p.add_argument(
        "--l-values",
        required=True,
        help="comma-separated cut-offs, e.g. 1,3,5,10",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = pipeline.load_config(args.config, seed=args.seed, output_dir=args.out)
        if args.command == "ranks":
            pipeline.stage_ranks(cfg)
        elif args.command == "graphs":
            pipeline.stage_graphs(cfg)
        elif args.command == "embed":
            pipeline.stage_embed(cfg)
        elif args.command == "train":
            pipeline.stage_train(cfg)
        elif args.command == "infer":
            result = pipeline.run_inference(cfg)
            logger.info(
                "predicted %d samples -> %s",
                len(result.predictions),
                result.files["predictions"],
            )
        elif args.command == "baselines":
            reports = pipeline.run_baselines(cfg)
            for method, report in reports.items():
                logger.info(
                    "%-20s balanced_accuracy=%.4f",
                    method,
                    report.values["balanced_accuracy"],
                )
        elif args.command == "evaluate":
            pipeline.run_evaluate(cfg)
        elif args.command == "sweep-l":
            try:
                l_values = [int(v) for v in args.l_values.split(",") if v.strip()]
            except ValueError:
                raise SystemExit(f"--l-values must be integers, got {args.l_values!r}")
            pipeline.sweep_l(cfg, l_values)
    except FusegraphError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return exit_code_for(exc)
    return 0


if __name__ == "__main__":
    sys.exit(main())
