#!/usr/bin/env python3

"""
Main entry point for ConvexLab
Parses command line arguments and runs one study sub-command:
mesh, pm-audit, consistency, subharmonic, nonconvergence or monopolist.
"""

import os
import sys
import argparse
import logging
from typing import List, Optional

# Add current directory to path
sys.path.insert(0, os.path.abspath(os.path.dirname(__file__)))

# Import our modules
from convexlab.core.consistency_lab import resolve_cases
from convexlab.core.constraints import JUMP_MODES
from convexlab.core.errors import InvalidArgumentError
from convexlab.core.log_config import configure_logging
from convexlab.core.settings import CONSTRAINT_MODES, MESH_KINDS, TARGETS
from convexlab.experiments.runner import EXIT_USAGE, ExperimentRunner
from convexlab.experiments.studies import STUDIES

# Configure initial logging
configure_logging(level=logging.INFO)
logger = logging.getLogger('main')


def _int_list(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _float_list(text: str) -> List[float]:
    try:
        values = [float(v) for v in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected x0,y0,x1,y1, got {text!r}") from None
    if len(values) != 4:
        raise argparse.ArgumentTypeError(f"expected 4 numbers, got {len(values)}")
    return values


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one sub-command per study."""
    common = argparse.ArgumentParser(add_help=False)

    # Mesh
    common.add_argument("--kind", choices=MESH_KINDS, help="Mesh family")
    common.add_argument("--n", type=int, help="Cells per side (mesh and pm-audit)")
    common.add_argument("--n-levels", type=_int_list, help="Comma-separated cells per side, e.g. 4,8,16,32")
    common.add_argument("--mesh-file", type=str, help="Read the mesh from a text file instead of building it")
    common.add_argument("--refine", type=int, help="Homothetic refinements applied to the mesh")
    common.add_argument("--domain", type=_float_list, help="Domain rectangle x0,y0,x1,y1")
    common.add_argument("--region", type=_float_list, help="Sub-region x0,y0,x1,y1 for normal directions")
    common.add_argument("--seed", type=int, help="Mesh4 perturbation seed")

    # Study
    common.add_argument("--degree", type=int, choices=[1, 2], help="Lagrange degree")
    common.add_argument("--constraints", choices=CONSTRAINT_MODES, help="Constraint mode")
    common.add_argument("--jump-mode", choices=JUMP_MODES, help="P2 conformal rows: pointwise or integral")
    common.add_argument("--target", choices=TARGETS, help="Exact solution or projection target")
    common.add_argument("--alpha", type=float, help="Monopolist alpha in [0, 1]")
    common.add_argument("--eta", type=float, help="Mixed-derivative margin of the adversarial quadratic")
    common.add_argument("--case", type=str, help="Consistency group or sub-case id")
    common.add_argument("--threads", type=int, help="Worker threads")

    # Output, settings and logging
    common.add_argument("--out", type=str, help="Output directory")
    common.add_argument("--export", action="store_true", default=None,
                        help="Also write operators, constraint rows or QPs in coordinate form (mesh, subharmonic)")
    common.add_argument("--config", "-c", type=str, help="Path to configuration file")
    common.add_argument("--log-level", choices=["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"],
                        default=None, help="Set logging level")
    common.add_argument("--log-file", type=str, help="Log to specified file")

    parser = argparse.ArgumentParser(
        description="ConvexLab - convexity and subharmonicity constraints for 2D finite elements"
    )
    subparsers = parser.add_subparsers(dest="command", metavar="command")
    subparsers.required = True
    help_text = {
        "mesh": "Build, refine and export a mesh; print its normal directions",
        "pm-audit": "Search a direction-pair certificate for a mesh",
        "consistency": "Run the consistency suite",
        "subharmonic": "Constrained H1_0 projection convergence study",
        "nonconvergence": "Minimal L2 distance to conformal-convex P1 functions",
        "monopolist": "Discrete monopolist problem",
    }
    for name in STUDIES:
        subparsers.add_parser(name, parents=[common], help=help_text[name])
    return parser


def collect_overrides(args: argparse.Namespace) -> dict:
    """Map parsed arguments to runner overrides."""
    return {
        "kind": args.kind,
        "n": args.n,
        "n_levels": args.n_levels,
        "mesh_file": args.mesh_file,
        "refine": args.refine,
        "domain": args.domain,
        "region": args.region,
        "seed": args.seed,
        "degree": args.degree,
        "constraints": args.constraints,
        "jump_mode": args.jump_mode,
        "target": args.target,
        "alpha": args.alpha,
        "eta": args.eta,
        "case": args.case,
        "threads": args.threads,
        "out_dir": args.out,
        "export": args.export,
    }


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point."""
    parser = build_parser()
    args = parser.parse_args(argv)

    if args.case is not None:
        try:
            resolve_cases(args.case)
        except InvalidArgumentError as e:
            parser.error(str(e))

    try:
        runner = ExperimentRunner(args.command, args.config, collect_overrides(args))
    except InvalidArgumentError as e:
        parser.error(str(e))

    # Apply logging settings from command line
    if args.log_level:
        runner.settings.set('logging', 'level', args.log_level)

    if args.log_file:
        runner.settings.set('logging', 'log_to_file', True)
        runner.settings.set('logging', 'log_file_path', args.log_file)

    runner.settings.apply_logging_settings()

    try:
        code = runner.run()
    except InvalidArgumentError as e:
        logger.error(str(e))
        parser.print_usage(sys.stderr)
        return EXIT_USAGE

    if runner.result is not None:
        for line in runner.result.messages:
            print(line)
    return code


if __name__ == "__main__":
    sys.exit(main())
