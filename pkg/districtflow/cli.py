"""
Command line interface.

    districtflow run --config configs/lattice_10x10.json --method snf --steps 100000
    districtflow verify --out report.json

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from districtflow import __version__, settings
from districtflow.exceptions import BaseFlowError, RunFailure
from districtflow.harness import load_config, run_experiment
from districtflow.oracle import run_exactness_suite

logger = logging.getLogger(__name__)

# Residual bound for the shipped samplers in the exactness suite
EXACTNESS_TOLERANCE = 1e-12


def setup_logging(level=None):
    # type: (str|None) -> None
    """Configure the root handler once for the process."""
    level = (level or settings.DISTRICTFLOW_LOG_LEVEL).upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)-8s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )


def build_parser():
    # type: () -> argparse.ArgumentParser
    parser = argparse.ArgumentParser(prog="districtflow", description="Flow-based redistricting samplers")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--log-level", choices=settings.LOG_LEVELS, type=str.upper, help="Logging level")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Run a multi-chain experiment")
    run.add_argument("--config", type=Path, help="Experiment config file (JSON)")
    run.add_argument("--method", choices=("snf", "snf-tempered", "com-flow", "d2d-flow"))
    run.add_argument("--beta", type=float)
    run.add_argument("--steps", type=int)
    run.add_argument("--chains", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--out", type=str)
    run.add_argument("--resume", action="store_true", help="Continue every chain from its checkpoint")
    run.add_argument("--workers", type=int, help="Worker processes (defaults to DISTRICTFLOW_MAX_WORKERS)")

    verify = sub.add_parser("verify", help="Run the exact small-instance checks")
    verify.add_argument("--out", type=Path, help="Write the report as JSON")
    return parser


def cmd_run(args):
    # type: (argparse.Namespace) -> int
    overrides = {
        "method": args.method,
        "beta": args.beta,
        "steps": args.steps,
        "chains": args.chains,
        "seed": args.seed,
        "out": args.out,
    }
    config = load_config(args.config, overrides)
    manifest = run_experiment(config, resume=args.resume, workers=args.workers)
    print(json.dumps(manifest["statistics"], indent=2))
    return 0


def _failures(report):
    # type: (dict) -> list[str]
    if "simplified" in report["sampler"]:
        return []
    checks = {
        "stochastic": report["stochastic"],
        "invariance": report["invariance"],
        "detailed_balance": report["detailed_balance"],
        "skew_balance": report["skew_balance"],
    }
    checks.update({f"mixed_skew_balance[{k}]": v for k, v in (report["mixed_skew_balance"] or {}).items()})
    return [
        f"{report['instance']} / {report['sampler']}: {name} residual {value:.3e}"
        for name, value in checks.items()
        if value is not None and value > EXACTNESS_TOLERANCE
    ]


def cmd_verify(args):
    # type: (argparse.Namespace) -> int
    reports = [r.model_dump(mode="json") for r in run_exactness_suite()]
    text = json.dumps(reports, indent=2)
    if args.out:
        args.out.write_text(text, encoding="utf-8")
    else:
        print(text)
    failures = [f for r in reports for f in _failures(r)]
    if failures:
        raise RunFailure("exactness checks failed: " + "; ".join(failures))
    return 0


def main(argv=None):
    # type: (list[str]|None) -> int
    """Main entry point for the command line."""
    args = build_parser().parse_args(argv)
    setup_logging(args.log_level)
    try:
        settings.validate_settings()
        if args.command == "run":
            return cmd_run(args)
        return cmd_verify(args)
    except BaseFlowError as e:
        logger.error(e.message)
        print(json.dumps(e.to_error_response()), file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        logger.warning("Interrupted; resume with --resume")
        return RunFailure.exit_code


if __name__ == "__main__":
    sys.exit(main())
