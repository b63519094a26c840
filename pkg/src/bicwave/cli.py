"""
Command-line entry point.

    bicwave validate scenario.yaml
    bicwave solve scenario.yaml [--seed S] [--out-dir DIR] [--max-iters N]
    bicwave sweep scenario.yaml --er 0.01,0.02,0.03 [...]

Success prints a JSON summary on stdout and exits 0. Failures print a JSON
object with an ``error`` key on stderr and exit nonzero: 2 for invalid
configuration, 1 for solver failures.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from typing import Optional, Sequence

from .config import ConfigError, load_config
from .runner import run

EXIT_SOLVE_FAILED = 1
EXIT_BAD_CONFIG = 2


def _er_list(text: str) -> list:
    try:
        values = [float(v) for v in text.replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("empty E_R list")
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bicwave", description="Constant-modulus waveform design with a spectral constraint.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", help="scenario YAML file")
        p.add_argument("--seed", type=int, help="override solver.seed")
        p.add_argument("--out-dir", help="write here instead of output.dir")
        p.add_argument("--max-iters", type=int, help="cap for both inner and outer iterations")
        p.add_argument("--workers", type=int, help="parallel sub-runs (default: one per E_R value)")

    sub.add_parser("validate", help="load and check a scenario").add_argument("config")
    common(sub.add_parser("solve", help="run a scenario"))
    sweep = sub.add_parser("sweep", help="run a scenario over several E_R values")
    common(sweep)
    sweep.add_argument("--er", type=_er_list, required=True, help="comma-separated E_R values")
    return parser


def _json_safe(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    return v


def _fail(payload: dict, code: int) -> int:
    print(json.dumps(payload), file=sys.stderr)
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "validate":
            sc = cfg.scenario()
            print(json.dumps({"valid": True, "mode": cfg.mode, "L": sc.L, "E_R": list(cfg.E_R)}))
            return 0
        cfg = cfg.with_overrides(
            seed=args.seed,
            max_iters=args.max_iters,
            E_R=getattr(args, "er", None),
        )
    except ConfigError as exc:
        return _fail({"error": "ConfigError", "problems": exc.problems}, EXIT_BAD_CONFIG)

    try:
        bundle = run(cfg, out_dir=args.out_dir, workers=args.workers)
    except Exception as exc:
        return _fail({"error": type(exc).__name__, "message": str(exc)}, EXIT_SOLVE_FAILED)

    rows = [
        {
            "E_R": r.E_R,
            "status": r.status,
            "error": r.error,
            "cost_db": _json_safe(r.cost_db),
            "modulus_dev": _json_safe(r.summary.get("modulus_dev")),
            "directory": str(r.directory),
        }
        for r in bundle.runs
    ]
    if not bundle.ok:
        return _fail({"error": "SolveFailed", "runs": rows}, EXIT_SOLVE_FAILED)
    print(json.dumps({"out_dir": str(bundle.directory), "runs": rows}))
    return 0


if __name__ == "__main__":
    sys.exit(main())
