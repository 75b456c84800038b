"""Command-line interface.

Subcommands: simulate, threshold, local-limit, survival, kernel,
extinction, equivalence, verify.  Exit codes: 0 success, 1 verification
failure, 2 invalid arguments.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import verify as verifymod
from .experiments import ExperimentConfig, run, write_atomic


def _parse_grid(text: str) -> list[float]:
    """a:b:steps (inclusive linspace) or a comma-separated list."""
    if ":" in text:
        a, b, steps = text.split(":")
        steps = int(steps)
        if steps < 1:
            raise ValueError("grid needs at least one step")
        a, b = float(a), float(b)
        if steps == 1:
            return [a]
        return [a + (b - a) * i / (steps - 1) for i in range(steps)]
    return [float(x) for x in text.split(",")]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--k", default="5", help="forbidden degree (integer or 'inf')")
    p.add_argument("--t", type=float, default=2.0)
    p.add_argument("--t-grid", dest="t_grid", default=None, help="a:b:steps or comma list")
    p.add_argument("--replicas", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--format", dest="fmt", choices=("csv", "json"), default="csv")
    p.add_argument("--no-plot", dest="plot", action="store_false")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="degcap", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)

    names = {
        "simulate": "simulate the capped process and report component sizes",
        "threshold": "analytic threshold/degree-law table over a t grid",
        "local-limit": "total-variation check of the root statistic vs the tree",
        "survival": "survival-probability curve of the capped tree",
        "kernel": "estimate and store the offspring kernel",
        "extinction": "extinction fixed point and spectral radius",
        "equivalence": "largest-component concentration runs",
    }
    for name, help_text in names.items():
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name in ("kernel", "extinction"):
            p.add_argument("--bins", type=int, default=8)
            p.add_argument("--samples-per-cell", dest="spc", type=int, default=120)
            p.add_argument("--kernel-path", default=None)
        if name == "local-limit":
            p.add_argument("--samples", type=int, default=100_000)
        if name == "survival":
            p.add_argument("--gen-cap", dest="gen_cap", type=int, default=50)
            p.add_argument("--size-cap", dest="size_cap", type=int, default=10_000)

    pv = sub.add_parser("verify", help="run the acceptance battery")
    pv.add_argument("--suite", choices=("fast", "full"), default="fast")
    pv.add_argument("--seed", type=int, default=20260810)
    pv.add_argument("--out", default=None, help="write a JSON report here")
    return ap


_COMMAND_EXPERIMENT = {
    "simulate": "simulate",
    "threshold": "threshold-scan",
    "local-limit": "local-limit-tv",
    "survival": "survival",
    "kernel": "kernel-build",
    "extinction": "extinction",
    "equivalence": "equivalence",
}


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        if args.command == "verify":
            results = verifymod.run_suite(suite=args.suite, seed=args.seed)
            if args.out:
                report = [
                    {"name": r.name, "passed": r.passed, "band": r.band,
                     "measured": {k: _jsonable(v) for k, v in r.measured.items()},
                     "seconds": r.seconds}
                    for r in results
                ]
                write_atomic(args.out, json.dumps(
                    {"suite": args.suite, "seed": args.seed, "results": report}, indent=2))
            return 0 if all(r.passed for r in results) else 1

        config = ExperimentConfig(
            experiment=_COMMAND_EXPERIMENT[args.command],
            n=args.n,
            k="inf" if args.k == "inf" else int(args.k),
            t=args.t,
            t_grid=_parse_grid(args.t_grid) if args.t_grid else None,
            replicas=args.replicas,
            seed=args.seed,
            workers=args.workers,
            fmt=args.fmt,
            out=args.out,
            plot=args.plot and args.out is not None,
            bins=getattr(args, "bins", 8),
            samples_per_cell=getattr(args, "spc", 120),
            samples=getattr(args, "samples", 100_000),
            gen_cap=getattr(args, "gen_cap", 50),
            size_cap=getattr(args, "size_cap", 10_000),
            kernel_path=getattr(args, "kernel_path", None),
        )
        record = run(config)
        print(f"{args.command}: {len(record.rows)} rows, "
              f"config={record.config_hash}, {record.wall_time:.1f}s")
        for key, val in record.summary.items():
            print(f"  {key}: {val}")
        return 0
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _jsonable(v):
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "item"):
        return v.item()
    return v


if __name__ == "__main__":
    sys.exit(main())
