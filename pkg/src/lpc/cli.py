"""Command line entry point ``lpc``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure (divergence
or a non-invertible regularized Hessian), 3 I/O failure.  The reason goes to
stderr.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import harness
from .config import load_config
from .errors import ConfigError, NonFinite, NonInvertible

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="lpc", description="Learning-based predictive control experiments.")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="closed-loop run: trajectory, weights and iteration CSVs")
    run.add_argument("--config", required=True)
    run.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="per-horizon iteration counts, OCP method vs gradient descent")
    bench.add_argument("--config", required=True)
    bench.add_argument("--trials", type=int, default=20)
    bench.add_argument("--out", required=True)

    track = sub.add_parser("track", help="LPC vs PID on the Van der Pol tracking task")
    track.add_argument("--config", required=True)
    track.add_argument("--out", required=True)

    ric = sub.add_parser("riccati", help="print P and K of the finite-horizon LQ problem")
    ric.add_argument("--config", required=True)
    return p


def _format_matrix(M) -> str:
    M = np.atleast_2d(M)
    return "\n".join("  " + "  ".join(f"{v:12.6f}" for v in row) for row in M)


def _dispatch(args) -> None:
    cfg = load_config(args.config)
    if args.command == "run":
        paths = harness.run_experiment(cfg, args.out)
        print("\n".join(str(p) for p in paths.values()))
    elif args.command == "bench":
        if args.trials < 1:
            raise ConfigError("trials", "--trials must be >= 1")
        print(harness.bench_solvers(cfg, args.trials, args.out))
    elif args.command == "track":
        print(harness.compare_tracking(cfg, args.out))
    elif args.command == "riccati":
        P, K = harness.riccati_for(cfg)
        print(f"P =\n{_format_matrix(P)}\nK =\n{_format_matrix(K)}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _dispatch(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NonFinite, NonInvertible) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
