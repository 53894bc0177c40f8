"""Command-line entry point: ``prethermal run|validate|budget|version``."""

from __future__ import annotations

import argparse
import sys

from . import __version__
from .config import load_config
from .exceptions import ConfigError, ResourceLimitError
from .mitigation import max_depth, sample_budget

EXIT_OK, EXIT_CONFIG, EXIT_RESOURCE = 0, 2, 3


def _print_config_errors(exc: ConfigError) -> None:
    print("config error:", file=sys.stderr)
    for path, msg in exc.errors:
        print(f"  {path}: {msg}", file=sys.stderr)


def cmd_run(args) -> int:
    from .scenarios import run_scenario

    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _print_config_errors(exc)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.workers is not None:
        cfg.n_workers = args.workers
    try:
        files = run_scenario(cfg, args.output)
    except ResourceLimitError as exc:
        print(f"resource limit: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for f in files:
        print(f)
    return EXIT_OK


def cmd_validate(args) -> int:
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        _print_config_errors(exc)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"ok: scenario {cfg.scenario}, seed {cfg.seed}")
    return EXIT_OK


def cmd_budget(args) -> int:
    try:
        b = sample_budget(args.N, args.D, args.p, args.pm, args.eps)
        bound = max_depth(args.N, args.p, args.C) if args.p > 0 else float("inf")
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"N={b.N} D={b.D} p={b.p:g} p_m={b.p_m:g} eps_stat={b.eps_stat:g}")
    print(f"shots: {b.shots:d} ({b.shots:.3g})")
    print(f"depth bound (C={args.C:g}): D < {bound:.1f}")
    return EXIT_OK


def cmd_version(args) -> int:
    print(__version__)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="prethermal",
                                     description="Floquet prethermalization and noisy-echo experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run the scenario described by a JSON config")
    run.add_argument("config")
    run.add_argument("-o", "--output", help="output directory (overrides the config)")
    run.add_argument("-w", "--workers", type=int, help="trajectory worker threads")
    run.set_defaults(func=cmd_run)

    val = sub.add_parser("validate", help="check a config and report every error")
    val.add_argument("config")
    val.set_defaults(func=cmd_validate)

    bud = sub.add_parser("budget", help="shots needed to resolve the noisy survival probability")
    bud.add_argument("-N", type=int, required=True, help="number of qubits")
    bud.add_argument("-D", type=int, required=True, help="circuit depth (forward + backward layers)")
    bud.add_argument("-p", type=float, required=True, help="gate error probability per qubit and layer")
    bud.add_argument("-pm", type=float, default=0.0, help="readout error probability per qubit")
    bud.add_argument("--eps", type=float, default=1.0, help="shot noise relative to the signal")
    bud.add_argument("-C", type=float, default=1.0, help="constant in the depth bound")
    bud.set_defaults(func=cmd_budget)

    ver = sub.add_parser("version", help="print the package version")
    ver.set_defaults(func=cmd_version)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
