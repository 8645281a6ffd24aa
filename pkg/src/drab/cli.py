"""Command line entry point ``drab``.

Exit codes: 0 success, 1 failed validation, 2 config error, 3 solver-failure
rate above the configured threshold.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace

from .harness.config import ConfigError, SweepSpec, apply_param, load_config, validate
from .harness.experiment import sweep

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_FAILURES = 3

log = logging.getLogger("drab")


def _common(p):
    p.add_argument("--config", required=True, help="YAML experiment config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, help="override master_seed")
    p.add_argument("--runs", type=int, help="override the number of runs")
    p.add_argument("--workers", type=int, help="parallel worker processes")
    p.add_argument("--timing", action="store_true",
                   help="record wall-clock times (makes output non-reproducible)")


def build_parser():
    parser = argparse.ArgumentParser(prog="drab", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _common(sub.add_parser("run", help="run the sweep described in the config"))
    p = sub.add_parser("sweep-snr", help="sweep the per-sensor SNR (dB)")
    _common(p)
    p.add_argument("--values", type=float, nargs="+")
    p = sub.add_parser("sweep-snapshots", help="sweep the number of snapshots T")
    _common(p)
    p.add_argument("--values", type=int, nargs="+")
    p = sub.add_parser("sweep-param", help="sweep one uncertainty or algorithm parameter")
    _common(p)
    p.add_argument("--name", help="parameter name, e.g. rho1_rel")
    p.add_argument("--values", type=float, nargs="+")
    p = sub.add_parser("validate", help="run the property suites")
    p.add_argument("--full", action="store_true", help="full-size suites instead of quick ones")
    return parser


def _sweep_override(config, args):
    kind = {"sweep-snr": "snr", "sweep-snapshots": "snapshots", "sweep-param": "param"}.get(
        args.command)
    if kind is None:
        return config
    name = getattr(args, "name", None) or (config.sweep.name if config.sweep.kind == "param"
                                           else "")
    if args.values:
        values = tuple(args.values)
    elif config.sweep.kind == kind and (kind != "param" or config.sweep.name == name):
        values = config.sweep.values
    else:
        raise ConfigError(f"no {kind} values given on the command line or in the config")
    if kind == "param":
        apply_param(config, name, values[0])  # rejects unknown names
    return replace(config, sweep=SweepSpec(kind, tuple(values), name if kind == "param" else ""))


def _experiment(args):
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, master_seed=args.seed)
    if args.runs is not None:
        config = replace(config, runs=args.runs)
    if args.workers is not None:
        config = replace(config, workers=args.workers)
    config = _sweep_override(config, args)
    validate(config)

    def progress(done, total):
        if done % 10 == 0 or done == total:
            log.info("%d/%d runs", done, total)

    result = sweep(config, timing=args.timing, progress=progress)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "results.csv"), "w", newline="") as fh:
        fh.write(result.to_csv())
    with open(os.path.join(args.out, "results.json"), "w") as fh:
        fh.write(result.to_json())
    sys.stdout.write(result.to_csv())
    rate = result.failure_rate()
    if rate > config.failure_threshold:
        log.error("solver failure rate %.1f%% exceeds threshold %.1f%%", 100 * rate,
                  100 * config.failure_threshold)
        return EXIT_FAILURES
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "validate":
        from .harness.validate import run_suites

        results = run_suites(quick=not args.full)
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        return EXIT_OK if all(ok for _, ok, _ in results) else EXIT_VALIDATION
    try:
        return _experiment(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
