"""Command-line entry point: ``lsfp-sim run ...``."""

import argparse
import logging
import sys

from .errors import ConfigurationError, LsfpError
from .harness import (
    TrialConfig,
    dump_betas,
    run_trials,
    summarize,
    write_rates_csv,
    write_summary_json,
)

log = logging.getLogger("lsfp")

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURES = 3
MAX_FAILURE_RATE = 0.05

# option name -> (TrialConfig field, parser)
_OPTIONS = {
    "cells": ("cells", int),
    "users": ("users", int),
    "antennas": ("antennas", int),
    "drops": ("drops", int),
    "seed": ("seed", int),
    "algorithms": ("algorithms", str),
    "z-budget": ("z_budget", float),
    "z-step": ("z_step", float),
    "pa-mode": ("pa_mode", str),
    "tau": ("tau", int),
    "cell-radius": ("cell_radius", float),
    "exclusion-radius": ("exclusion_radius", float),
    "shadow-sigma": ("shadow_sigma", float),
    "bandwidth": ("bandwidth", float),
    "bs-noise-figure": ("bs_noise_figure", float),
    "ue-noise-figure": ("ue_noise_figure", float),
    "bs-tx-power": ("bs_tx_power", float),
    "ue-tx-power": ("ue_tx_power", float),
    "out-rates": ("out_rates", str),
    "out-summary": ("out_summary", str),
    "dump-beta": ("dump_beta", str),
    "replay-beta": ("replay_beta", str),
    "workers": ("workers", int),
}


def read_config_file(path):
    """Parse flat ``key = value`` lines; keys use the long option names."""
    values = {}
    try:
        fh = open(path)
    except OSError as exc:
        raise ConfigurationError(f"cannot read config file {path}: {exc}") from exc
    with fh:
        for n, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{n}: expected key=value")
            key, val = (s.strip() for s in line.split("=", 1))
            key = key.lstrip("-").replace("_", "-")
            if key not in _OPTIONS:
                raise ConfigurationError(f"{path}:{n}: unknown key {key!r}")
            field, conv = _OPTIONS[key]
            try:
                values[field] = conv(val)
            except ValueError as exc:
                raise ConfigurationError(f"{path}:{n}: bad value for {key}: {val!r}") from exc
    return values


def build_parser():
    parser = argparse.ArgumentParser(prog="lsfp-sim", description="Large-scale fading precoding simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run Monte Carlo drops and write rate statistics")
    run.add_argument("--config", help="key=value file; command-line flags take precedence")
    for name, (_, conv) in _OPTIONS.items():
        run.add_argument(f"--{name}", type=conv, default=None)
    run.add_argument("-v", "--verbose", action="store_true")
    return parser


def config_from_args(args):
    values = read_config_file(args.config) if args.config else {}
    for _, (field, _) in _OPTIONS.items():
        val = getattr(args, field)
        if val is not None:
            values[field] = val
    try:
        return TrialConfig(**values)
    except TypeError as exc:
        raise ConfigurationError(str(exc)) from exc


def _print_summary(summary):
    print(f"{'algorithm':<10} {'failures':>8} {'R_out(5%)':>12} {'median':>10}")
    for a, e in summary.items():
        r_out = "n/a" if e["r_out_5pct"] is None else f"{e['r_out_5pct']:.4g}"
        med = "n/a" if e["median_rate"] is None else f"{e['median_rate']:.4g}"
        print(f"{a:<10} {e['failures']:>8} {r_out:>12} {med:>10}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        data = run_trials(cfg)
    except ConfigurationError as exc:
        print(f"lsfp-sim: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (LsfpError, OSError) as exc:
        print(f"lsfp-sim: {exc}", file=sys.stderr)
        return EXIT_FAILURES

    summary = summarize(data)
    if cfg.out_rates:
        write_rates_csv(cfg.out_rates, data)
    if cfg.out_summary:
        write_summary_json(cfg.out_summary, summary)
    if cfg.dump_beta:
        dump_betas(cfg.dump_beta, data)
    _print_summary(summary)

    if data.failure_rate > MAX_FAILURE_RATE:
        print(f"lsfp-sim: solver failure rate {data.failure_rate:.1%} exceeds "
              f"{MAX_FAILURE_RATE:.0%}", file=sys.stderr)
        return EXIT_FAILURES
    log.info("finished %d drops", data.drops)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
