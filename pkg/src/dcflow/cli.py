"""Command-line front end.

Subcommands:
  validate  parse a config, check every invariant, echo derived loads
  run       execute the experiment and write artifacts
  sweep     like run, but requires a sweep section (kept as its own verb
            so scripts fail loudly when a sweep is missing)
  oracle    print the closed-form predictions only, no simulation
  selftest  run the brute-force oracle suite
"""

from __future__ import annotations

import argparse
import json
import sys

from .ct_network import choose_epsilon, ct_delay_oracle
from .dt_network import dt_delay_bound
from .errors import ConfigError, DcflowError
from .harness import (
    ExperimentConfig,
    _effective_profile,
    _build_network,
    _point_rates,
    load_config,
    run_experiment,
    validate_config,
)
from .metrics import format_report
from .selftest import run_selftest
from .sfa_core import expected_flow_delay


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to the JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="parallel sweep workers")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dcflow", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in ("validate", "run", "sweep", "oracle"):
        p = sub.add_parser(name)
        _add_common(p)

    p = sub.add_parser("selftest")
    p.add_argument("--fast", action="store_true", help="reduced problem sizes")
    return parser


def _cmd_validate(config: ExperimentConfig) -> int:
    echo = validate_config(config)
    print(f"config ok: {config.name}")
    for mult, info in echo["points"].items():
        print(f"  sweep x{mult}: epsilon={info['epsilon']!r}")
        for q, fv in info["f"].items():
            print(f"    f[{q}]={fv:.6f}  f_eps[{q}]={info['f_eps'][q]:.6f}")
        for j, rho in info["rho"].items():
            print(f"    rho[route {j}]={rho:.6f}")
    return 0


def _cmd_oracle(config: ExperimentConfig) -> int:
    validate_config(config)
    _, routes = _build_network(config)
    for mult in config.sweep:
        types, reg = _point_rates(config, mult)
        profile = _effective_profile(routes, types, reg)
        eps = choose_epsilon(profile, config.c0, config.epsilon_override)
        wait = expected_flow_delay(profile)
        sched = ct_delay_oracle(eps, profile)
        bound = dt_delay_bound(eps, profile)
        print(f"sweep x{mult}: epsilon={eps.epsilon!r}")
        for (j, x) in sorted(profile.lam):
            d = profile.routes[j].hop_count
            rho = profile.rho[j]
            b_w = x * d / (1.0 - rho)
            print(
                f"  route {j} size {x}: hops={d} rho={rho:.4f} "
                f"wait={wait[(j, x)]:.4f} sched={sched[(j, x)]:.4f} "
                f"bound_wait={b_w:.4f} bound_sched={bound[(j, x)]:.4f} "
                f"bound_total={b_w + bound[(j, x)]:.4f}"
            )
    return 0


def _cmd_run(config: ExperimentConfig, out: str | None, seed: int | None, jobs: int,
             require_sweep: bool) -> int:
    if require_sweep and len(config.sweep) < 2:
        raise ConfigError("sweep command needs a config with at least two sweep points")
    result = run_experiment(config, out_dir=out, seed=seed, jobs=jobs)
    print(format_report([(p.mult, p.stats) for p in result.points],
                        slack=config.bound_slack))
    print(json.dumps(result.verdict, indent=2, sort_keys=True))
    return 0 if result.passed else 1


def _cmd_selftest(fast: bool) -> int:
    results = run_selftest(fast=fast)
    for r in results:
        print(r.line())
    return 0 if all(r.passed for r in results) else 1


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _cmd_selftest(args.fast)
        config = load_config(args.config)
        if args.seed is not None:
            config.seed = args.seed
        if args.command == "validate":
            return _cmd_validate(config)
        if args.command == "oracle":
            return _cmd_oracle(config)
        return _cmd_run(config, args.out, None, args.jobs, require_sweep=args.command == "sweep")
    except DcflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
