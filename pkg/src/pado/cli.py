"""Command line: ``pado simulate | sweep | validate``.

Exit codes: 0 success, 1 validation breach, 2 configuration error, 3 simulation fault.
"""
from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import config as cfgmod
from .export import write_run
from .game import ConfigError, run_horizon
from .model import POLICIES, SimParams, SimulationFault
from .plots import INDEX, sweep_plots
from .validation import SUITES, run_suites

EXIT_BREACH, EXIT_CONFIG, EXIT_FAULT = 1, 2, 3

SWEEP_PARAMS = {
    "V": lambda p, v: p.replace(vehicle_weight=float(v)),
    "H": lambda p, v: p.replace(server_weight=float(v)),
    "rho": lambda p, v: p.replace(arrival_prob=float(v)),
    "omega_scale": lambda p, v: p.replace(capacity=tuple(c * float(v) for c in p.capacity)),
}


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def load_params(args) -> SimParams:
    try:
        params = cfgmod.load(args.config) if args.config else SimParams()
        params = cfgmod.override(params, args.set)
        if getattr(args, "seed", None) is not None:
            params = params.replace(seed=args.seed)
        if getattr(args, "slots", None) is not None:
            params = params.replace(n_slots=args.slots)
        bad = params.validate()
        if bad:
            raise cfgmod.ConfigFileError([(cfgmod.FIELD_PATH.get(k.split("[")[0], k), m) for k, m in bad])
    except (cfgmod.ConfigFileError, ConfigError) as exc:
        raise CliError(EXIT_CONFIG, f"config error: {exc}") from exc
    return params


def simulate_to(params: SimParams, out_dir) -> dict:
    """Run one horizon and write its artefacts; faults are re-raised with the slot state."""
    try:
        series = run_horizon(params)
    except ConfigError as exc:
        raise CliError(EXIT_CONFIG, f"config error: {exc}") from exc
    except SimulationFault as exc:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "fault.json").write_text(json.dumps(dict(message=str(exc), state=exc.state), indent=2,
                                                    sort_keys=True, default=str) + "\n")
        raise CliError(EXIT_FAULT, f"simulation fault: {exc}") from exc
    write_run(series, out_dir)
    return series.summary()


def _sweep_job(job):
    params, out_dir = job
    try:
        simulate_to(params, out_dir)
        return None
    except CliError as exc:
        return exc.code, str(exc)


# ---------------------------------------------------------------- commands


def cmd_simulate(args) -> int:
    params = load_params(args)
    summary = simulate_to(params, args.out)
    print(f"{params.policy}: {summary['n_slots']} slots, mean delay {summary['mean_delay']:.4g} s, "
          f"mean vehicle cost {summary['mean_vehicle_cost']:.4g}, revenue {summary['total_revenue']:.4g} "
          f"-> {args.out}")
    return 0


def parse_values(text: str):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise CliError(EXIT_CONFIG, f"config error: --values: {exc}") from exc


def cmd_sweep(args) -> int:
    base = load_params(args)
    values = parse_values(args.values)
    policies = [p.strip() for p in args.policy.split(",") if p.strip()]
    unknown = [p for p in policies if p not in POLICIES]
    if unknown or not values:
        raise CliError(EXIT_CONFIG, f"config error: run.policy: unknown {unknown}" if unknown
                       else "config error: --values: empty")
    root = Path(args.out)
    jobs, runs = [], []
    for pol in policies:
        for v in values:
            params = SWEEP_PARAMS[args.param](base.replace(policy=pol), v)
            bad = params.validate()
            if bad:
                raise CliError(EXIT_CONFIG, f"config error: {bad}")
            rel = f"{pol}/{args.param}_{v:g}"
            jobs.append((params, root / rel))
            runs.append(dict(policy=pol, value=v, dir=rel))
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as pool:
            results = list(pool.map(_sweep_job, jobs))
    else:
        results = [_sweep_job(j) for j in jobs]
    for res in results:
        if res is not None:
            raise CliError(*res)
    (root / INDEX).write_text(json.dumps(dict(param=args.param, runs=runs), indent=2) + "\n")
    for path in sweep_plots(root):
        print(f"wrote {path}")
    return 0


def cmd_validate(args) -> int:
    params = load_params(args)
    results = run_suites(args.suite, args.n, params, args.seed or 0)
    for r in results:
        print(r.line())
        if r.warning:
            print(f"warning: {r.warning}", file=sys.stderr)
    report = dict(passed=all(r.passed for r in results), suites=[r.as_dict() for r in results])
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    return 0 if report["passed"] else EXIT_BREACH


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pado", description="Edge offloading pricing simulator.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="INI config (defaults to the built-in preset)")
        p.add_argument("--set", action="append", metavar="NAME=VALUE", help="override one config field")
        p.add_argument("--seed", type=int)

    p = sub.add_parser("simulate", help="run one horizon and write metrics")
    common(p)
    p.add_argument("--slots", type=int)
    p.add_argument("--out", default="run")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="one run per parameter value and policy, plus figures")
    common(p)
    p.add_argument("--param", required=True, choices=sorted(SWEEP_PARAMS))
    p.add_argument("--values", required=True, help="comma-separated values")
    p.add_argument("--policy", default="pado", help="comma-separated policies")
    p.add_argument("--slots", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", default="sweep")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("validate", help="compare the solvers against brute-force oracles")
    common(p)
    p.add_argument("--suite", default="all", choices=SUITES + ("all",))
    p.add_argument("--n", type=int, default=100, help="fuzzed instances per suite")
    p.add_argument("--json", help="write a JSON report here")
    p.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(exc, file=sys.stderr)
        return exc.code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
