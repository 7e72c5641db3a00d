"""Command-line entry point: ``optstop {bench,live,fit,parallel}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from . import __version__
from .bench import SCALING_MODELS, BenchmarkConfig, fit_scaling, giveup_size, read_scaling_points, run_benchmark
from .controller import (
    POLICIES,
    SessionConfig,
    run_session,
    session_summary,
    write_session_log,
    write_session_summary,
)
from .dist import DirichletPosterior, build_empirical, load_distribution, read_samples_csv
from .errors import ConfigError, DataError, OptStopError
from .parallel import MODES, HardwareCost, ParallelPlan, evaluate_plan, optimal_cores
from .solver import AnnealSchedule, derive_seed, load_instance, sa_run
from .stopping import CostModel, solve_for_effort

EXIT_CONFIG = 2
EXIT_DATA = 3


def _emit(payload: dict) -> None:
    json.dump(payload, sys.stdout, indent=2)
    sys.stdout.write("\n")


def _cmd_bench(args) -> None:
    config = BenchmarkConfig.from_json(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.output is not None:
        overrides["output_dir"] = Path(args.output)
    config = dataclasses.replace(config, **overrides)
    report = run_benchmark(config)
    _emit({"output_dir": str(report.output_dir),
           "files": [str(p.relative_to(report.output_dir)) for p in report.files]})


def _cmd_live(args) -> None:
    inst = load_instance(args.instance)
    prior = None
    if args.prior is not None:
        prior = DirichletPosterior.from_distribution(load_distribution(args.prior), args.prior_strength)
    config = SessionConfig(policy=args.policy, cost=CostModel(args.c, args.t_run),
                           burn_in_len=args.burn_in, tail_obs=args.tail_obs,
                           override_level=args.override_level, prior=prior,
                           max_iterations=args.max_iterations)
    sched = AnnealSchedule(args.sweeps)
    counter = iter(range(config.max_iterations))

    def sampler() -> float:
        return sa_run(inst, sched, derive_seed(args.seed, next(counter))).energy

    state = run_session(sampler, config)
    if args.output is not None:
        out = Path(args.output)
        out.mkdir(parents=True, exist_ok=True)
        write_session_log(out / "session_log.csv", state)
        write_session_summary(out / "session_summary.json", state)
    _emit(session_summary(state))


def _cmd_fit(args) -> None:
    fit = fit_scaling(read_scaling_points(args.input), args.model)
    payload = fit.to_dict()
    if args.gap is not None:
        payload["giveup_size"] = giveup_size(fit, args.gap)
    _emit(payload)


def _cmd_parallel(args) -> None:
    if args.max_cores < 1:
        raise ConfigError("--max-cores must be >= 1")
    hc = HardwareCost(args.ct, args.ccpu)
    d = build_empirical(read_samples_csv(args.input))
    choice = optimal_cores(d, hc, args.t_run, range(1, args.max_cores + 1), mode=args.mode)
    single = evaluate_plan(d, hc, ParallelPlan(1), args.t_run, "none")
    limit = solve_for_effort(d, args.ccpu * args.t_run) if args.ccpu > 0 else None
    _emit({"mode": args.mode, "optimal_cores": choice.n_cpu, "optimal_cost": choice.optimal_cost,
           "single_core_cost": single, "hardware_limit_cost": limit})


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optstop", description="Optimal-stopping benchmarks for randomized optimizers.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    b = sub.add_parser("bench", help="run a benchmark campaign")
    b.add_argument("--config", required=True, type=Path)
    b.add_argument("--seed", type=int)
    b.add_argument("--workers", type=int)
    b.add_argument("--output", type=Path, help="override the config's output_dir")
    b.set_defaults(func=_cmd_bench)

    lv = sub.add_parser("live", help="run one online stopping session with simulated annealing")
    lv.add_argument("--instance", required=True, type=Path)
    lv.add_argument("--policy", required=True, choices=POLICIES)
    lv.add_argument("--c", required=True, type=float, help="unit cost")
    lv.add_argument("--t-run", required=True, type=float, help="time per solver run")
    lv.add_argument("--prior", type=Path, help="distribution JSON used as the family prior")
    lv.add_argument("--prior-strength", type=float, default=500.0)
    lv.add_argument("--sweeps", type=int, default=100)
    lv.add_argument("--seed", type=int, default=0)
    lv.add_argument("--burn-in", type=int, default=500)
    lv.add_argument("--tail-obs", type=int, default=100)
    lv.add_argument("--override-level", type=float, default=0.99)
    lv.add_argument("--max-iterations", type=int, default=10**7)
    lv.add_argument("--output", type=Path, help="directory for the session log and summary")
    lv.set_defaults(func=_cmd_live)

    f = sub.add_parser("fit", help="fit a scaling model to size,value points")
    f.add_argument("--input", required=True, type=Path)
    f.add_argument("--model", required=True, choices=SCALING_MODELS)
    f.add_argument("--gap", type=float, help="E1 - E0 gap; reports the give-up size")
    f.set_defaults(func=_cmd_fit)

    pa = sub.add_parser("parallel", help="optimal core count from a sample CSV")
    pa.add_argument("--input", required=True, type=Path)
    pa.add_argument("--ct", required=True, type=float)
    pa.add_argument("--ccpu", required=True, type=float)
    pa.add_argument("--max-cores", required=True, type=int)
    pa.add_argument("--t-run", type=float, default=1.0)
    pa.add_argument("--mode", choices=MODES, default="embarrassing")
    pa.set_defaults(func=_cmd_parallel)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"optstop: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, OptStopError, OSError) as exc:
        print(f"optstop: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
