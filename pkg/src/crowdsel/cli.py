"""Command-line front end: generate instances, run episodes, sweep grids,
evaluate the closed-form regret bound, and self-test the core machinery.

All outputs are written atomically (temp file + rename) and carry a leading
comment line with the resolved configuration digest, so identical
invocations produce byte-identical files.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import tempfile
from typing import Optional

import numpy as np

from . import __version__
from . import environment as env
from .evaluation import (BoundInputs, ExperimentConfig, bound_for_instance,
                         run_sweep, theorem1_bound)
from .model import read_workers_csv, write_workers_csv
from .partition import choose_granularity, holder_delta

SUMMARY_COLUMNS = ["policy", "B", "N", "M", "alpha", "replications",
                   "mean_revenue", "std_revenue", "mean_expected_revenue",
                   "mean_regret", "std_regret", "theorem1_bound"]
STEP_COLUMNS = ["policy", "seed", "t", "worker_id", "cube", "cost", "reward"]


def _default_outdir() -> str:
    return os.environ.get("CROWDSEL_OUT", ".")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv_atomic(path: str, columns: list[str], rows: list[dict],
                      digest: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="", encoding="utf-8") as f:
            f.write(f"# crowdsel={__version__} config={digest}\n")
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_fmt(row[c]) for c in columns])
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _add_generator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=1000, help="number of workers")
    p.add_argument("--dimension", type=int, default=2)
    p.add_argument("--cost-range", type=float, nargs=2, default=[1.0, 1.5],
                   metavar=("LO", "HI"))
    p.add_argument("--capacity-range", type=int, nargs=2, default=[20, 40],
                   metavar=("LO", "HI"))
    p.add_argument("--mu-map", default="coordinate_mean",
                   choices=["coordinate_mean", "gaussian_distance_battery"])
    p.add_argument("--sigma", type=float, default=1.0)


def cmd_generate(args) -> int:
    mu_map = env.make_mu_map(args.mu_map, args.dimension, args.sigma)
    instance = env.gen_synthetic(args.n, args.dimension,
                                 tuple(args.cost_range),
                                 tuple(args.capacity_range), mu_map,
                                 args.seed)
    out = args.out or os.path.join(_default_outdir(), "workers.csv")
    os.makedirs(os.path.dirname(os.path.abspath(out)), exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(os.path.abspath(out)),
                               suffix=".tmp")
    os.close(fd)
    try:
        write_workers_csv(tmp, instance)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    print(f"wrote {out}: N={instance.n_workers} M={instance.dimension} "
          f"c_min={instance.c_min:.6g} c_max={instance.c_max:.6g} "
          f"tau_max={instance.tau_max}")
    return 0


def _config_from_args(args, single_policy: bool) -> ExperimentConfig:
    if args.config:
        config = ExperimentConfig.from_json(args.config)
    else:
        config = ExperimentConfig()
    if args.n is not None:
        config.n_workers = [args.n] if single_policy else args.n
    if getattr(args, "budget", None) is not None:
        config.budgets = [args.budget] if single_policy else args.budget
    if args.policy is not None:
        config.policies = [args.policy] if single_policy else args.policy
    if args.seed is not None:
        config.base_seed = args.seed
    if args.replications is not None:
        config.replications = args.replications
    if args.epsilon is not None:
        config.epsilon = args.epsilon
    if args.granularity is not None:
        config.granularity = (args.granularity if args.granularity == "singleton"
                              else int(args.granularity))
    if args.instance is not None:
        config.instance_path = args.instance
    if args.mu_map is not None:
        config.mu_map = args.mu_map
    if args.dimension is not None:
        config.dimension = args.dimension
    if getattr(args, "trace", None) is not None:
        config.trace_path = args.trace
    if getattr(args, "drift", False):
        config.drift = True
    return config


def _add_run_flags(p: argparse.ArgumentParser, single: bool) -> None:
    p.add_argument("--config", help="JSON config file (flags override it)")
    nargs = None if single else "+"
    p.add_argument("--n", type=int, nargs=nargs, default=None)
    p.add_argument("--budget", type=float, nargs=nargs, default=None)
    p.add_argument("--policy", nargs=nargs, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--replications", type=int, default=None)
    p.add_argument("--epsilon", type=float, default=None)
    p.add_argument("--granularity", default=None,
                   help="cells per axis, or 'singleton'")
    p.add_argument("--instance", default=None, help="worker CSV path")
    p.add_argument("--mu-map", default=None,
                   choices=["coordinate_mean", "gaussian_distance_battery"])
    p.add_argument("--dimension", type=int, default=None)
    p.add_argument("--trace", default=None, help="time-varying context CSV")
    p.add_argument("--drift", action="store_true",
                   help="generate a synthetic drift trace")
    p.add_argument("--out", default=None, help="summary CSV path")
    p.add_argument("--log-steps", action="store_true")


def _run_common(args, single: bool) -> int:
    config = _config_from_args(args, single_policy=single)
    rows, step_rows = run_sweep(config, collect_steps=args.log_steps)
    out = args.out or os.path.join(_default_outdir(), "summary.csv")
    _write_csv_atomic(out, SUMMARY_COLUMNS, rows, config.digest())
    print(f"wrote {out} ({len(rows)} rows)")
    if args.log_steps:
        steps_out = os.path.splitext(out)[0] + "_steps.csv"
        _write_csv_atomic(steps_out, STEP_COLUMNS, step_rows, config.digest())
        print(f"wrote {steps_out} ({len(step_rows)} rows)")
    return 0


def cmd_run(args) -> int:
    return _run_common(args, single=True)


def cmd_sweep(args) -> int:
    return _run_common(args, single=False)


def cmd_bound(args) -> int:
    if args.instance:
        mu_map = env.make_mu_map(args.mu_map or "coordinate_mean",
                                 args.dimension, args.sigma)
        instance = read_workers_csv(args.instance, args.dimension,
                                    budget=args.B, holder_L=mu_map.holder_L,
                                    holder_alpha=mu_map.holder_alpha,
                                    mu_of_context=lambda c: mu_map(c)[0])
        bound, dmin, d = bound_for_instance(instance)
        L, alpha = instance.holder_L, instance.holder_alpha
        c_min, c_max = instance.c_min, instance.c_max
        M = instance.dimension
    else:
        for name in ("B", "L", "alpha", "c_min", "c_max", "tau_max"):
            if getattr(args, name) is None:
                print(f"error: --{name.replace('_', '-')} is required without "
                      "--instance", file=sys.stderr)
                return 2
        M = args.dimension
        L, alpha, c_min, c_max = args.L, args.alpha, args.c_min, args.c_max
        dmin = args.delta_min
        d = choose_granularity(max(args.B, 1.0), alpha, M)
        bound = theorem1_bound(BoundInputs(
            B=args.B, M=M, alpha=alpha, L=L, c_min=c_min, c_max=c_max,
            tau_max=args.tau_max, delta_min=dmin))
    print(f"d = {d}")
    print(f"delta = {holder_delta(L, alpha, M, d)!r}")
    if dmin is None or dmin <= 0:
        print("delta_min = undefined")
        print("bound: not finite (delta_min = 0 or undefined)")
        return 0
    xi = 8.0 / (c_min ** 2 * dmin ** 2) + (c_max / c_min) ** 2
    h = xi * math.log(args.B / c_min) + math.pi ** 2 / 3.0 + 1.0
    print(f"delta_min = {dmin!r}")
    print(f"xi = {xi!r}")
    print(f"h(ln B) = {h!r}")
    print(f"bound = {bound!r}")
    return 0


def cmd_selftest(args) -> int:
    from .knapsack import (brute_force_bkp, density_greedy, greedy_counts,
                           greedy_counts_reference, round_down, solve_fbkp)
    from .model import allocation_value
    from .partition import PartitionGrid

    rng = np.random.default_rng(args.seed or 0)
    passed = failed = 0

    def check(name: str, ok: bool) -> None:
        nonlocal passed, failed
        if ok:
            passed += 1
        else:
            failed += 1
            print(f"FAIL {name}")

    for _ in range(100):
        n = int(rng.integers(1, 7))
        values = rng.random(n)
        costs = rng.uniform(1.0, 3.0, n)
        caps = rng.integers(0, 4, n)
        budget = float(rng.uniform(0.0, 10.0))
        greedy = density_greedy(values, costs, caps, budget)
        brute = brute_force_bkp(values, costs, caps, budget)
        frac = solve_fbkp(values, costs, caps, budget)
        floor = round_down(frac, values, costs)
        split_value = (values[frac.split_worker]
                       if frac.split_worker is not None else 0.0)
        check("greedy 2-approximation",
              greedy.expected_value >= 0.5 * brute.expected_value - 1e-9)
        check("rounding sandwich",
              floor.expected_value - 1e-9 <= brute.expected_value
              <= frac.value + 1e-9
              and frac.value <= floor.expected_value + split_value + 1e-9)
        check("greedy fast path",
              np.array_equal(greedy_counts(values, costs, caps, budget),
                             greedy_counts_reference(values, costs, caps,
                                                     budget)))

    for d in (2, 5, 10):
        grid = PartitionGrid(d=d, dimension=2)
        pts = rng.random((2000, 2))
        cells = grid.assign(pts)
        check("partition totality",
              bool(((cells >= 0) & (cells < grid.cube_count)).all()))
        same = cells[:-1] == cells[1:]
        mu = pts.mean(axis=1)
        gap = np.abs(mu[:-1] - mu[1:])[same]
        check("same-cell mean gap", bool((gap <= 1.0 / d + 1e-12).all()))

    from .evaluation import run_episode
    from .environment import CoordinateMeanMap, RewardModel, gen_synthetic
    from .policies import make_policy
    inst = gen_synthetic(50, 2, (1.0, 1.5), (2, 4), CoordinateMeanMap(2),
                         seed=1, budget=40.0)
    model = RewardModel()
    logs = []
    for _ in range(2):
        rng_ep = np.random.default_rng(7)
        policy = make_policy("caws", inst, inst.budget, rng_ep)
        logs.append(run_episode(inst, policy, model, rng_ep).steps)
    check("episode determinism", logs[0] == logs[1])

    print(f"selftest: {passed} passed, {failed} failed")
    return 0 if failed == 0 else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdsel",
        description="Budget-limited worker selection benchmark harness")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic worker CSV")
    _add_generator_flags(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("run", help="one policy, one budget, R replications")
    _add_run_flags(p, single=True)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="grid of budgets/worker counts/policies")
    _add_run_flags(p, single=False)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("bound", help="evaluate the closed-form regret bound")
    p.add_argument("--instance", default=None, help="worker CSV with means")
    p.add_argument("--B", type=float, required=True)
    p.add_argument("--dimension", "--M", type=int, default=2)
    p.add_argument("--alpha", type=float, default=None)
    p.add_argument("--L", type=float, default=None)
    p.add_argument("--c-min", type=float, default=None, dest="c_min")
    p.add_argument("--c-max", type=float, default=None, dest="c_max")
    p.add_argument("--tau-max", type=int, default=None, dest="tau_max")
    p.add_argument("--delta-min", type=float, default=None, dest="delta_min")
    p.add_argument("--mu-map", default=None,
                   choices=["coordinate_mean", "gaussian_distance_battery"])
    p.add_argument("--sigma", type=float, default=1.0)
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("selftest", help="run cross-module property checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
