"""Command-line entry point.

Subcommands: ``run`` (distributed search, sim or net transport), ``oracle``
(the sequential reference), ``compare`` (algorithms x worker counts x
seeds), ``enumerate`` (ground-truth optimum of a synthetic problem).
Config files use the canonical text encoding; flags override file values.

Exit codes: 0 success, 1 runtime fault, 2 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import statistics
import subprocess
import sys

from mpmcts.config import VALID_KEYS, Algorithm, ConfigError, RunConfig
from mpmcts.engine import run_distributed_sim, write_run_outputs
from mpmcts.problems import (
    SyntheticTreeSpec,
    build_problem,
    synthetic_enumerate_optimum,
)
from mpmcts.sequential import run_sequential_uct
from mpmcts.wire import TransportFault, canonical_dumps


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="config file (canonical text encoding)")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (repeatable); valid keys: "
        + ", ".join(sorted(VALID_KEYS)),
    )
    parser.add_argument("--algo", help="tds-uct | tds-df-uct | mp-mcts | sequential")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--overload", type=int)
    parser.add_argument("--formula", choices=["ucb1", "vl", "wu", "lcb"])
    parser.add_argument("--c", type=float, dest="exploration_c")
    parser.add_argument("--budget-sims", type=int)
    parser.add_argument("--budget-ticks", type=int)
    parser.add_argument("--budget-secs", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--problem", choices=["synthetic", "grammar", "external"])
    parser.add_argument("--depth", type=int, help="synthetic tree depth")
    parser.add_argument("--branching", type=int, help="synthetic tree branching")
    parser.add_argument("--grammar-fixture", help="grammar fixture file")
    parser.add_argument("--oracle-cmd", help="external oracle command line")
    parser.add_argument("--transport", choices=["sim", "net"])
    parser.add_argument("--manifest", help="worker_id host:port lines (net transport)")
    parser.add_argument("--worker-id", type=int, help="join a net run as this worker")
    parser.add_argument("--dump-tree", action="store_true", default=None)
    parser.add_argument("--out", help="output directory")


def _coerce(value: str):
    lowered = value.lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    if lowered in ("null", "none"):
        return None
    try:
        return int(value)
    except ValueError:
        pass
    try:
        return float(value)
    except ValueError:
        return value


def build_config(args: argparse.Namespace) -> RunConfig:
    data: dict = {}
    if args.config:
        with open(args.config) as fh:
            data.update(json.load(fh))
    for override in args.set:
        if "=" not in override:
            raise ConfigError(f"--set expects KEY=VALUE, got {override!r}")
        key, _, value = override.partition("=")
        data[key] = _coerce(value)

    problem = dict(data.get("problem") or {})
    if args.problem:
        if problem.get("kind") != args.problem:
            problem = {"kind": args.problem}
    problem.setdefault("kind", "synthetic")
    if problem["kind"] == "synthetic":
        if args.depth:
            problem["depth"] = args.depth
        if args.branching:
            problem["branching"] = args.branching
        problem.setdefault("depth", 4)
        problem.setdefault("branching", 3)
    elif problem["kind"] == "grammar" and args.grammar_fixture:
        problem["fixture"] = args.grammar_fixture
    elif problem["kind"] == "external" and args.oracle_cmd:
        problem["oracle_cmd"] = args.oracle_cmd
    data["problem"] = problem

    flag_map = {
        "algorithm": args.algo,
        "workers": args.workers,
        "overload": args.overload,
        "formula": args.formula,
        "exploration_c": args.exploration_c,
        "budget_sims": args.budget_sims,
        "budget_ticks": args.budget_ticks,
        "budget_secs": args.budget_secs,
        "seed": args.seed,
        "transport": args.transport,
        "manifest": args.manifest,
        "dump_tree": args.dump_tree,
    }
    for key, value in flag_map.items():
        if value is not None:
            data[key] = value
    return RunConfig.from_dict(data)


def cmd_run(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if cfg.transport == "net":
        return _run_net(cfg, args)
    if cfg.algorithm is Algorithm.SEQUENTIAL:
        return cmd_oracle(args)
    try:
        result = run_distributed_sim(cfg)
    except (RuntimeError, TransportFault) as exc:
        if args.out:
            _write_invalid_report(cfg, args.out, exc)
        raise
    if args.out:
        write_run_outputs(result, args.out)
    totals = result.report["totals"]
    print(
        f"best={result.report['best_reward']} "
        f"sims={totals['simulations']} ticks={result.report['total_time']}"
    )
    return 0


def _write_invalid_report(cfg: RunConfig, out_dir: str, exc: Exception) -> None:
    import os

    os.makedirs(out_dir, exist_ok=True)
    partial = {"config": cfg.to_dict(), "valid": False, "error": str(exc)}
    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        fh.write(canonical_dumps(partial))
        fh.write("\n")


def _run_net(cfg: RunConfig, args: argparse.Namespace) -> int:
    from mpmcts.net import parse_manifest, run_worker_net

    if args.worker_id is not None:
        return run_worker_net(cfg, args.worker_id, args.out)
    # spawn one process per manifest line and wait
    manifest = parse_manifest(cfg.manifest)
    base = [sys.executable, "-m", "mpmcts", "run", "--transport", "net"]
    if args.config:
        base += ["--config", args.config]
    for override in args.set:
        base += ["--set", override]
    passthrough = {
        "--algo": args.algo,
        "--workers": args.workers,
        "--overload": args.overload,
        "--formula": args.formula,
        "--c": args.exploration_c,
        "--budget-secs": args.budget_secs,
        "--seed": args.seed,
        "--problem": args.problem,
        "--depth": args.depth,
        "--branching": args.branching,
        "--grammar-fixture": args.grammar_fixture,
        "--oracle-cmd": args.oracle_cmd,
        "--manifest": args.manifest,
    }
    for flag, value in passthrough.items():
        if value is not None:
            base += [flag, str(value)]
    procs = []
    for wid in sorted(manifest):
        cmd = base + ["--worker-id", str(wid)]
        if wid == 0 and args.out:
            cmd += ["--out", args.out]
        procs.append(subprocess.Popen(cmd))
    code = 0
    for proc in procs:
        code = code or proc.wait()
    return code


def cmd_oracle(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    problem = build_problem(cfg.problem, cfg.seed)
    result = run_sequential_uct(cfg, problem)
    print(f"best={result.best_reward} sims={len(result.trace)} nodes={result.tree_size}")
    if args.out:
        import os

        os.makedirs(args.out, exist_ok=True)
        report = {
            "config": cfg.to_dict(),
            "best_reward": result.best_reward,
            "best_solution": result.best_solution,
            "simulations": len(result.trace),
            "tree_size": result.tree_size,
        }
        with open(os.path.join(args.out, "oracle_report.json"), "w") as fh:
            fh.write(canonical_dumps(report))
            fh.write("\n")
        with open(os.path.join(args.out, "oracle_trace.csv"), "w") as fh:
            fh.write("path,reward\n")
            for path, reward in result.trace:
                fh.write(f"{'.'.join(map(str, path))},{reward!r}\n")
    return 0


def cmd_enumerate(args: argparse.Namespace) -> int:
    cfg = build_config(args)
    if cfg.problem.get("kind") != "synthetic":
        raise ConfigError("enumerate needs a synthetic problem")
    spec = SyntheticTreeSpec(
        depth=cfg.problem["depth"],
        branching=cfg.problem["branching"],
        seed=cfg.problem.get("reward_seed", cfg.seed),
    )
    best_reward, best_path = synthetic_enumerate_optimum(spec)
    out = {
        "best_reward": best_reward,
        "best_path": list(best_path),
        "leaves": spec.branching**spec.depth,
    }
    print(canonical_dumps(out))
    return 0


def cmd_compare(args: argparse.Namespace) -> int:
    algos = [Algorithm.from_name(a) for a in args.algos.split(",")]
    worker_counts = [int(w) for w in args.worker_counts.split(",")]
    cells = []
    for algo in algos:
        for workers in worker_counts:
            rewards = []
            for seed_offset in range(args.seeds):
                run_args = argparse.Namespace(**vars(args))
                run_args.algo = algo.value
                run_args.workers = workers
                cfg = build_config(run_args)
                cfg.seed = (args.seed or 0) + seed_offset
                if algo is Algorithm.SEQUENTIAL:
                    problem = build_problem(cfg.problem, cfg.seed)
                    rewards.append(run_sequential_uct(cfg, problem).best_reward)
                else:
                    rewards.append(run_distributed_sim(cfg).report["best_reward"])
            mean = statistics.fmean(rewards)
            std = statistics.pstdev(rewards) if len(rewards) > 1 else 0.0
            cells.append(
                {
                    "algorithm": algo.value,
                    "workers": workers,
                    "seeds": args.seeds,
                    "mean_best": mean,
                    "stddev_best": std,
                    "best_rewards": rewards,
                }
            )
            print(
                f"{algo.value:>11} workers={workers:<4} "
                f"best={mean:+.4f} +/- {std:.4f}  (n={args.seeds})"
            )
    if args.out:
        import os

        os.makedirs(args.out, exist_ok=True)
        with open(os.path.join(args.out, "compare.json"), "w") as fh:
            fh.write(canonical_dumps({"cells": cells}))
            fh.write("\n")
    return 0


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mpmcts",
        description="Distributed-memory parallel Monte-Carlo tree search",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a distributed search")
    _add_config_flags(run)
    run.set_defaults(func=cmd_run)

    oracle = sub.add_parser("oracle", help="run the sequential reference search")
    _add_config_flags(oracle)
    oracle.set_defaults(func=cmd_oracle)

    enum = sub.add_parser("enumerate", help="brute-force a synthetic problem's optimum")
    _add_config_flags(enum)
    enum.set_defaults(func=cmd_enumerate)

    compare = sub.add_parser("compare", help="algorithms x workers x seeds summary")
    _add_config_flags(compare)
    compare.add_argument("--algos", required=True, help="comma list of algorithms")
    compare.add_argument(
        "--worker-counts", required=True, help="comma list of worker counts"
    )
    compare.add_argument("--seeds", type=int, default=10, help="seeds per cell")
    compare.set_defaults(func=cmd_compare)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (TransportFault, RuntimeError) as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
