"""Command line entry point: ``ddlsched <verb> [options]``."""

from __future__ import annotations

import argparse
import logging
import sys
import time
from dataclasses import replace
from pathlib import Path
from typing import List, Optional

import numpy as np

from .. import kernels
from ..bounds import check_instance, random_tiny_instance
from ..graph import build_graph, build_graph_from_stages, to_dot
from ..heavy_edge import brute_force_partition, cut_weight, partition
from ..model import ClusterConfig, gbps
from ..predictor import (ForestConfig, ForestPredictor, GroupMeanPredictor,
                         GroupMedianPredictor, ZeroPredictor, examples_from_jobs,
                         prediction_errors)
from ..schedulers import Policy
from ..timing import alpha_from_rows, alpha_min_est
from .catalog import default_catalog, save_profiles
from .experiment import ConfigError, ExperimentConfig, build_workload, load_config, run_experiment
from .synth import SynthParams, generate_synthetic, random_availability
from .trace import emit_trace

log = logging.getLogger("ddlsched")


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    changes = {}
    if getattr(args, "trace", None):
        changes.update(source="trace", trace=args.trace)
    if getattr(args, "policy", None):
        changes["policies"] = tuple(Policy.parse(p) for p in args.policy)
    if getattr(args, "seed", None) is not None:
        changes["seeds"] = (args.seed,)
    if changes:
        cfg = replace(cfg, **changes)
        cfg.validate()
    return cfg


def cmd_simulate(args) -> int:
    cfg = _config(args)
    out = Path(args.out_dir)
    t0 = time.perf_counter()
    res = run_experiment(cfg, out)
    print((out / "summary.txt").read_text(), end="")
    log.info("wrote %d files to %s in %.1fs", len(res.files), out, time.perf_counter() - t0)
    if args.dot_dump is not None:
        wl = build_workload(cfg, cfg.seeds[0])
        jobs = {j.job_id: j for j in wl.history + wl.jobs}
        if args.dot_dump not in jobs:
            print(f"error: job {args.dot_dump} not in the workload", file=sys.stderr)
            return 2
        job = jobs[args.dot_dump]
        _, p = alpha_min_est(job, wl.cluster)
        path = out / f"job_{args.dot_dump}.dot"
        path.write_text(to_dot(build_graph(job), f"job_{args.dot_dump}", p.assignment))
        print(f"graph written to {path}")
    return 0


def cmd_generate(args) -> int:
    params = SynthParams(num_jobs=args.num_jobs, single_gpu_fraction=args.single_gpu_fraction,
                         arrival_rate=args.arrival_rate)
    rows, catalog = generate_synthetic(params, args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit_trace(rows, out / "trace.csv")
    with open(out / "profiles.csv", "w", newline="", encoding="utf-8") as fh:
        save_profiles(catalog, fh)
    print(f"{len(rows)} jobs written to {out / 'trace.csv'}; catalog in {out / 'profiles.csv'}")
    return 0


def cmd_predict_eval(args) -> int:
    cfg = _config(args)
    seed = cfg.seeds[0]
    wl = build_workload(replace(cfg, simulate_last=0), seed)
    examples = examples_from_jobs(wl.history)
    t0 = time.perf_counter()
    forest = ForestPredictor(examples, ForestConfig(cfg.num_trees, cfg.min_samples_leaf, True, seed))
    fit_s = time.perf_counter() - t0
    preds = [("forest", forest), ("median", GroupMedianPredictor(examples, online=False)),
             ("mean", GroupMeanPredictor(examples, online=False)), ("zero", ZeroPredictor())]
    print(f"train {len(wl.history)} jobs, evaluate {len(wl.jobs)} jobs, forest fit {fit_s:.2f}s")
    print(forest.model.summary(), end="")
    print(f"{'predictor':>10} {'eps_total':>14} {'eps_avg':>12} {'exact':>7}")
    for name, p in preds:
        pairs = [(j.iterations, p.predict_job(j)) for j in wl.jobs]
        eps, avg = prediction_errors(pairs)
        exact = sum(n == q for n, q in pairs) / len(pairs) if pairs else 0.0
        print(f"{name:>10} {eps:>14.0f} {avg:>12.2f} {exact:>7.1%}")
    return 0


def cmd_partition_bench(args) -> int:
    """Heavy-Edge against the exhaustive optimum on catalog jobs and random availability."""
    rng = np.random.default_rng(args.seed)
    cluster = ClusterConfig(args.servers, args.gpus_per_server, gbps(args.nic_gbps), 300e9)
    g = cluster.gpus_per_server
    print(f"kernel backend: {kernels.BACKEND}")
    print(f"{'model':>14} {'config':>12} {'he_pitt_ms':>11} {'opt_pitt_ms':>12} "
          f"{'he_pct_ms':>10} {'opt_pct_ms':>11} {'cut_ratio':>9}")
    for model in default_catalog():
        for cfg in model.configs:
            n = cfg.gpus
            if n < 2 or n > 10:
                continue
            graph = build_graph_from_stages(cfg.stages)
            acc = {"he": [0.0, 0.0], "opt": [0.0, 0.0]}
            ratios = []
            for _ in range(args.cases):
                slots = random_availability(rng, n, g)
                t = time.perf_counter()
                he = partition(graph, slots)
                acc["he"][1] += time.perf_counter() - t
                t = time.perf_counter()
                opt, best = brute_force_partition(graph, slots)
                acc["opt"][1] += time.perf_counter() - t
                for key, p in (("he", he), ("opt", opt)):
                    acc[key][0] += alpha_from_rows(cfg.stages, p.counts.values(), g,
                                                   cluster.b_inter, cluster.b_intra)
                c = cut_weight(graph, he)
                ratios.append(c / best if best > 0 else 1.0)
            k = args.cases
            print(f"{model.name:>14} {cfg.name:>12} {1e3 * acc['he'][0] / k:>11.2f} "
                  f"{1e3 * acc['opt'][0] / k:>12.2f} {1e3 * acc['he'][1] / k:>10.3f} "
                  f"{1e3 * acc['opt'][1] / k:>11.3f} {np.mean(ratios):>9.3f}")
    return 0


def cmd_bound_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    cluster = ClusterConfig(2, 2, gbps(args.nic_gbps), 300e9)
    worst = {"relaxation": 0.0, "schedule": 0.0, "prediction": 0.0, "competitive": 0.0}
    failures = 0
    for i in range(args.count):
        jobs, pred = random_tiny_instance(rng, cluster)
        chk = check_instance(jobs, pred, cluster, tau=args.tau)
        for name, lhs, rhs in (("relaxation", chk.opt_a1, chk.relaxation_rhs),
                               ("schedule", chk.gamma, chk.schedule_rhs),
                               ("prediction", chk.opt_a1_pred, chk.prediction_rhs),
                               ("competitive", chk.ratio, chk.ratio_bound)):
            worst[name] = max(worst[name], lhs / rhs if rhs > 0 else 0.0)
        bad = chk.failures()
        if bad:
            failures += 1
            print(f"instance {i}: " + "; ".join(bad))
    for name, v in worst.items():
        print(f"{name:>9}: worst lhs/rhs = {v:.4f}")
    print(f"{args.count} instances, {failures} with a violated inequality")
    return 1 if failures else 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddlsched", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("simulate", help="run an experiment config")
    p.add_argument("--config", help="INI experiment file (defaults built in)")
    p.add_argument("--policy", action="append", help="restrict to this policy (repeatable)")
    p.add_argument("--seed", type=int, help="run only this seed")
    p.add_argument("--trace", help="replay this trace CSV instead of the configured workload")
    p.add_argument("--out-dir", default="results")
    p.add_argument("--dot-dump", type=int, metavar="JOB_ID",
                   help="also write the job graph of JOB_ID in DOT format")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("generate", help="write a synthetic trace and profile catalog")
    p.add_argument("--num-jobs", type=int, default=1000)
    p.add_argument("--single-gpu-fraction", type=float, default=0.7)
    p.add_argument("--arrival-rate", type=float, default=0.01)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="results")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("predict-eval", help="offline error of the iteration predictors")
    p.add_argument("--config")
    p.add_argument("--trace")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_predict_eval)

    p = sub.add_parser("partition-bench", help="Heavy-Edge vs exhaustive placement")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--servers", type=int, default=8)
    p.add_argument("--gpus-per-server", type=int, default=8)
    p.add_argument("--nic-gbps", type=float, default=10.0)
    p.set_defaults(func=cmd_partition_bench)

    p = sub.add_parser("bound-check", help="ratio-analysis inequalities on tiny instances")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--tau", type=float, default=1.0)
    p.add_argument("--nic-gbps", type=float, default=1.0)
    p.set_defaults(func=cmd_bound_check)
    return ap


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
