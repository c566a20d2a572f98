"""Experiment configuration and the runner that fans out (policy, seed) simulations.

Config files are INI-style (see README for every key)::

    [cluster]
    num_servers = 8
    gpus_per_server = 4
    nic_gbps = 1

    [workload]
    source = synthetic
    num_jobs = 2500
    simulate_last = 500

    [scheduler]
    policies = ASRPT, WCS_DURATION

    [experiment]
    seeds = 0, 1
    sweep = nic_gbps: 1, 10, 50
"""

from __future__ import annotations

import configparser
import csv
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from ..engine import MetricsReport, metrics_row, run, write_jobs_csv
from ..model import GB, ClusterConfig, JobSpec, gbps
from ..predictor import (PREDICTORS, ForestConfig, ForestPredictor, GroupMeanPredictor,
                         GroupMedianPredictor, PerfectPredictor, Predictor, ZeroPredictor,
                         examples_from_jobs, fit)
from ..schedulers import Policy, SchedulerConfig
from .catalog import Catalog, default_catalog, load_profiles
from .synth import MaterializeOptions, SynthParams, generate_synthetic, materialize_jobs
from .trace import ingest_trace


class ConfigError(ValueError):
    pass


SWEEP_KEYS = ("nic_gbps", "single_gpu_fraction", "num_jobs", "simulate_last", "tau",
              "arrival_rate", "predictor")


@dataclass(frozen=True)
class ExperimentConfig:
    # cluster
    num_servers: int = 8
    gpus_per_server: int = 4
    nic_gbps: float = 1.0
    intra_gbytes: float = 300.0
    slot_length: float = 1.0
    # workload
    source: str = "synthetic"
    trace: Optional[str] = None
    profiles: Optional[str] = None
    num_jobs: int = 2500
    single_gpu_fraction: Optional[float] = 0.0
    arrival_rate: float = 0.001
    train_fraction: float = 0.8
    simulate_last: int = 500
    arrival_scale: float = 1.0
    iteration_scale: float = 1.0
    # scheduler
    policies: Tuple[Policy, ...] = tuple(Policy)
    tau: float = 1.0
    comm_heavy_threshold: float = 1.5
    # predictor
    predictor: str = "forest"
    num_trees: int = 100
    min_samples_leaf: int = 1
    refit_every: int = 0
    online_history: bool = False
    # experiment
    seeds: Tuple[int, ...] = (0,)
    workers: int = 1
    write_events: bool = False
    sweep_key: Optional[str] = None
    sweep_values: Tuple = ()

    def cluster(self) -> ClusterConfig:
        return ClusterConfig(self.num_servers, self.gpus_per_server, gbps(self.nic_gbps),
                             self.intra_gbytes * GB, self.slot_length)

    def scheduler(self, policy: Policy) -> SchedulerConfig:
        return SchedulerConfig(policy, self.comm_heavy_threshold, self.tau)

    def validate(self) -> None:
        if self.source not in ("synthetic", "trace"):
            raise ConfigError(f"workload source must be 'synthetic' or 'trace', not {self.source!r}")
        if self.source == "trace":
            if not self.trace:
                raise ConfigError("workload source 'trace' needs a trace path")
            if not Path(self.trace).is_file():
                raise ConfigError(f"trace file not found: {self.trace}")
        if self.profiles and not Path(self.profiles).is_file():
            raise ConfigError(f"profile file not found: {self.profiles}")
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"unknown predictor {self.predictor!r}; choose from "
                              f"{', '.join(PREDICTORS)}")
        if not 0 <= self.train_fraction < 1:
            raise ConfigError("train_fraction must be in [0, 1)")
        if not self.policies:
            raise ConfigError("no policies listed")
        if not self.seeds:
            raise ConfigError("no seeds listed")
        if self.sweep_key is not None:
            if self.sweep_key not in SWEEP_KEYS:
                raise ConfigError(f"cannot sweep {self.sweep_key!r}; choose from "
                                  f"{', '.join(SWEEP_KEYS)}")
            for v in self.sweep_values:
                self.at(v).validate_point()
        else:
            self.validate_point()

    def validate_point(self) -> None:
        try:
            self.cluster()
            for p in self.policies:
                self.scheduler(p)
            SynthParams(num_jobs=self.num_jobs, single_gpu_fraction=self.single_gpu_fraction or 0.0,
                        arrival_rate=self.arrival_rate)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        if self.predictor not in PREDICTORS:
            raise ConfigError(f"unknown predictor {self.predictor!r}")

    def at(self, value) -> "ExperimentConfig":
        """This config with the sweep parameter pinned to ``value``."""
        return replace(self, **{self.sweep_key: value})

    def points(self) -> List[Tuple[Optional[object], "ExperimentConfig"]]:
        if self.sweep_key is None:
            return [(None, self)]
        return [(v, self.at(v)) for v in self.sweep_values]


def _split(text: str) -> List[str]:
    return [t.strip() for t in text.replace("\n", ",").split(",") if t.strip()]


def _sweep_value(key: str, text: str):
    if key == "predictor":
        return text
    if key in ("num_jobs", "simulate_last"):
        return int(text)
    return float(text)


_FIELDS = {
    "cluster": {"num_servers": int, "gpus_per_server": int, "nic_gbps": float,
                "intra_gbytes": float, "slot_length": float},
    "workload": {"source": str, "trace": str, "profiles": str, "num_jobs": int,
                 "single_gpu_fraction": float, "arrival_rate": float,
                 "train_fraction": float, "simulate_last": int, "arrival_scale": float,
                 "iteration_scale": float},
    "scheduler": {"policies": "policies", "tau": float, "comm_heavy_threshold": float},
    "predictor": {"name": "predictor", "num_trees": int, "min_samples_leaf": int,
                  "refit_every": int, "online_history": bool},
    "experiment": {"seeds": "seeds", "workers": int, "write_events": bool, "sweep": "sweep"},
}


def parse_config(text: str, base_dir: Union[str, Path] = ".") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigError(str(e)) from None
    values: Dict[str, object] = {}
    for section in cp.sections():
        if section not in _FIELDS:
            raise ConfigError(f"unknown section [{section}]")
        spec = _FIELDS[section]
        for key, raw in cp.items(section):
            if key not in spec:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            kind = spec[key]
            raw = raw.strip()
            try:
                if kind == "policies":
                    values["policies"] = (tuple(Policy) if raw.lower() == "all" else
                                          tuple(Policy.parse(p) for p in _split(raw)))
                elif kind == "predictor":
                    values["predictor"] = raw.lower()
                elif kind == "seeds":
                    values["seeds"] = tuple(int(s) for s in _split(raw))
                elif kind == "sweep":
                    if raw:
                        skey, _, rest = raw.partition(":")
                        skey = skey.strip()
                        if skey not in SWEEP_KEYS:
                            raise ConfigError(f"cannot sweep {skey!r}")
                        values["sweep_key"] = skey
                        values["sweep_values"] = tuple(_sweep_value(skey, v) for v in _split(rest))
                        if not values["sweep_values"]:
                            raise ConfigError("sweep lists no values")
                elif kind is bool:
                    values[key] = cp.getboolean(section, key)
                elif key in ("trace", "profiles"):
                    values[key] = str(Path(base_dir, raw)) if raw else None
                elif key == "single_gpu_fraction" and raw.lower() in ("", "trace", "none"):
                    values[key] = None
                else:
                    values[key] = kind(raw)
            except ConfigError:
                raise
            except ValueError as e:
                raise ConfigError(f"[{section}] {key}: {e}") from None
    cfg = ExperimentConfig(**values)
    cfg.validate()
    return cfg


def load_config(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    return parse_config(path.read_text(encoding="utf-8"), base_dir=path.parent)


@dataclass
class Workload:
    cluster: ClusterConfig
    history: List[JobSpec]
    jobs: List[JobSpec]


def _catalog(cfg: ExperimentConfig) -> Catalog:
    if cfg.profiles:
        with open(cfg.profiles, newline="", encoding="utf-8") as fh:
            return load_profiles(fh)
    return default_catalog()


def build_workload(cfg: ExperimentConfig, seed: int,
                   reference: Optional[ClusterConfig] = None) -> Workload:
    """Training history and the jobs to simulate, arrivals shifted to start at 0.

    Iteration counts are derived on ``reference`` (default: this config's
    cluster) so a bandwidth sweep replays the same jobs.
    """
    catalog = _catalog(cfg)
    if cfg.source == "trace":
        rows = ingest_trace(cfg.trace)
    else:
        params = SynthParams(num_jobs=cfg.num_jobs,
                             single_gpu_fraction=cfg.single_gpu_fraction or 0.0,
                             arrival_rate=cfg.arrival_rate)
        rows, _ = generate_synthetic(params, seed)
    rows = sorted(rows, key=lambda r: (r.submit_time, r.job_id))
    opts = MaterializeOptions(single_gpu_fraction=cfg.single_gpu_fraction
                              if cfg.source == "trace" else None,
                              arrival_scale=cfg.arrival_scale,
                              iteration_scale=cfg.iteration_scale)
    jobs = materialize_jobs(rows, catalog, reference or cfg.cluster(), opts, seed)
    cut = int(cfg.train_fraction * len(jobs))
    history, sim = jobs[:cut], jobs[cut:]
    if cfg.simulate_last:
        sim = sim[-cfg.simulate_last:]
    if sim:
        r0 = sim[0].arrival
        sim = [replace(j, arrival=j.arrival - r0) for j in sim]
    return Workload(cfg.cluster(), history, sim)


@lru_cache(maxsize=8)
def _fitted_forest(history_key: Tuple, config: ForestConfig):
    from ..predictor import TrainingExample
    return fit([TrainingExample(*k) for k in history_key], config)


def make_predictor(cfg: ExperimentConfig, history: Sequence[JobSpec], seed: int) -> Predictor:
    name = cfg.predictor
    examples = examples_from_jobs(history)
    if name == "forest":
        fc = ForestConfig(cfg.num_trees, cfg.min_samples_leaf, True, seed)
        key = tuple((e.group_id, e.user_id, e.iterations) for e in examples)
        return ForestPredictor(examples, fc, cfg.refit_every or None,
                               model=_fitted_forest(key, fc))
    if name == "mean":
        return GroupMeanPredictor(examples, online=cfg.online_history)
    if name == "median":
        return GroupMedianPredictor(examples, online=cfg.online_history)
    if name == "perfect":
        return PerfectPredictor()
    if name == "zero":
        return ZeroPredictor()
    raise ConfigError(f"unknown predictor {name!r}")


def run_point(cfg: ExperimentConfig, policy: Policy, seed: int,
              reference: Optional[ClusterConfig] = None) -> MetricsReport:
    wl = build_workload(cfg, seed, reference)
    return run(wl.jobs, wl.cluster, cfg.scheduler(policy), make_predictor(cfg, wl.history, seed),
               seed=seed, record_events=cfg.write_events)


def _tag(policy: Policy, seed: int, key: Optional[str], value) -> str:
    tag = f"{policy.value}_seed{seed}"
    if key is not None:
        tag += f"_{key}{value}"
    return tag


def _task(args):
    cfg, policy, seed, value, reference = args
    point = cfg if value is None else cfg.at(value)
    return run_point(point, policy, seed, reference)


COMPARISON_FIELDS = ["policy", "seed", "jobs", "total_completion", "total_flow", "makespan",
                     "eps_total", "eps_avg", "vs_asrpt"]


@dataclass
class ExperimentResult:
    out_dir: Path
    rows: List[Dict[str, str]] = field(default_factory=list)
    files: List[Path] = field(default_factory=list)


def run_experiment(config: Union[ExperimentConfig, str, Path],
                   out_dir: Union[str, Path]) -> ExperimentResult:
    """Run every (sweep point, seed, policy) and write CSVs under ``out_dir``.

    Per run: ``jobs_<tag>.csv`` (per-job records) and ``metrics_<tag>.csv``
    (one summary row).  Across runs: ``comparison.csv``, ``long.csv`` and
    ``summary.txt``.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    cfg.validate()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    reference = cfg.cluster()
    tasks = [(cfg, p, s, v, reference) for v, _ in cfg.points() for s in cfg.seeds
             for p in cfg.policies]
    if cfg.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, os.cpu_count() or 1)) as ex:
            reports = list(ex.map(_task, tasks))
    else:
        reports = [_task(t) for t in tasks]

    result = ExperimentResult(out)
    base: Dict[Tuple, float] = {}
    for (_, p, s, v, _), rep in zip(tasks, reports):
        if p == Policy.ASRPT:
            base[(s, v)] = rep.total_completion
    key = cfg.sweep_key
    for (_, p, s, v, _), rep in zip(tasks, reports):
        tag = _tag(p, s, key, v)
        path = out / f"jobs_{tag}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            write_jobs_csv(rep, fh)
        result.files.append(path)
        row = {"policy": p.value, "seed": str(s), **metrics_row(rep)}
        ref = base.get((s, v))
        row["vs_asrpt"] = repr(rep.total_completion / ref) if ref else ""
        if key is not None:
            row = {key: str(v), **row}
        path = out / f"metrics_{tag}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=list(row), lineterminator="\n")
            w.writeheader()
            w.writerow(row)
        result.files.append(path)
        if cfg.write_events:
            path = out / f"events_{tag}.log"
            path.write_text(rep.event_log(), encoding="utf-8")
            result.files.append(path)
        result.rows.append(row)

    fields = ([key] if key else []) + COMPARISON_FIELDS
    path = out / "comparison.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        w.writeheader()
        w.writerows(result.rows)
    result.files.append(path)

    path = out / "long.csv"
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sweep_key", "sweep_value", "policy", "seed", "metric", "value"])
        for row in result.rows:
            for m in ("total_completion", "total_flow", "makespan", "eps_avg"):
                w.writerow([key or "", row.get(key, "") if key else "", row["policy"],
                            row["seed"], m, row[m]])
    result.files.append(path)

    path = out / "summary.txt"
    path.write_text(format_table(result.rows, key), encoding="utf-8")
    result.files.append(path)
    return result


def format_table(rows: Sequence[Dict[str, str]], key: Optional[str] = None) -> str:
    head = ([key] if key else []) + ["policy", "seed", "total_completion_s", "makespan_s",
                                     "eps_avg", "vs_asrpt"]
    lines = ["  ".join(f"{h:>18}" for h in head)]
    for r in rows:
        cells = ([r[key]] if key else []) + [
            r["policy"], r["seed"], f"{float(r['total_completion']):.6g}",
            f"{float(r['makespan']):.6g}", f"{float(r['eps_avg']):.2f}",
            f"{float(r['vs_asrpt']):.3f}" if r["vs_asrpt"] else "-"]
        lines.append("  ".join(f"{c:>18}" for c in cells))
    return "\n".join(lines) + "\n"
