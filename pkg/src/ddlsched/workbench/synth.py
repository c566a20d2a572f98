"""Synthetic recurrent traces and trace-to-job materialization."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..model import ClusterConfig, JobSpec
from ..timing import alpha_min_est
from .catalog import Catalog, TrainingConfig, check_catalog, default_catalog
from .trace import TraceRow


@dataclass(frozen=True)
class SynthParams:
    num_jobs: int = 1000
    single_gpu_fraction: float = 0.7
    arrival_rate: float = 0.01  # jobs per second
    recurring_share: float = 0.7  # groups drawn with >= 5 submissions
    mean_extra_recurrences: float = 8.0
    max_users_per_group: int = 3
    num_users: int = 300
    multi_gpu_sizes: Tuple[int, ...] = (2, 4, 8)
    multi_gpu_weights: Tuple[float, ...] = (0.4, 0.4, 0.2)
    min_duration: float = 120.0
    max_duration: float = 4 * 3600.0
    jitter: float = 0.03
    early_stop_prob: float = 0.12

    def __post_init__(self):
        if self.num_jobs < 0:
            raise ValueError("num_jobs must be >= 0")
        if not 0.0 <= self.single_gpu_fraction <= 1.0:
            raise ValueError("single_gpu_fraction must be in [0, 1]")
        if not self.arrival_rate > 0:
            raise ValueError("arrival_rate must be > 0")
        if len(self.multi_gpu_sizes) != len(self.multi_gpu_weights) or not self.multi_gpu_sizes:
            raise ValueError("multi_gpu_sizes and multi_gpu_weights must match and be non-empty")
        if min(self.multi_gpu_sizes) < 2:
            raise ValueError("multi-GPU sizes must be >= 2")
        if not 0 < self.min_duration <= self.max_duration:
            raise ValueError("need 0 < min_duration <= max_duration")


def _group_sizes(p: SynthParams, rng) -> List[int]:
    sizes = []
    total = 0
    while total < p.num_jobs:
        if rng.random() < p.recurring_share:
            n = 5 + int(rng.geometric(1.0 / (1.0 + p.mean_extra_recurrences))) - 1
        else:
            n = int(rng.integers(1, 5))
        n = min(n, p.num_jobs - total)
        sizes.append(n)
        total += n
    return sizes


def split_single(sizes: Sequence[int], fraction: float, rng) -> List[bool]:
    """Pick whole groups to be single-GPU so their job share lands near ``fraction``."""
    target = fraction * sum(sizes)
    single = [False] * len(sizes)
    got = 0
    for i in rng.permutation(len(sizes)):
        if got + sizes[i] <= target + 0.5:
            single[i] = True
            got += sizes[i]
    return single


def generate_synthetic(params: SynthParams = SynthParams(), seed: int = 0,
                       catalog: Optional[Catalog] = None) -> Tuple[List[TraceRow], Catalog]:
    """Reproducible recurrent trace plus the catalog it is meant to be paired with.

    Each group has a few users; a user's resubmissions of a group run for
    nearly the same time, while different users of one group differ by up
    to 4x and a share of jobs stop early.
    """
    rng = np.random.default_rng(seed)
    p = params
    sizes = _group_sizes(p, rng)
    single = split_single(sizes, p.single_gpu_fraction, rng)
    weights = np.asarray(p.multi_gpu_weights, dtype=float)
    weights = weights / weights.sum()
    lo, hi = math.log(p.min_duration), math.log(p.max_duration)

    jobs = []  # (group, user, duration, gpus)
    for gid, size in enumerate(sizes):
        gpus = 1 if single[gid] else int(rng.choice(p.multi_gpu_sizes, p=weights))
        nusers = int(rng.integers(1, p.max_users_per_group + 1))
        users = rng.choice(p.num_users, size=nusers, replace=False)
        base = math.exp(rng.uniform(lo, hi))
        factors = np.exp(rng.uniform(math.log(0.25), math.log(4.0), size=nusers))
        factors[0] = 1.0
        share = rng.dirichlet(np.ones(nusers))
        for _ in range(size):
            u = int(rng.choice(nusers, p=share))
            d = base * factors[u] * (1.0 + p.jitter * rng.standard_normal())
            if rng.random() < p.early_stop_prob:
                d *= rng.uniform(0.02, 0.3)
            d = float(min(max(round(d, 3), 1.0), 10 * p.max_duration))
            jobs.append((gid, int(users[u]), d, gpus))

    order = rng.permutation(len(jobs))
    gaps = rng.exponential(1.0 / p.arrival_rate, size=len(jobs))
    if len(gaps):
        gaps[0] = 0.0
    times = np.round(np.cumsum(gaps), 3)
    rows = []
    for idx, (pos, t) in enumerate(zip(order, times)):
        gid, uid, d, gpus = jobs[pos]
        rows.append(TraceRow(idx, float(t), d, gpus, uid, gid))
    return rows, catalog if catalog is not None else default_catalog()


def random_availability(rng, n: int, g: int):
    """Random per-server free counts (each <= g) summing to ``n``."""
    slots = []
    left = n
    m = 0
    while left > 0:
        c = int(rng.integers(1, min(g, left) + 1))
        slots.append((m, c))
        left -= c
        m += 1
    return slots


@dataclass(frozen=True)
class MaterializeOptions:
    single_gpu_fraction: Optional[float] = None  # re-split groups to this job share
    arrival_scale: float = 1.0
    iteration_scale: float = 1.0
    multi_gpu_sizes: Tuple[int, ...] = (2, 4, 8)

    def __post_init__(self):
        if self.single_gpu_fraction is not None and not 0 <= self.single_gpu_fraction <= 1:
            raise ValueError("single_gpu_fraction must be in [0, 1]")
        if not (self.arrival_scale > 0 and self.iteration_scale > 0):
            raise ValueError("scale factors must be > 0")


class CatalogMismatch(ValueError):
    pass


def pick_config(catalog: Catalog, gpus: int, rng) -> Tuple[str, TrainingConfig]:
    """Random model, then random configuration, matching ``gpus``.

    Exact GPU matches are preferred; otherwise the smallest configuration
    larger than the request is used.
    """
    sizes = sorted({c.gpus for m in catalog for c in m.configs if c.gpus >= gpus})
    if gpus == 1:
        sizes = [1] if 1 in sizes else []
    if not sizes:
        raise CatalogMismatch(f"no catalog configuration provides {gpus} GPUs")
    size = sizes[0]
    models = [m for m in catalog if any(c.gpus == size for c in m.configs)]
    model = models[int(rng.integers(len(models)))]
    configs = [c for c in model.configs if c.gpus == size]
    return model.name, configs[int(rng.integers(len(configs)))]


def group_requests(rows: Sequence[TraceRow], options: MaterializeOptions,
                   seed: int) -> Dict[int, int]:
    """GPU request per group, taken from its earliest submission."""
    first: Dict[int, TraceRow] = {}
    counts: Dict[int, int] = {}
    for r in sorted(rows, key=lambda r: (r.submit_time, r.job_id)):
        first.setdefault(r.group_id, r)
        counts[r.group_id] = counts.get(r.group_id, 0) + 1
    req = {g: r.num_gpus for g, r in first.items()}
    if options.single_gpu_fraction is None:
        return req
    groups = sorted(req)
    rng = np.random.default_rng([seed, 1])
    single = split_single([counts[g] for g in groups], options.single_gpu_fraction, rng)
    for g, s in zip(groups, single):
        if s:
            req[g] = 1
        elif req[g] == 1:
            req[g] = int(rng.choice(options.multi_gpu_sizes))
    return req


def materialize_jobs(rows: Sequence[TraceRow], catalog: Catalog, cluster: ClusterConfig,
                     options: MaterializeOptions = MaterializeOptions(),
                     seed: int = 0) -> List[JobSpec]:
    """Turn trace rows into jobs; every submission of a group trains the same config.

    Iterations are the trace duration divided by the consolidated
    per-iteration estimate on ``cluster``.
    """
    check_catalog(catalog)
    req = group_requests(rows, options, seed)
    chosen: Dict[int, TrainingConfig] = {}
    for g in sorted(req):
        rng = np.random.default_rng([seed, g])
        chosen[g] = pick_config(catalog, req[g], rng)[1]
    L = cluster.slot_length
    jobs = []
    for r in rows:
        cfg = chosen[r.group_id]
        a_min = alpha_min_est(JobSpec(-1, cfg.stages), cluster)[0]
        n = max(1, round(r.duration * options.iteration_scale / a_min))
        arrival = int(math.floor(r.submit_time * options.arrival_scale / L + 1e-9))
        jobs.append(JobSpec(r.job_id, cfg.stages, arrival, int(n), r.group_id, r.user_id))
    return jobs


def config_names(rows: Sequence[TraceRow], catalog: Catalog,
                 options: MaterializeOptions = MaterializeOptions(),
                 seed: int = 0) -> Dict[int, Tuple[str, str]]:
    """(model, config) chosen for each group; same draw as materialize_jobs."""
    req = group_requests(rows, options, seed)
    out = {}
    for g in sorted(req):
        name, cfg = pick_config(catalog, req[g], np.random.default_rng([seed, g]))
        out[g] = (name, cfg.name)
    return out
