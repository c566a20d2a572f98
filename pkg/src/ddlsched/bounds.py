"""Exact optimum on tiny instances and the quantities the ratio analysis relates.

The optimum is found by branch and bound over job order and placement
mode.  Each job is dropped at its earliest feasible start given the jobs
placed before it (serial schedule generation).  Every active schedule arises
this way for some order and mode choice, and for a non-decreasing objective
such as total completion an optimal active schedule exists.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from .engine import BoundInapplicable, run, competitive_bound
from .model import ClusterConfig, JobSpec, Placement, ScheduleRecord, occupancy_slots
from .predictor import FixedPredictor, prediction_errors
from .schedulers import SchedulerConfig
from .timing import alpha_from_rows, alpha_max, alpha_min_est
from .virtual import scaled_work, srpt_total_completion

MAX_JOBS = 5
MAX_MODES = 5000


@dataclass(frozen=True)
class Mode:
    usage: Tuple[int, ...]  # GPUs taken on each server
    alpha: float
    placement: Placement


def _compositions(k: int, parts: int, cap: int):
    if parts == 1:
        if k <= cap:
            yield (k,)
        return
    for first in range(min(k, cap) + 1):
        for rest in _compositions(k - first, parts - 1, cap):
            yield (first,) + rest


def placement_modes(job: JobSpec, cluster: ClusterConfig) -> List[Mode]:
    """Every distinct per-server GPU usage with the fastest placement achieving it."""
    M, g = cluster.num_servers, cluster.gpus_per_server
    per_stage = [list(_compositions(k, M, g)) for k in job.replicas]
    total = math.prod(len(c) for c in per_stage)
    if total > MAX_MODES:
        raise ValueError(f"job {job.job_id}: {total} placements exceed the enumeration guard")
    best: Dict[Tuple[int, ...], Mode] = {}
    for combo in itertools.product(*per_stage):
        usage = tuple(sum(c[m] for c in combo) for m in range(M))
        if max(usage) > g:
            continue
        counts = {m: tuple(c[m] for c in combo) for m in range(M) if usage[m] > 0}
        a = alpha_from_rows(job.stages, counts.values(), g, cluster.b_inter, cluster.b_intra)
        old = best.get(usage)
        if old is None or a < old.alpha:
            best[usage] = Mode(usage, a, Placement(counts, alpha=a))
    return [best[u] for u in sorted(best)]


def true_alpha_min(job: JobSpec, cluster: ClusterConfig) -> float:
    return min(m.alpha for m in placement_modes(job, cluster))


@dataclass
class OptimalSchedule:
    total_completion: float
    records: List[ScheduleRecord]
    nodes: int


def optimal_schedule(jobs: Sequence[JobSpec], cluster: ClusterConfig) -> OptimalSchedule:
    """Minimum total completion over all non-preemptive schedules of ``jobs``."""
    if len(jobs) > MAX_JOBS:
        raise ValueError(f"brute force limited to {MAX_JOBS} jobs")
    if not jobs:
        return OptimalSchedule(0.0, [], 0)
    L = cluster.slot_length
    g = cluster.gpus_per_server
    M = cluster.num_servers
    modes = []
    for j in jobs:
        if j.gpus > cluster.total_gpus:
            raise ValueError(f"job {j.job_id} does not fit the cluster")
        ms = []
        for m in placement_modes(j, cluster):
            ms.append((m, occupancy_slots(j.iterations, m.alpha, L),
                       j.iterations * m.alpha))
        modes.append(ms)
    floor = [j.arrival * L + min(d for _, _, d in ms) for j, ms in zip(jobs, modes)]

    used: Dict[int, List[int]] = {}
    best_total = math.inf
    best_choice: List[Tuple[int, int, Mode]] = []
    choice: List[Tuple[int, int, Mode]] = []
    nodes = 0

    def fits(t, usage, dur):
        for s in range(t, t + dur):
            row = used.get(s)
            if row is not None and any(row[m] + usage[m] > g for m in range(M)):
                return False
        return True

    def mark(t, usage, dur, sign):
        for s in range(t, t + dur):
            row = used.setdefault(s, [0] * M)
            for m in range(M):
                row[m] += sign * usage[m]

    def dfs(remaining: Tuple[int, ...], partial: float):
        nonlocal best_total, best_choice, nodes
        nodes += 1
        if not remaining:
            if partial < best_total:
                best_total = partial
                best_choice = list(choice)
            return
        if partial + sum(floor[i] for i in remaining) >= best_total:
            return
        for idx in remaining:
            rest = tuple(i for i in remaining if i != idx)
            job = jobs[idx]
            for mode, dur, work in modes[idx]:
                t = job.arrival
                while not fits(t, mode.usage, dur):
                    t += 1
                c = t * L + work
                mark(t, mode.usage, dur, 1)
                choice.append((idx, t, mode))
                dfs(rest, partial + c)
                choice.pop()
                mark(t, mode.usage, dur, -1)

    dfs(tuple(range(len(jobs))), 0.0)
    records = [None] * len(jobs)
    for idx, t, mode in best_choice:
        records[idx] = ScheduleRecord.make(jobs[idx], t, mode.placement, L)
    return OptimalSchedule(best_total, records, nodes)


@dataclass
class BoundCheck:
    """Both sides of every inequality in the ratio analysis for one instance."""

    gamma: float
    opt: float
    opt_a1: float
    opt_a1_pred: float
    rho: float
    g_max: int
    alpha_hi: float
    eps: float
    eps_avg: float
    tau: float
    num_jobs: int
    total_gpus: int
    ratio_bound: float

    @property
    def relaxation_rhs(self) -> float:
        return self.rho * self.opt

    @property
    def schedule_rhs(self) -> float:
        G, gm = self.total_gpus, self.g_max
        return ((1 + self.tau + self.rho * G / (G - gm)) * self.opt_a1_pred
                + self.num_jobs * gm * self.alpha_hi / (G - gm) * self.eps
                + self.rho * self.opt)

    @property
    def prediction_rhs(self) -> float:
        return self.opt_a1 + self.num_jobs * self.g_max * self.alpha_hi / self.total_gpus * self.eps

    @property
    def ratio(self) -> float:
        return self.gamma / self.opt

    def failures(self, rtol: float = 1e-9) -> List[str]:
        out = []
        checks = [("relaxation", self.opt_a1, self.relaxation_rhs),
                  ("schedule", self.gamma, self.schedule_rhs),
                  ("prediction", self.opt_a1_pred, self.prediction_rhs),
                  ("competitive", self.ratio, self.ratio_bound)]
        for name, lhs, rhs in checks:
            if lhs > rhs * (1 + rtol):
                out.append(f"{name}: {lhs!r} > {rhs!r}")
        return out


def check_instance(jobs: Sequence[JobSpec], predicted: Dict[int, int], cluster: ClusterConfig,
                   tau: float = 1.0, threshold: float = 1.5) -> BoundCheck:
    """Run A-SRPT with fixed predictions and evaluate every inequality."""
    G = cluster.total_gpus
    g_max = max(j.gpus for j in jobs)
    if g_max >= G:
        raise BoundInapplicable("a job needs the whole cluster (G - g_max = 0)")
    L = cluster.slot_length
    report = run(jobs, cluster, SchedulerConfig(comm_heavy_threshold=threshold, tau=tau),
                 FixedPredictor(predicted), record_events=False)
    opt = optimal_schedule(jobs, cluster).total_completion
    a_min = {j.job_id: alpha_min_est(j, cluster)[0] for j in jobs}
    a_max = {j.job_id: alpha_max(j, cluster) for j in jobs}
    a1 = [(j.arrival * L, scaled_work(j.gpus, G, j.iterations, a_min[j.job_id])) for j in jobs]
    a1p = [(j.arrival * L, scaled_work(j.gpus, G, predicted[j.job_id], a_min[j.job_id]))
           for j in jobs]
    eps, eps_avg = prediction_errors((j.iterations, predicted[j.job_id]) for j in jobs)
    return BoundCheck(
        gamma=report.total_completion,
        opt=opt,
        opt_a1=srpt_total_completion(a1),
        opt_a1_pred=srpt_total_completion(a1p),
        rho=max(a_max[i] / a_min[i] for i in a_min),
        g_max=g_max,
        alpha_hi=max(a_max.values()),
        eps=eps,
        eps_avg=eps_avg,
        tau=tau,
        num_jobs=len(jobs),
        total_gpus=G,
        ratio_bound=competitive_bound(jobs, cluster, tau, eps_avg),
    )


def random_stages(rng, gpus: int, max_stages: int = 3):
    """Random stage list using exactly ``gpus`` replicas; sizes are loosely LLM-shaped."""
    from .model import MB, AllReduceKind, StageProfile

    num = int(rng.integers(1, min(max_stages, gpus) + 1))
    cuts = sorted(rng.choice(np.arange(1, gpus), size=num - 1, replace=False)) if num > 1 else []
    ks = np.diff([0, *cuts, gpus]).astype(int)
    act = float(rng.uniform(0.5, 40.0)) * MB
    kind = AllReduceKind.TAR if rng.random() < 0.3 else AllReduceKind.RAR
    stages = []
    for s, k in enumerate(ks):
        fp = float(rng.uniform(0.005, 0.05))
        stages.append(StageProfile(
            fp_time=fp, bp_time=2 * fp,
            data_in=act / k if s > 0 else 0.0,
            data_out=act / k if s + 1 < num else 0.0,
            param_size=float(rng.uniform(0.0, 200.0)) * MB,
            replicas=int(k), allreduce_kind=kind))
    return tuple(stages)


def random_tiny_instance(rng, cluster: ClusterConfig, max_jobs: int = 4,
                         max_arrival: int = 3, max_iterations: int = 40):
    """Jobs plus perturbed predictions for the brute-force bound checks."""
    num = int(rng.integers(1, max_jobs + 1))
    jobs = []
    predicted = {}
    for i in range(num):
        gpus = int(rng.integers(1, cluster.total_gpus))
        n = int(rng.integers(1, max_iterations + 1))
        jobs.append(JobSpec(i, random_stages(rng, gpus), int(rng.integers(0, max_arrival + 1)), n))
        roll = rng.random()
        if roll < 0.4:
            predicted[i] = n
        elif roll < 0.5:
            predicted[i] = 0
        else:
            predicted[i] = max(0, n + int(rng.integers(-n, n + 1)))
    return jobs, predicted
