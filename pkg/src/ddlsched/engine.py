"""Slotted simulation loop, metrics, and the competitive-ratio bound.

Per visited slot: finished jobs release their GPUs, arrivals are predicted
and handed to the scheduler, then the scheduler acts.  Slots where nothing
can change are skipped.
"""

from __future__ import annotations

import csv
import heapq
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from .model import ClusterConfig, JobSpec, Placement, ScheduleRecord
from .predictor import PerfectPredictor, Predictor, prediction_errors
from .schedulers import JobInfo, SchedulerConfig, make_info, make_scheduler
from .timing import alpha_max, alpha_min_est


class InfeasibleJobError(ValueError):
    pass


class BoundInapplicable(ValueError):
    pass


@dataclass(frozen=True)
class JobResult:
    job_id: int
    arrival: int
    start: int
    completion: float
    gpus: int
    iterations: int
    predicted: int
    alpha: float
    alpha_min: float
    alpha_max: float
    occupancy_slots: int

    def flow(self, slot_length: float) -> float:
        return self.completion - self.arrival * slot_length


@dataclass
class MetricsReport:
    total_completion: float
    total_flow: float
    makespan: float
    eps_total: float
    eps_avg: float
    results: List[JobResult]
    records: List[ScheduleRecord]
    events: List[str]
    busy_gpu_slots: int = 0

    @property
    def num_jobs(self) -> int:
        return len(self.results)

    def event_log(self) -> str:
        return "".join(e + "\n" for e in self.events)

    def summary(self) -> str:
        return (f"jobs={self.num_jobs} total_completion={self.total_completion:.6f}s "
                f"total_flow={self.total_flow:.6f}s makespan={self.makespan:.6f}s "
                f"eps={self.eps_total:.0f} eps_avg={self.eps_avg:.4f}")


JOB_CSV_FIELDS = ["job_id", "arrival", "start", "completion", "gpus", "iterations",
                  "predicted", "alpha", "alpha_min", "alpha_max", "occupancy_slots"]


def write_jobs_csv(report: MetricsReport, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(JOB_CSV_FIELDS)
    for r in report.results:
        w.writerow([r.job_id, r.arrival, r.start, repr(r.completion), r.gpus, r.iterations,
                    r.predicted, repr(r.alpha), repr(r.alpha_min), repr(r.alpha_max),
                    r.occupancy_slots])


def metrics_row(report: MetricsReport) -> Dict[str, str]:
    return {
        "jobs": str(report.num_jobs),
        "total_completion": repr(report.total_completion),
        "total_flow": repr(report.total_flow),
        "makespan": repr(report.makespan),
        "eps_total": repr(report.eps_total),
        "eps_avg": repr(report.eps_avg),
    }


class Simulation:
    """Mutable cluster state driven by one scheduler."""

    def __init__(self, cluster: ClusterConfig, scheduler, record_events: bool = True):
        self.cluster = cluster
        self.scheduler = scheduler
        self.free = [cluster.gpus_per_server] * cluster.num_servers
        self.total_free = cluster.total_gpus
        self.running: List[Tuple[int, int]] = []  # heap of (end slot, job id)
        self.records: Dict[int, ScheduleRecord] = {}
        self.infos: Dict[int, JobInfo] = {}
        self.events: List[str] = []
        self.record_events = record_events

    def log(self, t: int, kind: str, job_id: int, detail: str) -> None:
        if self.record_events:
            self.events.append(f"{t}\t{kind}\t{job_id}\t{detail}".rstrip())

    def start(self, info: JobInfo, placement: Placement, t: int) -> ScheduleRecord:
        job = info.job
        if job.job_id in self.records:
            raise RuntimeError(f"job {job.job_id} started twice")
        for m, row in placement.counts.items():
            n = sum(row)
            if n > self.free[m]:
                raise RuntimeError(f"server {m} over capacity at slot {t}")
            self.free[m] -= n
            self.total_free -= n
        rec = ScheduleRecord.make(job, t, placement, self.cluster.slot_length)
        self.records[job.job_id] = rec
        self.infos[job.job_id] = info
        heapq.heappush(self.running, (rec.end_slot, job.job_id))
        servers = ",".join(f"{m}:{sum(placement.counts[m])}" for m in sorted(placement.counts))
        self.log(t, "start", job.job_id,
                 f"alpha={placement.alpha:.9g} slots={rec.occupancy_slots} servers={servers}")
        return rec

    def retire_until(self, t: int) -> List[int]:
        done = []
        while self.running and self.running[0][0] <= t:
            _, jid = heapq.heappop(self.running)
            for m, row in self.records[jid].placement.counts.items():
                n = sum(row)
                self.free[m] += n
                self.total_free += n
            self.log(t, "finish", jid, "")
            done.append(jid)
        return done


def run(jobs: Sequence[JobSpec], cluster: ClusterConfig,
        config: SchedulerConfig = SchedulerConfig(),
        predictor: Optional[Predictor] = None, seed: int = 0,
        record_events: bool = True) -> MetricsReport:
    """Simulate ``jobs`` to completion and collect metrics.

    The run is a deterministic function of its inputs; ``seed`` is reserved
    for randomised predictors and currently unused by the loop itself.
    """
    predictor = predictor or PerfectPredictor()
    G = cluster.total_gpus
    for j in jobs:
        if j.gpus > G:
            raise InfeasibleJobError(f"job {j.job_id} needs {j.gpus} GPUs, cluster has {G}")
    if len({j.job_id for j in jobs}) != len(jobs):
        raise ValueError("duplicate job ids")
    order = sorted(jobs, key=lambda j: (j.arrival, j.job_id))
    if not order:
        return MetricsReport(0.0, 0.0, 0.0, 0.0, 0.0, [], [], [])

    scheduler = make_scheduler(config, cluster)
    sim = Simulation(cluster, scheduler, record_events)
    by_id = {j.job_id: j for j in order}
    nxt = 0
    finished = 0
    busy = 0
    t = order[0].arrival
    while True:
        for jid in sim.retire_until(t):
            predictor.observe(by_id[jid])
            finished += 1
        while nxt < len(order) and order[nxt].arrival == t:
            job = order[nxt]
            nxt += 1
            info = make_info(job, predictor.predict_job(job), cluster)
            sim.log(t, "arrive", job.job_id, f"predicted={info.predicted} gpus={info.gpus}")
            scheduler.on_arrival(info, t)
        scheduler.step(sim, t)
        if finished == len(order):
            break
        cands = []
        if nxt < len(order):
            cands.append(order[nxt].arrival)
        if sim.running:
            cands.append(sim.running[0][0])
        s = scheduler.next_event_slot()
        if s is not None:
            cands.append(s)
        if not cands:
            raise RuntimeError(f"simulation stalled at slot {t}")
        nt = min(cands)
        if nt <= t:
            raise RuntimeError(f"non-advancing clock at slot {t}")
        busy += (G - sim.total_free) * (nt - t)
        t = nt
    return _report(order, sim, cluster, busy)


def _report(order, sim, cluster, busy) -> MetricsReport:
    L = cluster.slot_length
    results = []
    for job in order:
        rec = sim.records[job.job_id]
        info = sim.infos[job.job_id]
        results.append(JobResult(job.job_id, job.arrival, rec.start, rec.completion, job.gpus,
                                 job.iterations, info.predicted, rec.placement.alpha,
                                 info.alpha_min, info.alpha_max, rec.occupancy_slots))
    total = sum(r.completion for r in results)
    flow = sum(r.flow(L) for r in results)
    makespan = max(r.completion for r in results)
    eps, eps_avg = prediction_errors((r.iterations, r.predicted) for r in results)
    return MetricsReport(total, flow, makespan, eps, eps_avg, results,
                         [sim.records[j.job_id] for j in order], sim.events, busy)


def competitive_bound(jobs: Sequence[JobSpec], cluster: ClusterConfig, tau: float,
                   eps_avg: float) -> float:
    """Competitive-ratio bound on total completion time versus the optimum.

    rho uses the Heavy-Edge estimate of the minimum per-iteration time.
    """
    if not jobs:
        raise BoundInapplicable("no jobs")
    G = cluster.total_gpus
    a_max = [alpha_max(j, cluster) for j in jobs]
    a_min = [alpha_min_est(j, cluster)[0] for j in jobs]
    g_max = max(j.gpus for j in jobs)
    if g_max >= G:
        raise BoundInapplicable("a job needs the whole cluster (G - g_max = 0)")
    rho = max(x / y for x, y in zip(a_max, a_min))
    alpha_hi = max(a_max)
    alpha_lo = min(a_min)
    frac = G / (G - g_max)
    return ((2 + tau + rho * frac) * rho
            + 2 * rho * g_max * alpha_hi / alpha_lo * (1 + tau + (1 + rho) * frac) * eps_avg)
