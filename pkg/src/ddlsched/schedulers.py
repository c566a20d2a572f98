"""A-SRPT and the baseline queueing policies.

All policies map jobs with Heavy-Edge and time them with the same
per-iteration model; they differ in queue order, blocking, and which servers
they draw GPUs from.
"""

from __future__ import annotations

import enum
import math
from collections import deque
from dataclasses import dataclass
from functools import lru_cache
from typing import TYPE_CHECKING, Deque, List, Optional, Sequence, Tuple

from .graph import JobGraph, build_graph_from_stages
from .heavy_edge import partition
from .model import ClusterConfig, JobSpec, Placement, StageProfile
from .timing import alpha_from_rows, alpha_max, alpha_min_est
from .virtual import VirtualMachine, scaled_work

if TYPE_CHECKING:
    from .engine import Simulation


class Policy(str, enum.Enum):
    ASRPT = "ASRPT"
    SPJF = "SPJF"
    SPWF = "SPWF"
    WCS_DURATION = "WCS_DURATION"
    WCS_WORKLOAD = "WCS_WORKLOAD"
    WCS_SUBTIME = "WCS_SUBTIME"

    @classmethod
    def parse(cls, name: str) -> "Policy":
        key = name.strip().upper().replace("-", "_")
        try:
            return cls(key)
        except ValueError:
            raise ValueError(f"unknown policy {name!r}; choose from "
                             f"{', '.join(p.value for p in cls)}") from None


@dataclass(frozen=True)
class SchedulerConfig:
    policy: Policy = Policy.ASRPT
    comm_heavy_threshold: float = 1.5
    tau: float = 1.0

    def __post_init__(self):
        if not isinstance(self.policy, Policy):
            object.__setattr__(self, "policy", Policy.parse(self.policy))
        if not self.comm_heavy_threshold > 1:
            raise ValueError("comm_heavy_threshold must be > 1")
        if self.tau < 0:
            raise ValueError("tau must be >= 0")


@dataclass
class JobInfo:
    """A job plus the estimates the schedulers need, fixed at arrival."""

    job: JobSpec
    predicted: int
    alpha_max: float
    alpha_min: float

    @property
    def job_id(self) -> int:
        return self.job.job_id

    @property
    def gpus(self) -> int:
        return self.job.gpus

    @property
    def ratio(self) -> float:
        return self.alpha_max / self.alpha_min

    def predicted_duration(self) -> float:
        return self.predicted * self.alpha_min

    def predicted_workload(self) -> float:
        return self.gpus * self.predicted * self.alpha_min


def make_info(job: JobSpec, predicted: int, cluster: ClusterConfig) -> JobInfo:
    a_min, _ = alpha_min_est(job, cluster)
    return JobInfo(job, int(predicted), alpha_max(job, cluster), a_min)


def is_comm_heavy(info: JobInfo, threshold: float) -> bool:
    return info.alpha_max / info.alpha_min >= threshold


def classify(job: JobSpec, cluster: ClusterConfig, threshold: float = 1.5) -> str:
    info = make_info(job, 0, cluster)
    return "CommHeavy" if is_comm_heavy(info, threshold) else "NotCommHeavy"


def most_available(free: Sequence[int], need: int) -> List[Tuple[int, int]]:
    order = sorted((m for m in range(len(free)) if free[m] > 0), key=lambda m: (-free[m], m))
    return _take(order, free, need)


def least_available(free: Sequence[int], need: int) -> List[Tuple[int, int]]:
    order = sorted((m for m in range(len(free)) if free[m] > 0), key=lambda m: (free[m], m))
    return _take(order, free, need)


def _take(order, free, need):
    slots = []
    for m in order:
        if need <= 0:
            break
        c = min(free[m], need)
        slots.append((m, c))
        need -= c
    if need > 0:
        raise ValueError("not enough free GPUs")
    return slots


@lru_cache(maxsize=4096)
def _graph(stages: Tuple[StageProfile, ...]) -> JobGraph:
    return build_graph_from_stages(stages)


def place(job: JobSpec, slots: Sequence[Tuple[int, int]], cluster: ClusterConfig) -> Placement:
    """Heavy-Edge map ``job`` onto ``slots`` and attach its alpha."""
    p = partition(_graph(job.stages), slots)
    a = alpha_from_rows(job.stages, p.counts.values(), cluster.gpus_per_server,
                        cluster.b_inter, cluster.b_intra)
    return p.with_alpha(a)


class Scheduler:
    def __init__(self, config: SchedulerConfig, cluster: ClusterConfig):
        self.config = config
        self.cluster = cluster

    def on_arrival(self, info: JobInfo, t: int) -> None:
        raise NotImplementedError

    def step(self, sim: "Simulation", t: int) -> None:
        raise NotImplementedError

    def next_event_slot(self) -> Optional[int]:
        return None


class ASRPTScheduler(Scheduler):
    """Start jobs in the completion order of the virtual SRPT machine.

    The queue head blocks everything behind it until enough GPUs are free.
    Communication-heavy heads are consolidated on the emptiest servers and,
    if still too slow, may wait up to a tau-scaled window for a better
    placement while the rest of the queue waits too.
    """

    def __init__(self, config, cluster):
        super().__init__(config, cluster)
        self.vm = VirtualMachine(cluster.slot_length)
        self.queue: Deque[JobInfo] = deque()
        self._infos = {}
        self.delayed: Optional[Tuple[JobInfo, float, int]] = None  # (info, kappa, last slot)
        self.enqueue_order: List[int] = []

    def on_arrival(self, info, t):
        self._infos[info.job_id] = info
        G = self.cluster.total_gpus
        self.vm.add(info.job_id, t, scaled_work(info.gpus, G, info.predicted, info.alpha_min))

    def step(self, sim, t):
        for jid in self.vm.advance(t):
            self.queue.append(self._infos.pop(jid))
            self.enqueue_order.append(jid)
            sim.log(t, "enqueue", jid, "")
        if self.delayed is not None and not self._resume_delayed(sim, t):
            return
        thr = self.config.comm_heavy_threshold
        while self.queue:
            info = self.queue[0]
            if info.gpus > sim.total_free:
                break
            self.queue.popleft()
            if not is_comm_heavy(info, thr):
                sim.start(info, place(info.job, least_available(sim.free, info.gpus),
                                      self.cluster), t)
                continue
            p = place(info.job, most_available(sim.free, info.gpus), self.cluster)
            if p.alpha / info.alpha_min <= thr:
                sim.start(info, p, t)
                continue
            window = self.delay_window(info)
            sim.log(t, "comm_heavy_slow", info.job_id,
                    f"alpha={p.alpha:.9g} ratio={p.alpha / info.alpha_min:.9g} window={window}")
            if window == 0:
                sim.start(info, p, t)
                continue
            self.delayed = (info, p.alpha, t + window)
            sim.log(t, "delay_begin", info.job_id, f"kappa={p.alpha:.9g} until={t + window}")
            return

    def delay_window(self, info: JobInfo) -> int:
        L = self.cluster.slot_length
        span = self.config.tau * info.gpus / self.cluster.total_gpus * info.predicted * info.alpha_min
        if span <= 0:
            return 0
        return math.ceil(span / L - 1e-9)

    def _resume_delayed(self, sim, t) -> bool:
        info, kappa, last = self.delayed
        p = place(info.job, most_available(sim.free, info.gpus), self.cluster)
        sim.log(t, "delay_eval", info.job_id, f"alpha={p.alpha:.9g}")
        if p.alpha < kappa or t >= last:
            self.delayed = None
            sim.start(info, p, t)
            return True
        return False

    def next_event_slot(self):
        cands = []
        nxt = self.vm.next_completion_slot()
        if nxt is not None:
            cands.append(nxt)
        if self.delayed is not None:
            cands.append(self.delayed[2])
        return min(cands) if cands else None


_KEYS = {
    Policy.SPJF: lambda i: i.predicted_duration(),
    Policy.SPWF: lambda i: i.predicted_workload(),
    Policy.WCS_DURATION: lambda i: i.predicted_duration(),
    Policy.WCS_WORKLOAD: lambda i: i.predicted_workload(),
    Policy.WCS_SUBTIME: lambda i: 0.0,
}
_BLOCKING = {Policy.SPJF, Policy.SPWF}


class QueuePolicyScheduler(Scheduler):
    """Sorted-queue baselines.

    SPJF/SPWF stop at the first job that does not fit; the work-conserving
    variants skip it and keep scanning.  Ties go to earlier arrival, then id.
    """

    def __init__(self, config, cluster):
        super().__init__(config, cluster)
        self.key = _KEYS[config.policy]
        self.blocking = config.policy in _BLOCKING
        self.waiting: List[JobInfo] = []

    def on_arrival(self, info, t):
        self.waiting.append(info)

    def step(self, sim, t):
        if not self.waiting:
            return
        self.waiting.sort(key=lambda i: (self.key(i), i.job.arrival, i.job_id))
        kept = []
        blocked = False
        for info in self.waiting:
            if blocked or info.gpus > sim.total_free:
                kept.append(info)
                blocked = blocked or self.blocking
                continue
            sim.start(info, place(info.job, least_available(sim.free, info.gpus),
                                  self.cluster), t)
        self.waiting = kept


def make_scheduler(config: SchedulerConfig, cluster: ClusterConfig) -> Scheduler:
    if config.policy == Policy.ASRPT:
        return ASRPTScheduler(config, cluster)
    return QueuePolicyScheduler(config, cluster)
