"""Cluster, job and schedule types shared by every other module.

Units: seconds for time, bytes for data, bytes/second for bandwidth.
Byte quantities are decimal (1 MB = 10**6 bytes, 1 Gbps = 1.25e8 bytes/s).
Stages are indexed from 0 in code.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

KB = 1e3
MB = 1e6
GB = 1e9

# tolerance for the inter-stage data identity check
DATA_IDENTITY_RTOL = 1e-9


def gbps(x: float) -> float:
    """Convert gigabits per second to bytes per second."""
    return x * 1.25e8


class AllReduceKind(str, enum.Enum):
    RAR = "RAR"
    TAR = "TAR"


@dataclass(frozen=True)
class ClusterConfig:
    num_servers: int
    gpus_per_server: int
    b_inter: float
    b_intra: float
    slot_length: float = 1.0

    def __post_init__(self):
        if self.num_servers < 1:
            raise ValueError("num_servers must be >= 1")
        if self.gpus_per_server < 1:
            raise ValueError("gpus_per_server must be >= 1")
        if not self.b_inter > 0:
            raise ValueError("b_inter must be > 0")
        if self.b_intra < self.b_inter:
            raise ValueError("b_intra must be >= b_inter")
        if not self.slot_length > 0:
            raise ValueError("slot_length must be > 0")

    @property
    def total_gpus(self) -> int:
        return self.num_servers * self.gpus_per_server


@dataclass(frozen=True)
class StageProfile:
    """Per-replica profile of one pipeline stage.

    ``bp_coeff`` and ``allreduce_coeff`` are overlap multipliers on the
    backward time and the AllReduce time; 1.0 means no overlap.
    """

    fp_time: float
    bp_time: float
    data_in: float
    data_out: float
    param_size: float
    replicas: int = 1
    allreduce_kind: AllReduceKind = AllReduceKind.RAR
    bp_coeff: float = 1.0
    allreduce_coeff: float = 1.0

    def __post_init__(self):
        for name in ("fp_time", "bp_time", "data_in", "data_out", "param_size"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.replicas < 1:
            raise ValueError("replicas must be >= 1")
        if not isinstance(self.allreduce_kind, AllReduceKind):
            object.__setattr__(self, "allreduce_kind", AllReduceKind(self.allreduce_kind))


def _close(a: float, b: float, rtol: float) -> bool:
    return abs(a - b) <= rtol * max(abs(a), abs(b))


@dataclass(frozen=True)
class JobSpec:
    job_id: int
    stages: Tuple[StageProfile, ...]
    arrival: int = 0
    iterations: int = 1
    group_id: int = 0
    user_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "stages", tuple(self.stages))
        if self.arrival < 0:
            raise ValueError("arrival must be >= 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not self.stages:
            raise ValueError("a job needs at least one stage")
        check_data_identity(self.stages)

    @property
    def num_stages(self) -> int:
        return len(self.stages)

    @property
    def gpus(self) -> int:
        return required_gpus(self)

    @property
    def replicas(self) -> Tuple[int, ...]:
        return tuple(st.replicas for st in self.stages)


def check_data_identity(stages: Sequence[StageProfile]) -> None:
    """Reject profiles where 2*d_out[s-1]/k[s] != 2*d_in[s]/k[s-1]."""
    for s in range(1, len(stages)):
        prev, cur = stages[s - 1], stages[s]
        lhs = 2.0 * prev.data_out / cur.replicas
        rhs = 2.0 * cur.data_in / prev.replicas
        if not _close(lhs, rhs, DATA_IDENTITY_RTOL):
            raise ValueError(
                f"inter-stage data mismatch between stages {s - 1} and {s}: "
                f"{lhs!r} != {rhs!r}")


def required_gpus(job: JobSpec) -> int:
    return sum(st.replicas for st in job.stages)


@dataclass(frozen=True)
class Placement:
    """GPU counts per (server, stage) for one job.

    ``counts`` maps server id to a tuple of per-stage GPU counts; servers
    without any replica are omitted.  ``assignment`` optionally records the
    server of every graph vertex (stage replica) in vertex order.
    """

    counts: Mapping[int, Tuple[int, ...]]
    alpha: Optional[float] = None
    assignment: Optional[Tuple[int, ...]] = None

    def count(self, server: int, stage: int) -> int:
        row = self.counts.get(server)
        return 0 if row is None else row[stage]

    def servers(self) -> List[int]:
        return sorted(self.counts)

    def gpus_on(self, server: int) -> int:
        return sum(self.counts.get(server, ()))

    def stage_totals(self, num_stages: int) -> Tuple[int, ...]:
        tot = [0] * num_stages
        for row in self.counts.values():
            for s, c in enumerate(row):
                tot[s] += c
        return tuple(tot)

    def with_alpha(self, alpha: float) -> "Placement":
        return Placement(dict(self.counts), alpha, self.assignment)


def placement_from_assignment(assignment: Sequence[int], labels: Sequence[Tuple[int, int]],
                              num_stages: int) -> Placement:
    counts: Dict[int, List[int]] = {}
    for server, (stage, _) in zip(assignment, labels):
        counts.setdefault(server, [0] * num_stages)[stage] += 1
    return Placement({m: tuple(row) for m, row in counts.items()},
                     assignment=tuple(assignment))


def occupancy_slots(iterations: int, alpha: float, slot_length: float) -> int:
    # rounding guards against 3.0000000000000004 -> 4
    return max(1, math.ceil(round(iterations * alpha / slot_length, 9)))


@dataclass(frozen=True)
class ScheduleRecord:
    job_id: int
    start: int
    placement: Placement
    completion: float
    occupancy_slots: int

    @classmethod
    def make(cls, job: JobSpec, start: int, placement: Placement,
             slot_length: float) -> "ScheduleRecord":
        if placement.alpha is None:
            raise ValueError("placement has no alpha")
        run = job.iterations * placement.alpha
        return cls(job.job_id, start, placement, start * slot_length + run,
                   occupancy_slots(job.iterations, placement.alpha, slot_length))

    @property
    def end_slot(self) -> int:
        return self.start + self.occupancy_slots


@dataclass(frozen=True)
class Violation:
    constraint: int
    job_id: Optional[int] = None
    server: Optional[int] = None
    slot: Optional[int] = None
    message: str = ""


def validate_schedule(records: Iterable[ScheduleRecord], jobs: Iterable[JobSpec],
                      cluster: ClusterConfig) -> Optional[Violation]:
    """Check constraints (start after arrival, replica conservation, capacity).

    Returns None when the schedule is feasible, otherwise the first violation.
    """
    records = list(records)
    by_id = {j.job_id: j for j in jobs}
    seen = set()
    for rec in records:
        if rec.job_id not in by_id or rec.job_id in seen:
            raise ValueError(f"unexpected or duplicate record for job {rec.job_id}")
        seen.add(rec.job_id)
    if seen != set(by_id):
        raise ValueError("every job needs exactly one record")

    g = cluster.gpus_per_server
    for rec in sorted(records, key=lambda r: r.job_id):
        job = by_id[rec.job_id]
        if rec.start < job.arrival:
            return Violation(1, job.job_id, None, rec.start, "start before arrival")
    for rec in sorted(records, key=lambda r: r.job_id):
        job = by_id[rec.job_id]
        for m, row in rec.placement.counts.items():
            if not 0 <= m < cluster.num_servers or len(row) != job.num_stages:
                return Violation(2, job.job_id, m, None, "malformed placement row")
            if any(c < 0 or c > g for c in row):
                return Violation(2, job.job_id, m, None, "per-server count out of range")
        if rec.placement.stage_totals(job.num_stages) != job.replicas:
            return Violation(2, job.job_id, None, None, "replica counts not conserved")

    # sweep per server: frees before allocations at the same slot
    events: Dict[int, List[Tuple[int, int, int, int]]] = {}
    for rec in records:
        for m in rec.placement.counts:
            n = rec.placement.gpus_on(m)
            if n:
                events.setdefault(m, []).append((rec.start, 1, n, rec.job_id))
                events.setdefault(m, []).append((rec.end_slot, 0, -n, rec.job_id))
    for m in sorted(events):
        used = 0
        for slot, _, delta, job_id in sorted(events[m]):
            used += delta
            if used > g:
                return Violation(3, job_id, m, slot, f"server over capacity ({used} > {g})")
    return None
