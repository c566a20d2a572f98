"""Per-iteration training time of a placed job.

A stage replica set on one server pays its own compute, the activation and
gradient traffic to its pipeline neighbours, and the AllReduce among its
replicas.  The job's per-iteration time is the slowest (server, stage) pair.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence, Tuple

from .model import ClusterConfig, JobSpec, Placement, StageProfile


@dataclass(frozen=True)
class StageTimes:
    comp: float
    comm: float
    allreduce: float

    @property
    def beta(self) -> float:
        return self.comp + self.comm + self.allreduce


def comp_time(stage: StageProfile, x: int) -> float:
    if x <= 0:
        return 0.0
    return stage.fp_time + stage.bp_coeff * stage.bp_time


def _comm(stages: Sequence[StageProfile], row: Sequence[int], s: int,
          g: int, b_inter: float, b_intra: float) -> float:
    x = row[s]
    if x <= 0:
        return 0.0
    cur = stages[s]
    inter = 0.0
    intra = 0.0
    if s > 0:
        k_prev = stages[s - 1].replicas
        x_prev = row[s - 1]
        inter += 2.0 * cur.data_in * (k_prev - x_prev) / k_prev
        intra += 2.0 * cur.data_in * x_prev / k_prev
    if s < len(stages) - 1:
        k_next = stages[s + 1].replicas
        x_next = row[s + 1]
        inter += 2.0 * cur.data_out * (k_next - x_next) / k_next
        intra += 2.0 * cur.data_out * x_next / k_next
    # the x replicas share an x/g slice of the NIC
    return inter * x / ((x / g) * b_inter) + intra / b_intra


def comm_time(job: JobSpec, placement: Placement, server: int, stage: int,
              cluster: ClusterConfig) -> float:
    if not 0 <= stage < job.num_stages:
        raise IndexError(f"stage {stage} out of range for {job.num_stages} stages")
    row = placement.counts.get(server)
    if row is None:
        return 0.0
    return _comm(job.stages, row, stage, cluster.gpus_per_server,
                 cluster.b_inter, cluster.b_intra)


def allreduce_time(stage: StageProfile, x: int, g: int, b_inter: float,
                   b_intra: float) -> float:
    k = stage.replicas
    if x <= 0 or k == 1:
        return 0.0
    if x > k:
        raise ValueError("more replicas on the server than the stage has")
    volume = 2.0 * (k - 1) * stage.param_size / k
    if x < k:
        t = volume / ((x / g) * b_inter)
    else:
        t = volume / b_intra
    return stage.allreduce_coeff * t


def stage_times(job: JobSpec, placement: Placement, server: int, stage: int,
                cluster: ClusterConfig) -> StageTimes:
    x = placement.count(server, stage)
    st = job.stages[stage]
    return StageTimes(
        comp_time(st, x),
        comm_time(job, placement, server, stage, cluster),
        allreduce_time(st, x, cluster.gpus_per_server, cluster.b_inter, cluster.b_intra),
    )


def alpha_from_rows(stages: Sequence[StageProfile], rows, g: int, b_inter: float,
                    b_intra: float) -> float:
    """Bottleneck beta over per-server rows of per-stage counts."""
    worst = 0.0
    for row in rows:
        for s, st in enumerate(stages):
            x = row[s]
            if x <= 0:
                continue
            beta = (comp_time(st, x) + _comm(stages, row, s, g, b_inter, b_intra)
                    + allreduce_time(st, x, g, b_inter, b_intra))
            if beta > worst:
                worst = beta
    return worst


def alpha(job: JobSpec, placement: Placement, cluster: ClusterConfig) -> float:
    totals = placement.stage_totals(job.num_stages)
    if totals != job.replicas:
        raise ValueError(f"placement {totals} does not match replicas {job.replicas}")
    return alpha_from_rows(job.stages, placement.counts.values(),
                           cluster.gpus_per_server, cluster.b_inter, cluster.b_intra)


def spread_is_feasible(job: JobSpec, cluster: ClusterConfig) -> bool:
    return job.gpus <= cluster.num_servers


def spread_placement(job: JobSpec) -> Placement:
    """Every replica alone on its own server, servers numbered from 0."""
    counts = {}
    m = 0
    for s, st in enumerate(job.stages):
        for _ in range(st.replicas):
            row = [0] * job.num_stages
            row[s] = 1
            counts[m] = tuple(row)
            m += 1
    return Placement(counts)


def alpha_max(job: JobSpec, cluster: ClusterConfig) -> float:
    """Per-iteration time with every replica on a distinct server.

    When the cluster has fewer servers than the job has replicas the value is
    still evaluated on that hypothetical spread (see ``spread_is_feasible``);
    it upper-bounds alpha for every placement either way.
    """
    return _alpha_max_cached(job.stages, cluster.gpus_per_server, cluster.b_inter,
                             cluster.b_intra)


@lru_cache(maxsize=65536)
def _alpha_max_cached(stages: Tuple[StageProfile, ...], g: int, b_inter: float,
                      b_intra: float) -> float:
    rows = []
    for s, st in enumerate(stages):
        row = [0] * len(stages)
        row[s] = 1
        rows.append(row)  # replicas of one stage are interchangeable
    return alpha_from_rows(stages, rows, g, b_inter, b_intra)


def fewest_server_slots(gpus: int, cluster: ClusterConfig):
    g = cluster.gpus_per_server
    full, rest = divmod(gpus, g)
    slots = [(m, g) for m in range(full)]
    if rest:
        slots.append((full, rest))
    return slots


def alpha_min_est(job: JobSpec, cluster: ClusterConfig) -> Tuple[float, Placement]:
    """Heavy-Edge mapping onto the fewest idle servers, and its alpha."""
    if job.gpus > cluster.total_gpus:
        raise ValueError(f"job {job.job_id} needs {job.gpus} GPUs, cluster has "
                         f"{cluster.total_gpus}")
    key = dataclasses.replace(cluster, slot_length=1.0)
    return _alpha_min_cached(job.stages, key)


@lru_cache(maxsize=65536)
def _alpha_min_cached(stages: Tuple[StageProfile, ...], cluster: ClusterConfig):
    from .graph import build_graph_from_stages
    from .heavy_edge import partition

    graph = build_graph_from_stages(stages)
    placement = partition(graph, fewest_server_slots(graph.num_vertices, cluster))
    a = alpha_from_rows(stages, placement.counts.values(), cluster.gpus_per_server,
                        cluster.b_inter, cluster.b_intra)
    return a, placement.with_alpha(a)
