"""Communication graph of a job: one vertex per stage replica.

Edge weights are bytes per iteration.  Parallel edges between the same pair
are merged by summing their weights.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, List, Sequence, Tuple

import numpy as np

from .model import AllReduceKind, JobSpec, StageProfile, check_data_identity

Label = Tuple[int, int]  # (stage, replica)


@dataclass(frozen=True)
class JobGraph:
    labels: Tuple[Label, ...]
    weights: np.ndarray  # dense symmetric, zero diagonal
    num_stages: int

    @property
    def num_vertices(self) -> int:
        return len(self.labels)

    def index(self, label: Label) -> int:
        return self.labels.index(label)

    def edges(self) -> Iterator[Tuple[int, int, float]]:
        n = self.num_vertices
        w = self.weights
        for u in range(n):
            for v in range(u + 1, n):
                if w[u, v] > 0:
                    yield u, v, float(w[u, v])

    def weight(self, a: Label, b: Label) -> float:
        return float(self.weights[self.index(a), self.index(b)])

    def total_weight(self) -> float:
        return float(np.triu(self.weights, 1).sum())


def btree_parent(rank: int, nranks: int) -> int:
    """Parent of ``rank`` in the bit-pattern binary tree rooted at rank 0."""
    if rank == 0:
        return -1
    bit = rank & -rank
    up = (rank ^ bit) | (bit << 1)
    if up >= nranks:
        up = rank ^ bit
    return up


def double_binary_tree(k: int) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
    """Edges of the two trees used by tree AllReduce over ranks 0..k-1.

    The first tree is the bit-pattern binary tree; the second is the same tree
    over shifted ranks (odd k) or mirrored ranks (even k), so that interior
    nodes of one tree tend to be leaves of the other.
    """
    first = [(r, btree_parent(r, k)) for r in range(1, k)]
    second = []
    for r in range(k):
        if k % 2 == 1:
            shifted = (r - 1 + k) % k
            p = btree_parent(shifted, k)
            parent = -1 if p < 0 else (p + 1) % k
        else:
            shifted = k - 1 - r
            p = btree_parent(shifted, k)
            parent = -1 if p < 0 else k - 1 - p
        if parent >= 0:
            second.append((r, parent))
    return first, second


def allreduce_edges(stage: StageProfile) -> List[Tuple[int, int, float]]:
    """Unmerged intra-stage edges as (replica, replica, bytes)."""
    k = stage.replicas
    if k < 2:
        return []
    if stage.allreduce_kind == AllReduceKind.RAR:
        w = 2.0 * (k - 1) * stage.param_size / k
        if k == 2:
            return [(0, 1, w)]  # a two-node ring is a single link
        return [(r, (r + 1) % k, w) for r in range(k)]
    w = (k - 1) * stage.param_size / k
    first, second = double_binary_tree(k)
    return [(a, b, w) for a, b in first + second]


def build_graph_from_stages(stages: Sequence[StageProfile]) -> JobGraph:
    check_data_identity(stages)
    labels = [(s, r) for s, st in enumerate(stages) for r in range(st.replicas)]
    offset = {}
    n = 0
    for s, st in enumerate(stages):
        offset[s] = n
        n += st.replicas
    w = np.zeros((n, n))

    def add(u: int, v: int, weight: float):
        if weight > 0 and u != v:
            w[u, v] += weight
            w[v, u] += weight

    for s in range(1, len(stages)):
        per_pair = 2.0 * stages[s - 1].data_out / stages[s].replicas
        for a in range(stages[s - 1].replicas):
            for b in range(stages[s].replicas):
                add(offset[s - 1] + a, offset[s] + b, per_pair)
    for s, st in enumerate(stages):
        for a, b, weight in allreduce_edges(st):
            add(offset[s] + a, offset[s] + b, weight)
    w.setflags(write=False)
    return JobGraph(tuple(labels), w, len(stages))


def build_graph(job: JobSpec) -> JobGraph:
    return build_graph_from_stages(job.stages)


def to_dot(graph: JobGraph, name: str = "job", assignment: Sequence[int] = None) -> str:
    """Graphviz text for debugging; vertices are S<stage>-R<replica> (1-based)."""
    lines = [f"graph {name} {{"]
    for i, (s, r) in enumerate(graph.labels):
        attr = f' [server={assignment[i]}]' if assignment is not None else ""
        lines.append(f'  "S{s + 1}-R{r + 1}"{attr};')
    for u, v, wt in graph.edges():
        (su, ru), (sv, rv) = graph.labels[u], graph.labels[v]
        lines.append(f'  "S{su + 1}-R{ru + 1}" -- "S{sv + 1}-R{rv + 1}" '
                     f'[weight={wt:.6g}, label="{wt / 1e6:.3g}MB"];')
    lines.append("}")
    return "\n".join(lines) + "\n"
