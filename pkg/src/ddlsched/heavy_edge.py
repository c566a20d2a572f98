"""Heavy-Edge mapping of a job graph onto servers with given free GPUs."""

from __future__ import annotations

import itertools
import math
from typing import List, Sequence, Tuple

from . import kernels
from .graph import JobGraph
from .model import Placement, placement_from_assignment

ServerSlots = Sequence[Tuple[int, int]]  # (server id, GPUs offered)

BRUTE_FORCE_MAX_VERTICES = 12


def _check_slots(graph: JobGraph, slots: ServerSlots) -> None:
    total = sum(c for _, c in slots)
    if total != graph.num_vertices:
        raise ValueError(f"slots offer {total} GPUs, job graph has "
                         f"{graph.num_vertices} replicas")
    if any(c < 1 for _, c in slots):
        raise ValueError("every server slot must offer at least one GPU")
    if len({m for m, _ in slots}) != len(slots):
        raise ValueError("duplicate server in slots")


def processing_order(slots: ServerSlots) -> List[Tuple[int, int]]:
    return sorted(slots, key=lambda mc: (-mc[1], mc[0]))


def partition(graph: JobGraph, slots: ServerSlots) -> Placement:
    """Greedy partition maximising intra-server edge weight.

    Servers are filled in descending order of offered GPUs.  A server that
    can take every remaining replica takes them all; a single-GPU server takes
    the replica with the least remaining incident weight; otherwise the
    server is seeded with the heaviest remaining edge and grown along the
    heaviest edge leaving the set.
    """
    _check_slots(graph, slots)
    order = processing_order(slots)
    idx = kernels.heavy_edge_assign(graph.weights, [c for _, c in order])
    assignment = [order[int(j)][0] for j in idx]
    return placement_from_assignment(assignment, graph.labels, graph.num_stages)


def cut_weight(graph: JobGraph, placement: Placement) -> float:
    assign = placement.assignment
    if assign is None or len(assign) != graph.num_vertices:
        raise ValueError("placement does not assign every vertex")
    return sum(w for u, v, w in graph.edges() if assign[u] != assign[v])


def brute_force_partition(graph: JobGraph, slots: ServerSlots) -> Tuple[Placement, float]:
    """Minimum-cut partition by exhaustive enumeration (small graphs only)."""
    _check_slots(graph, slots)
    n = graph.num_vertices
    if n > BRUTE_FORCE_MAX_VERTICES:
        raise ValueError(f"brute force is limited to {BRUTE_FORCE_MAX_VERTICES} vertices")
    w = graph.weights.tolist()
    servers = [m for m, _ in slots]
    caps = [c for _, c in slots]
    best = [math.inf, None]
    assign = [-1] * n

    def rec(j: int, remaining: Tuple[int, ...], cut: float):
        if cut >= best[0]:
            return
        if j == len(caps) - 1:
            total = cut
            for v in remaining:
                assign[v] = j
            for v in remaining:
                for u in range(n):
                    if assign[u] < j and w[v][u] > 0:
                        total += w[v][u]
            if total < best[0]:
                best[0] = total
                best[1] = list(assign)
            for v in remaining:
                assign[v] = -1
            return
        for group in itertools.combinations(remaining, caps[j]):
            added = 0.0
            for v in group:
                assign[v] = j
            for v in group:
                for u in range(n):
                    if 0 <= assign[u] < j and w[v][u] > 0:
                        added += w[v][u]
            rest = tuple(v for v in remaining if assign[v] != j)
            rec(j + 1, rest, cut + added)
            for v in group:
                assign[v] = -1

    rec(0, tuple(range(n)), 0.0)
    opt = [servers[j] for j in best[1]]
    return placement_from_assignment(opt, graph.labels, graph.num_stages), best[0]
