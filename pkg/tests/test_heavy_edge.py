import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import stage, stage_lists
from ddlsched import kernels
from ddlsched.graph import build_graph
from ddlsched.heavy_edge import brute_force_partition, cut_weight, partition
from ddlsched.model import MB, JobSpec


def reference_heavy_edge(w, caps):
    """Independent set-based rendering of the mapping rules, for cross-checking."""
    n = len(w)
    left = set(range(n))
    out = {}

    def heaviest(pairs):
        pairs = [(w[a][b], -min(a, b), -max(a, b), a, b) for a, b in pairs if w[a][b] > 0]
        return max(pairs)[3:] if pairs else None

    for j, cap in enumerate(caps):
        if len(left) == cap:
            group = set(left)
        else:
            inner = [(a, b) for a in left for b in left if a < b]
            seed = heaviest(inner)
            if cap == 1 and seed is not None:
                group = {min(left, key=lambda v: (sum(w[v][u] for u in left), v))}
            else:
                group = set(seed) if seed else {min(left)}
                while len(group) < cap:
                    e = heaviest([(a, b) for a in group for b in left - group])
                    group.add(e[1] if e else min(left - group))
        for v in group:
            out[v] = j
        left -= group
    return [out[v] for v in range(n)]


def slots_strategy(n):
    return st.lists(st.integers(1, 4), min_size=1, max_size=n).map(
        lambda parts: _fit(parts, n))


def _fit(parts, n):
    caps, left = [], n
    for p in parts:
        if left == 0:
            break
        c = min(p, left)
        caps.append(c)
        left -= c
    while left:
        c = min(4, left)
        caps.append(c)
        left -= c
    return [(m, c) for m, c in enumerate(caps)]


@st.composite
def graph_and_slots(draw, max_gpus=8):
    stages = draw(stage_lists(max_gpus=max_gpus, min_gpus=2))
    g = build_graph(JobSpec(0, stages))
    slots = draw(slots_strategy(g.num_vertices))
    ids = draw(st.permutations(range(20)))[:len(slots)]
    return g, [(ids[i], c) for i, (_, c) in enumerate(slots)]


def test_sync_pair_partition(sync_pair_job):
    g = build_graph(sync_pair_job)
    p = partition(g, [(0, 4), (1, 1), (2, 1)])
    assert p.assignment[:4] == (0, 0, 0, 0)
    assert sorted(p.assignment[4:]) == [1, 2]
    assert p.counts[0] == (2, 2, 0)
    assert cut_weight(g, p) == pytest.approx(4 * MB)
    _, best = brute_force_partition(g, [(0, 4), (1, 1), (2, 1)])
    assert best == pytest.approx(cut_weight(g, p))


def test_sync_pair_oracle_keeps_heavy_pair(sync_pair_job):
    g = build_graph(sync_pair_job)
    opt, _ = brute_force_partition(g, [(0, 4), (1, 1), (2, 1)])
    assert opt.assignment[0] == opt.assignment[1]


def test_edgeless():
    g = build_graph(JobSpec(0, [stage(k=3, h=0.0)]))
    p = partition(g, [(0, 1), (1, 2)])
    assert cut_weight(g, p) == 0
    assert sorted(p.assignment).count(1) == 2


def test_everything_on_first_server(sync_pair_job):
    g = build_graph(sync_pair_job)
    p = partition(g, [(5, 6)])
    assert set(p.assignment) == {5}
    assert cut_weight(g, p) == 0


def test_ring_of_four():
    g = build_graph(JobSpec(0, [stage(k=4, h=8 * MB)]))
    edge = 2 * 3 * 8 * MB / 4
    p = partition(g, [(0, 2), (1, 2)])
    _, best = brute_force_partition(g, [(0, 2), (1, 2)])
    assert best == pytest.approx(2 * edge)
    assert cut_weight(g, p) == pytest.approx(2 * edge)


def test_capacity_mismatch(sync_pair_job):
    g = build_graph(sync_pair_job)
    with pytest.raises(ValueError):
        partition(g, [(0, 4), (1, 1)])
    with pytest.raises(ValueError):
        partition(g, [(0, 4), (0, 2)])


def test_brute_force_guard():
    g = build_graph(JobSpec(0, [stage(k=13, h=MB)]))
    with pytest.raises(ValueError):
        brute_force_partition(g, [(0, 13)])


@given(graph_and_slots())
def test_feasible_and_deterministic(gs):
    g, slots = gs
    p = partition(g, slots)
    assert len(p.assignment) == g.num_vertices
    for m, c in slots:
        assert p.assignment.count(m) == c
        assert p.gpus_on(m) == c
    assert p == partition(g, slots)
    intra = sum(w for u, v, w in g.edges() if p.assignment[u] == p.assignment[v])
    assert cut_weight(g, p) + intra == pytest.approx(g.total_weight(), rel=1e-12)


@given(graph_and_slots())
def test_matches_reference(gs):
    g, slots = gs
    order = sorted(slots, key=lambda mc: (-mc[1], mc[0]))
    caps = [c for _, c in order]
    assert list(kernels.heavy_edge_assign(g.weights, caps)) == \
        reference_heavy_edge(g.weights.tolist(), caps)


@given(graph_and_slots())
def test_oracle_never_worse(gs):
    g, slots = gs
    _, best = brute_force_partition(g, slots)
    assert best <= cut_weight(g, partition(g, slots)) + 1e-6


@given(graph_and_slots())
def test_removal_bookkeeping(gs):
    """Later servers see exactly the induced subgraph of what is left."""
    g, slots = gs
    order = sorted(slots, key=lambda mc: (-mc[1], mc[0]))
    caps = [c for _, c in order]
    if len(caps) < 2:
        return
    full = list(kernels.heavy_edge_assign(g.weights, caps))
    rest = [v for v in range(g.num_vertices) if full[v] != 0]
    sub = np.ascontiguousarray(g.weights[np.ix_(rest, rest)])
    again = list(kernels.heavy_edge_assign(sub, caps[1:]))
    assert [full[v] - 1 for v in rest] == again
