import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import stage, stage_lists
from ddlsched.graph import allreduce_edges, build_graph, double_binary_tree, to_dot
from ddlsched.model import MB, AllReduceKind, JobSpec


def test_sync_pair_weights(sync_pair_job):
    g = build_graph(sync_pair_job)
    assert g.num_vertices == 6
    assert g.weight((0, 0), (0, 1)) == 20 * MB
    for a in range(2):
        for b in range(2):
            assert g.weight((0, a), (1, b)) == 1 * MB
            assert g.weight((1, a), (2, b)) == 0.5 * MB
            assert g.weight((0, a), (2, b)) == 0
    heaviest = max(w for _, _, w in g.edges())
    assert heaviest == 20 * MB


def test_single_gpu_graph():
    g = build_graph(JobSpec(0, [stage(h=5 * MB)]))
    assert g.num_vertices == 1
    assert list(g.edges()) == []


def test_two_ring_collapses():
    g = build_graph(JobSpec(0, [stage(k=2, h=10 * MB)]))
    assert list(g.edges()) == [(0, 1, 10 * MB)]


def test_no_allreduce_edges_for_k1():
    assert allreduce_edges(stage(k=1, h=10 * MB)) == []
    g = build_graph(JobSpec(0, [stage(k=1, h=10 * MB, dout=3 * MB), stage(k=1, din=3 * MB)]))
    assert list(g.edges()) == [(0, 1, 6 * MB)]


@given(st.integers(3, 12), st.floats(0.1, 500.0), st.sampled_from(list(AllReduceKind)))
def test_intra_stage_totals(k, h_mb, kind):
    h = h_mb * MB
    edges = allreduce_edges(stage(k=k, h=h, kind=kind))
    rar = 2 * (k - 1) * h / k
    if kind == AllReduceKind.RAR:
        assert len(edges) == k
        assert sum(w for *_, w in edges) == pytest.approx(k * rar, rel=1e-12)
    else:
        assert all(w == pytest.approx(rar / 2, rel=1e-12) for *_, w in edges)


def _is_spanning_tree(edges, k):
    parent = list(range(k))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return len(edges) == k - 1


@pytest.mark.parametrize("k", range(2, 17))
def test_double_binary_tree_shape(k):
    first, second = double_binary_tree(k)
    assert _is_spanning_tree(first, k)
    assert _is_spanning_tree(second, k)
    # binary: at most two children per node
    for tree in (first, second):
        kids = {}
        for child, parent in tree:
            kids[parent] = kids.get(parent, 0) + 1
        assert max(kids.values()) <= 2


@given(stage_lists(max_gpus=10), st.randoms())
def test_total_weight_relabel_invariant(stages, rnd):
    g = build_graph(JobSpec(0, stages))
    perm = []
    for s, st_ in enumerate(stages):
        idx = [i for i, lab in enumerate(g.labels) if lab[0] == s]
        rnd.shuffle(idx)
        perm.extend(idx)
    w = g.weights[np.ix_(perm, perm)]
    assert np.triu(w, 1).sum() == pytest.approx(g.total_weight(), rel=1e-12)


@given(stage_lists(max_gpus=10))
def test_total_weight_formula(stages):
    g = build_graph(JobSpec(0, stages))
    expected = 0.0
    for s in range(1, len(stages)):
        expected += stages[s - 1].replicas * 2 * stages[s - 1].data_out
    for st_ in stages:
        expected += sum(w for *_, w in allreduce_edges(st_))
    assert g.total_weight() == pytest.approx(expected, rel=1e-9, abs=1e-6)
    assert np.allclose(g.weights, g.weights.T)
    assert (g.weights >= 0).all() and (np.diag(g.weights) == 0).all()


def test_dot(sync_pair_job):
    g = build_graph(sync_pair_job)
    text = to_dot(g, "pair_job", [0, 0, 0, 0, 1, 2])
    assert text.startswith("graph pair_job {")
    assert '"S1-R1" [server=0]' in text
    assert text.count(" -- ") == len(list(g.edges()))
