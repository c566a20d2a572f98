import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ddlsched import _kernels_py, kernels

try:
    from ddlsched import _kernels as _kernels_c
except ImportError:
    _kernels_c = None

needs_ext = pytest.mark.skipif(_kernels_c is None, reason="compiled extension not built")


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    if os.environ.get("DDLSCHED_PURE_PYTHON") == "1":
        assert kernels.BACKEND == "python"
    elif _kernels_c is not None:
        assert kernels.BACKEND == "cython"


@st.composite
def weight_matrices(draw):
    n = draw(st.integers(1, 12))
    vals = draw(arrays(np.float64, (n, n), elements=st.sampled_from([0.0, 0.5, 1.0, 2.0, 3.5])))
    w = np.triu(vals, 1)
    w = w + w.T
    caps, left = [], n
    while left:
        c = draw(st.integers(1, left))
        caps.append(c)
        left -= c
    return w, caps


@needs_ext
@given(weight_matrices())
def test_heavy_edge_equivalence(wc):
    w, caps = wc
    a = _kernels_py.heavy_edge_assign(w, caps)
    b = _kernels_c.heavy_edge_assign(w, caps)
    assert list(a) == list(b)


@needs_ext
@given(st.lists(st.tuples(st.integers(0, 20), st.floats(0, 1e5)), min_size=1, max_size=60),
       st.integers(1, 4))
def test_best_split_equivalence(pairs, min_leaf):
    pairs.sort(key=lambda p: p[0])
    xs = np.array([p[0] for p in pairs], dtype=float)
    ys = np.array([p[1] for p in pairs], dtype=float)
    pa, ia = _kernels_py.best_split(xs, ys, min_leaf)
    pb, ib = _kernels_c.best_split(xs, ys, min_leaf)
    assert ia == ib
    assert pa == pytest.approx(pb, rel=1e-12)


@given(st.lists(st.tuples(st.integers(0, 20), st.floats(0, 1e4)), min_size=2, max_size=40),
       st.integers(1, 3))
def test_best_split_minimises_sse(pairs, min_leaf):
    pairs.sort(key=lambda p: p[0])
    xs = np.array([p[0] for p in pairs], dtype=float)
    ys = np.array([p[1] for p in pairs], dtype=float)
    _, pos = kernels.best_split(xs, ys, min_leaf)
    n = len(xs)
    cands = [i for i in range(min_leaf, n - min_leaf + 1) if xs[i - 1] < xs[i]]
    if not cands:
        assert pos == -1
        return

    def sse(i):
        return ((ys[:i] - ys[:i].mean()) ** 2).sum() + ((ys[i:] - ys[i:].mean()) ** 2).sum()

    best = min(sse(i) for i in cands)
    assert pos in cands
    assert sse(pos) <= best + 1e-6 * max(1.0, best)


def test_rejects_bad_caps():
    w = np.zeros((3, 3))
    with pytest.raises(ValueError):
        kernels.heavy_edge_assign(w, [1, 1])
