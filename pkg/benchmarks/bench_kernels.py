"""Compiled vs pure-Python kernels, alone and inside the code that calls them.

    python benchmarks/bench_kernels.py [--repeat 5]
"""

import argparse
import time
from contextlib import contextmanager

import numpy as np

from ddlsched import _kernels_py, kernels
from ddlsched.graph import build_graph_from_stages
from ddlsched.heavy_edge import partition
from ddlsched.predictor import ForestConfig, TrainingExample, fit
from ddlsched.workbench.catalog import default_catalog

try:
    from ddlsched import _kernels as _kernels_c
except ImportError:
    _kernels_c = None


@contextmanager
def backend(mod):
    saved = kernels.heavy_edge_assign, kernels.best_split
    kernels.heavy_edge_assign, kernels.best_split = mod.heavy_edge_assign, mod.best_split
    try:
        yield
    finally:
        kernels.heavy_edge_assign, kernels.best_split = saved


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def workloads(rng):
    graphs = [build_graph_from_stages(c.stages) for m in default_catalog() for c in m.configs]
    slot_sets = []
    for gph in graphs:
        n, caps = gph.num_vertices, []
        while sum(caps) < n:
            caps.append(int(rng.integers(1, min(4, n - sum(caps)) + 1)))
        slot_sets.append(list(enumerate(caps)))
    xs = np.sort(rng.integers(0, 400, size=4000)).astype(float)
    ys = rng.lognormal(8, 1, size=4000)
    examples = [TrainingExample(int(g), int(u), int(n)) for g, u, n in
                zip(rng.integers(0, 300, 3000), rng.integers(0, 100, 3000),
                    rng.integers(1, 10**5, 3000))]
    return graphs, slot_sets, xs, ys, examples


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    graphs, slot_sets, xs, ys, examples = workloads(np.random.default_rng(args.seed))

    cases = {
        "heavy_edge_assign x1000": lambda m: [m.heavy_edge_assign(g.weights, [c for _, c in s])
                                              for _ in range(30)
                                              for g, s in zip(graphs, slot_sets)],
        "best_split n=4000 x50": lambda m: [m.best_split(xs, ys, 1) for _ in range(50)],
    }

    def partition_all(_):
        for _ in range(30):
            for g, s in zip(graphs, slot_sets):
                partition(g, s)

    def forest(_):
        fit(examples, ForestConfig(num_trees=10, rng_seed=0))

    mods = [("python", _kernels_py)]
    if _kernels_c is not None:
        mods.append(("cython", _kernels_c))
    else:
        print("compiled extension not built; showing the Python backend only")

    print(f"{'case':<28}" + "".join(f"{name:>12}" for name, _ in mods) + f"{'speedup':>10}")
    rows = list(cases.items()) + [("Heavy-Edge partition x1000", partition_all),
                                  ("forest fit 10 trees", forest)]
    for label, fn in rows:
        t = []
        for _, mod in mods:
            with backend(mod):
                t.append(best_of(lambda: fn(mod), args.repeat))
        speed = f"{t[0] / t[-1]:>9.1f}x" if len(t) > 1 else ""
        print(f"{label:<28}" + "".join(f"{x * 1e3:>10.1f}ms" for x in t) + speed)


if __name__ == "__main__":
    main()
