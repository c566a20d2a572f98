"""Pure-Python versions of the hot kernels.

These mirror ``_kernels.pyx`` operation for operation so both backends give
bit-identical results.
"""

import numpy as np


def heavy_edge_assign(weights, caps):
    """Greedy Heavy-Edge assignment of vertices to capacity slots.

    ``weights`` is a dense symmetric matrix over vertices in label order;
    ``caps`` lists slot capacities in processing order.  Returns the slot
    index of every vertex.  Ties go to the lowest vertex index (for edges,
    the lexicographically lowest (min, max) endpoint pair).
    """
    w = np.asarray(weights, dtype=np.float64).tolist()
    n = len(w)
    caps = [int(c) for c in caps]
    if sum(caps) != n:
        raise ValueError(f"slot capacities sum to {sum(caps)}, graph has {n} vertices")
    out = [-1] * n
    alive = [True] * n
    nalive = n
    for j, cap in enumerate(caps):
        if cap <= 0:
            raise ValueError("slot capacity must be positive")
        if nalive == cap:
            for v in range(n):
                if alive[v]:
                    out[v] = j
                    alive[v] = False
            nalive = 0
            continue
        best_w = 0.0
        bu = bv = -1
        for u in range(n):
            if not alive[u]:
                continue
            row = w[u]
            for v in range(u + 1, n):
                if alive[v] and row[v] > best_w:
                    best_w = row[v]
                    bu, bv = u, v
        chosen = []
        if cap == 1 and bu >= 0:
            best_tot = -1.0
            pick = -1
            for v in range(n):
                if not alive[v]:
                    continue
                tot = 0.0
                row = w[v]
                for u in range(n):
                    if alive[u]:
                        tot += row[u]
                if pick < 0 or tot < best_tot:
                    best_tot = tot
                    pick = v
            chosen = [pick]
        else:
            in_set = [False] * n
            if bu >= 0:
                chosen = [bu, bv]
            else:
                chosen = [next(v for v in range(n) if alive[v])]
            for v in chosen:
                in_set[v] = True
            while len(chosen) < cap:
                best_w = 0.0
                ba = bb = -1
                add = -1
                for u in chosen:
                    row = w[u]
                    for v in range(n):
                        if not alive[v] or in_set[v] or row[v] <= 0.0:
                            continue
                        a, b = (u, v) if u < v else (v, u)
                        if (row[v] > best_w or (row[v] == best_w and
                                                (a < ba or (a == ba and b < bb)))):
                            best_w = row[v]
                            ba, bb = a, b
                            add = v
                if add < 0:
                    add = next(v for v in range(n) if alive[v] and not in_set[v])
                chosen.append(add)
                in_set[add] = True
        for v in chosen:
            out[v] = j
            alive[v] = False
        nalive -= len(chosen)
    return np.asarray(out, dtype=np.int64)


def best_split(xs, ys, min_leaf):
    """Best threshold position over one sorted feature.

    Returns ``(gain_proxy, pos)`` where the split puts ``xs[:pos]`` left and
    ``gain_proxy = sL**2/nL + sR**2/nR`` (maximising it minimises the summed
    child squared error).  ``pos == -1`` when no valid split exists.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    n = xs.shape[0]
    if n < 2 * min_leaf:
        return 0.0, -1
    total = 0.0
    for y in ys.tolist():
        total += y
    sum_left = np.cumsum(ys)[:-1]
    n_left = np.arange(1, n, dtype=np.float64)
    sum_right = total - sum_left
    proxy = sum_left * sum_left / n_left + sum_right * sum_right / (n - n_left)
    pos = np.arange(1, n)
    valid = (xs[1:] > xs[:-1]) & (pos >= min_leaf) & (n - pos >= min_leaf)
    if not valid.any():
        return 0.0, -1
    cand = np.where(valid, proxy, -np.inf)
    i = int(np.argmax(cand))
    return float(cand[i]), i + 1
