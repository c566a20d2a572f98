# cython: language_level=3
"""Compiled hot kernels; see _kernels_py.py for the reference semantics."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def heavy_edge_assign(weights, caps):
    cdef const double[:, ::1] w = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = w.shape[0]
    cdef const long long[::1] cap = np.ascontiguousarray(caps, dtype=np.int64)
    cdef Py_ssize_t nslots = cap.shape[0]
    cdef long long total = 0
    cdef Py_ssize_t j, u, v, i, a, b, ba, bb, bu, bv, pick, add, nchosen, nalive
    cdef long long c
    cdef double best_w, tot, best_tot, wt
    for j in range(nslots):
        total += cap[j]
    if total != n:
        raise ValueError(f"slot capacities sum to {total}, graph has {n} vertices")
    out_arr = np.full(n, -1, dtype=np.int64)
    cdef long long[::1] out = out_arr
    alive_arr = np.ones(n, dtype=np.uint8)
    cdef unsigned char[::1] alive = alive_arr
    in_set_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] in_set = in_set_arr
    chosen_arr = np.zeros(n, dtype=np.int64)
    cdef long long[::1] chosen = chosen_arr
    nalive = n
    for j in range(nslots):
        c = cap[j]
        if c <= 0:
            raise ValueError("slot capacity must be positive")
        if nalive == c:
            for v in range(n):
                if alive[v]:
                    out[v] = j
                    alive[v] = 0
            nalive = 0
            continue
        best_w = 0.0
        bu = -1
        bv = -1
        for u in range(n):
            if not alive[u]:
                continue
            for v in range(u + 1, n):
                if alive[v] and w[u, v] > best_w:
                    best_w = w[u, v]
                    bu = u
                    bv = v
        nchosen = 0
        if c == 1 and bu >= 0:
            best_tot = -1.0
            pick = -1
            for v in range(n):
                if not alive[v]:
                    continue
                tot = 0.0
                for u in range(n):
                    if alive[u]:
                        tot += w[v, u]
                if pick < 0 or tot < best_tot:
                    best_tot = tot
                    pick = v
            chosen[0] = pick
            nchosen = 1
        else:
            for v in range(n):
                in_set[v] = 0
            if bu >= 0:
                chosen[0] = bu
                chosen[1] = bv
                nchosen = 2
            else:
                for v in range(n):
                    if alive[v]:
                        chosen[0] = v
                        break
                nchosen = 1
            for i in range(nchosen):
                in_set[chosen[i]] = 1
            while nchosen < c:
                best_w = 0.0
                ba = -1
                bb = -1
                add = -1
                for i in range(nchosen):
                    u = chosen[i]
                    for v in range(n):
                        wt = w[u, v]
                        if not alive[v] or in_set[v] or wt <= 0.0:
                            continue
                        if u < v:
                            a = u
                            b = v
                        else:
                            a = v
                            b = u
                        if wt > best_w or (wt == best_w and (a < ba or (a == ba and b < bb))):
                            best_w = wt
                            ba = a
                            bb = b
                            add = v
                if add < 0:
                    for v in range(n):
                        if alive[v] and not in_set[v]:
                            add = v
                            break
                chosen[nchosen] = add
                nchosen += 1
                in_set[add] = 1
        for i in range(nchosen):
            out[chosen[i]] = j
            alive[chosen[i]] = 0
        nalive -= nchosen
    return out_arr


def best_split(xs, ys, Py_ssize_t min_leaf):
    cdef const double[::1] x = np.ascontiguousarray(xs, dtype=np.float64)
    cdef const double[::1] y = np.ascontiguousarray(ys, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, best_pos = -1
    cdef double total = 0.0, sum_left = 0.0, sum_right, proxy, best = 0.0
    cdef double nl
    if n < 2 * min_leaf:
        return 0.0, -1
    for i in range(n):
        total += y[i]
    for i in range(1, n):
        sum_left += y[i - 1]
        if i < min_leaf or n - i < min_leaf or not (x[i] > x[i - 1]):
            continue
        sum_right = total - sum_left
        nl = <double> i
        proxy = sum_left * sum_left / nl + sum_right * sum_right / (n - nl)
        if best_pos < 0 or proxy > best:
            best = proxy
            best_pos = i
    if best_pos < 0:
        return 0.0, -1
    return best, best_pos
