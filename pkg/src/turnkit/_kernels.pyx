# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Mirrors ``_fallback`` operation for operation."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def pelt_core(s1_in, s2_in, inv_in, double beta, Py_ssize_t min_seg, bint prune, double margin):
    cdef double[::1] s1 = np.ascontiguousarray(s1_in, dtype=np.float64)
    cdef double[::1] s2 = np.ascontiguousarray(s2_in, dtype=np.float64)
    cdef double[::1] inv = np.ascontiguousarray(inv_in, dtype=np.float64)
    cdef Py_ssize_t n = s1.shape[0] - 1
    F_arr = np.full(n + 1, np.inf, dtype=np.float64)
    last_arr = np.full(n + 1, -1, dtype=np.int64)
    cdef double[::1] F = F_arr
    cdef cnp.int64_t[::1] last = last_arr
    # candidate set, stored column-wise and kept compact
    cdef cnp.int64_t[::1] cands = np.empty(n + 1, dtype=np.int64)
    cdef cnp.int64_t[::1] c_kill = np.empty(n + 1, dtype=np.int64)
    cdef double[::1] c_s1 = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] c_s2 = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] c_F = np.empty(n + 1, dtype=np.float64)
    cdef double[::1] partial = np.empty(n + 1, dtype=np.float64)
    cdef Py_ssize_t n_c = 1, t, s, s_new, i, j, best_s, k, horizon, n_dead
    cdef double best, v0, v, c, m, bound, s1t, s2t
    F[0] = 0.0
    cands[0] = 0
    c_kill[0] = -1
    c_s1[0] = s1[0]
    c_s2[0] = s2[0]
    c_F[0] = 0.0
    for t in range(min_seg, n + 1):
        s_new = t - min_seg
        if s_new >= min_seg:
            cands[n_c] = s_new
            c_kill[n_c] = -1
            c_s1[n_c] = s1[s_new]
            c_s2[n_c] = s2[s_new]
            c_F[n_c] = F[s_new]
            n_c += 1
        s1t = s1[t]
        s2t = s2[t]
        best = INFINITY
        best_s = -1
        for i in range(n_c):
            m = s1t - c_s1[i]
            c = (s2t - c_s2[i]) - m * m * inv[t - cands[i]]
            if c < 0.0:
                c = 0.0
            v0 = c_F[i] + c
            partial[i] = v0
            v = v0 + beta
            if v < best:
                best = v
                best_s = cands[i]
        F[t] = best
        last[t] = best_s
        if prune:
            bound = best + margin
            horizon = t + 1 - min_seg
            n_dead = 0
            for i in range(n_c):
                k = c_kill[i]
                if k < 0 and partial[i] > bound:
                    k = t
                    c_kill[i] = t
                if k >= 0 and k <= horizon:
                    n_dead += 1
            if n_dead:
                j = 0
                for i in range(n_c):
                    k = c_kill[i]
                    if k >= 0 and k <= horizon:
                        continue
                    cands[j] = cands[i]
                    c_kill[j] = k
                    c_s1[j] = c_s1[i]
                    c_s2[j] = c_s2[i]
                    c_F[j] = c_F[i]
                    j += 1
                n_c = j
    return F_arr, last_arr


def build_tree(X_in, u_in, int max_depth):
    cdef double[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef double[:, ::1] u = np.ascontiguousarray(u_in, dtype=np.float64)
    cdef Py_ssize_t m = X.shape[0], d = X.shape[1]
    cdef Py_ssize_t n_max = (1 << (max_depth + 1)) - 1
    feat_arr = np.full(n_max, -1, dtype=np.int64)
    thr_arr = np.zeros(n_max, dtype=np.float64)
    left_arr = np.full(n_max, -1, dtype=np.int64)
    right_arr = np.full(n_max, -1, dtype=np.int64)
    size_arr = np.zeros(n_max, dtype=np.int64)
    cdef cnp.int64_t[::1] feat = feat_arr
    cdef double[::1] thr = thr_arr
    cdef cnp.int64_t[::1] left = left_arr
    cdef cnp.int64_t[::1] right = right_arr
    cdef cnp.int64_t[::1] size = size_arr
    cdef cnp.int64_t[::1] idx = np.arange(m, dtype=np.int64)
    cdef cnp.int64_t[::1] scratch = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] live = np.empty(d, dtype=np.int64)
    cdef double[::1] lows = np.empty(d, dtype=np.float64)
    cdef double[::1] highs = np.empty(d, dtype=np.float64)
    # stack rows: lo, hi, depth, parent, is_left
    cdef cnp.int64_t[:, ::1] stack = np.empty((n_max + 1, 5), dtype=np.int64)
    cdef Py_ssize_t sp = 0, n_nodes = 0
    cdef Py_ssize_t lo, hi, depth, parent, is_left, node, j, k, n_live, pick, dim, mid, w
    cdef double mn, mx, val, split
    stack[0, 0] = 0
    stack[0, 1] = m
    stack[0, 2] = 0
    stack[0, 3] = -1
    stack[0, 4] = 0
    sp = 1
    while sp > 0:
        sp -= 1
        lo = stack[sp, 0]
        hi = stack[sp, 1]
        depth = stack[sp, 2]
        parent = stack[sp, 3]
        is_left = stack[sp, 4]
        node = n_nodes
        n_nodes += 1
        if parent >= 0:
            if is_left:
                left[parent] = node
            else:
                right[parent] = node
        size[node] = hi - lo
        if hi - lo <= 1 or depth >= max_depth:
            continue
        n_live = 0
        for j in range(d):
            mn = X[idx[lo], j]
            mx = mn
            for k in range(lo + 1, hi):
                val = X[idx[k], j]
                if val < mn:
                    mn = val
                if val > mx:
                    mx = val
            if mx > mn:
                live[n_live] = j
                lows[n_live] = mn
                highs[n_live] = mx
                n_live += 1
        if n_live == 0:
            continue
        pick = <Py_ssize_t>(u[node, 0] * n_live)
        if pick >= n_live:
            pick = n_live - 1
        dim = live[pick]
        mn = lows[pick]
        mx = highs[pick]
        split = mx - u[node, 1] * (mx - mn)
        if split <= mn:
            split = mx
        feat[node] = dim
        thr[node] = split
        w = 0
        for k in range(lo, hi):
            if X[idx[k], dim] < split:
                scratch[w] = idx[k]
                w += 1
        mid = lo + w
        for k in range(lo, hi):
            if not X[idx[k], dim] < split:
                scratch[w] = idx[k]
                w += 1
        for k in range(hi - lo):
            idx[lo + k] = scratch[k]
        stack[sp, 0] = mid
        stack[sp, 1] = hi
        stack[sp, 2] = depth + 1
        stack[sp, 3] = node
        stack[sp, 4] = 0
        sp += 1
        stack[sp, 0] = lo
        stack[sp, 1] = mid
        stack[sp, 2] = depth + 1
        stack[sp, 3] = node
        stack[sp, 4] = 1
        sp += 1
    return feat_arr, thr_arr, left_arr, right_arr, size_arr, n_nodes


def mean_path_length(X_in, feat_in, thr_in, left_in, right_in, adj_in):
    cdef double[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] feat = np.ascontiguousarray(feat_in, dtype=np.int64)
    cdef double[:, ::1] thr = np.ascontiguousarray(thr_in, dtype=np.float64)
    cdef cnp.int64_t[:, ::1] left = np.ascontiguousarray(left_in, dtype=np.int64)
    cdef cnp.int64_t[:, ::1] right = np.ascontiguousarray(right_in, dtype=np.int64)
    cdef double[:, ::1] adj = np.ascontiguousarray(adj_in, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], n_trees = feat.shape[0], i, k, node, depth
    cdef double total
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(n):
        total = 0.0
        for k in range(n_trees):
            node = 0
            depth = 0
            while feat[k, node] >= 0:
                if X[i, feat[k, node]] < thr[k, node]:
                    node = left[k, node]
                else:
                    node = right[k, node]
                depth += 1
            total += <double>depth + adj[k, node]
        out[i] = total / n_trees
    return out_arr
