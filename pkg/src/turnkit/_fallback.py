"""Pure-Python versions of the hot kernels.

Every function here has a twin in ``_kernels.pyx`` with the same signature and
the same floating-point operation order, so both backends return
bitwise-identical results.
"""

import math

import numpy as np


def pelt_core(s1, s2, inv, beta, min_seg, prune, margin):
    """Penalized optimal partitioning over prefix sums.

    ``s1``/``s2`` are prefix sums (length n+1) of the series and its squares,
    ``inv[d]`` is ``1.0 / d``. Returns ``(F, last)`` where ``F[t]`` is the
    optimal penalized cost of the first ``t`` points and ``last[t]`` the start
    of the final segment.

    A candidate that fails the pruning test at time ``t`` stays usable until
    ``t + min_seg - 1``, since ``t`` itself only becomes a valid last change
    point ``min_seg`` steps later.
    """
    s1 = [float(v) for v in s1]
    s2 = [float(v) for v in s2]
    inv = [float(v) for v in inv]
    n = len(s1) - 1
    inf = math.inf
    F = [inf] * (n + 1)
    last = [-1] * (n + 1)
    kill_at = [-1] * (n + 1)
    F[0] = 0.0
    cands = [0]
    for t in range(min_seg, n + 1):
        s_new = t - min_seg
        if s_new >= min_seg:
            cands.append(s_new)
        best = inf
        best_s = -1
        s1t = s1[t]
        s2t = s2[t]
        partial = []
        for s in cands:
            m = s1t - s1[s]
            c = (s2t - s2[s]) - m * m * inv[t - s]
            if c < 0.0:
                c = 0.0
            v0 = F[s] + c
            partial.append(v0)
            v = v0 + beta
            if v < best:
                best = v
                best_s = s
        F[t] = best
        last[t] = best_s
        if prune:
            bound = best + margin
            horizon = t + 1 - min_seg
            kept = []
            for s, v0 in zip(cands, partial):
                k = kill_at[s]
                if k < 0 and v0 > bound:
                    k = kill_at[s] = t
                if 0 <= k <= horizon:
                    continue
                kept.append(s)
            cands = kept
    return np.asarray(F, dtype=np.float64), np.asarray(last, dtype=np.int64)


def build_tree(X, u, max_depth):
    """Grow one isolation tree on ``X`` (m x d) consuming uniforms ``u``.

    Nodes are numbered in creation (pre-)order; node ``k`` draws its split
    dimension from ``u[k, 0]`` and its split value from ``u[k, 1]``.
    """
    X = np.asarray(X, dtype=np.float64)
    m, d = X.shape
    rows = X.tolist()
    n_max = 2 ** (max_depth + 1) - 1
    feat = np.full(n_max, -1, dtype=np.int64)
    thr = np.zeros(n_max, dtype=np.float64)
    left = np.full(n_max, -1, dtype=np.int64)
    right = np.full(n_max, -1, dtype=np.int64)
    size = np.zeros(n_max, dtype=np.int64)
    idx = list(range(m))
    # (lo, hi, depth, parent, is_left)
    stack = [(0, m, 0, -1, 0)]
    n_nodes = 0
    while stack:
        lo, hi, depth, parent, is_left = stack.pop()
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
        live = []
        lows = []
        highs = []
        for j in range(d):
            mn = rows[idx[lo]][j]
            mx = mn
            for k in range(lo + 1, hi):
                v = rows[idx[k]][j]
                if v < mn:
                    mn = v
                if v > mx:
                    mx = v
            if mx > mn:
                live.append(j)
                lows.append(mn)
                highs.append(mx)
        if not live:
            continue
        pick = int(u[node, 0] * len(live))
        if pick >= len(live):
            pick = len(live) - 1
        dim = live[pick]
        mn = lows[pick]
        mx = highs[pick]
        split = mx - u[node, 1] * (mx - mn)
        if split <= mn:
            split = mx
        feat[node] = dim
        thr[node] = split
        # stable in-place partition: values < split to the front
        segment = idx[lo:hi]
        lower = [i for i in segment if rows[i][dim] < split]
        upper = [i for i in segment if not rows[i][dim] < split]
        idx[lo:hi] = lower + upper
        mid = lo + len(lower)
        stack.append((mid, hi, depth + 1, node, 0))
        stack.append((lo, mid, depth + 1, node, 1))
    return feat, thr, left, right, size, n_nodes


def mean_path_length(X, feat, thr, left, right, leaf_adj):
    """Average isolation depth of each row of ``X`` over a stacked forest.

    ``feat``, ``thr``, ``left``, ``right`` and ``leaf_adj`` are (trees x nodes)
    arrays; ``leaf_adj`` holds c(leaf size) for leaves.
    """
    X = np.asarray(X, dtype=np.float64)
    n = X.shape[0]
    n_trees = feat.shape[0]
    rows = X.tolist()
    feat_l = feat.tolist()
    thr_l = thr.tolist()
    left_l = left.tolist()
    right_l = right.tolist()
    adj_l = leaf_adj.tolist()
    out = np.empty(n, dtype=np.float64)
    for i in range(n):
        x = rows[i]
        total = 0.0
        for k in range(n_trees):
            fk = feat_l[k]
            node = 0
            depth = 0
            while fk[node] >= 0:
                if x[fk[node]] < thr_l[k][node]:
                    node = left_l[k][node]
                else:
                    node = right_l[k][node]
                depth += 1
            total += depth + adj_l[k][node]
        out[i] = total / n_trees
    return out
