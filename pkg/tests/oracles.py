"""Independent reference implementations used to check the package."""

import itertools
import math
from fractions import Fraction

import numpy as np


def exhaustive_segmentation(cost, n, beta, min_seg=1):
    """Minimum penalized cost over every segmentation with segments >= min_seg.

    ``cost(a, b)`` is the half-open segment cost. Terms are summed left to
    right as (total + C) + beta, the same order the dynamic program uses.
    """
    best = math.inf
    best_cps = None
    inner = range(min_seg, n - min_seg + 1)
    for k in range(0, n // max(min_seg, 1)):
        for cps in itertools.combinations(inner, k):
            bounds = (0, *cps, n)
            if any(b - a < min_seg for a, b in zip(bounds[:-1], bounds[1:])):
                continue
            total = 0.0
            for a, b in zip(bounds[:-1], bounds[1:]):
                total = total + cost(a, b) + beta
            if total < best:
                best, best_cps = total, list(cps)
    return best, best_cps


def naive_cost(x, a, b):
    """Inclusive-range squared deviation from the mean, computed directly."""
    seg = np.asarray(x[a : b + 1], dtype=np.float64)
    return float(np.sum((seg - seg.mean()) ** 2))


def harmonic(n):
    return sum(Fraction(1, k) for k in range(1, n + 1))


def c_exact(n):
    """Average unsuccessful-search path length in a BST of n keys, as a Fraction."""
    if n <= 1:
        return Fraction(0)
    if n == 2:
        return Fraction(1)
    return 2 * harmonic(n - 1) - Fraction(2 * (n - 1), n)


def region_of(theta):
    """Region id by scanning the eight half-open arcs with exact arithmetic."""
    t = Fraction(theta).limit_denominator(10**9) if not isinstance(theta, Fraction) else theta
    t = t - 360 * math.floor((t + 180) / 360)
    hits = []
    for k in range(1, 9):
        lo = Fraction(-45, 2) + 45 * (k - 1)
        hi = lo + 45
        for shift in (-360, 0, 360):
            if lo + shift <= t < hi + shift:
                hits.append(k)
    assert len(hits) == 1, (theta, hits)
    return hits[0]


def forward_filter(regions, T, eps):
    """Plain-loop forward filter with symmetric region confusion."""
    n_states = len(T)
    b = [0.0] * n_states
    b[regions[0] - 1] = 1.0
    out = [b]
    for r in regions[1:]:
        pred = [sum(T[i][j] * b[j] for j in range(n_states)) for i in range(n_states)]
        post = [pred[i] * ((1 - eps) if i == r - 1 else eps / (n_states - 1)) for i in range(n_states)]
        z = sum(post)
        b = [p / z for p in post] if z > 0 else [1.0 * (i == r - 1) for i in range(n_states)]
        out.append(b)
    return out


def greedy_match(det, truth, tol):
    """Reference greedy matcher over all (gap, det, truth) triples."""
    cands = []
    for i, (d0, d1) in enumerate(det):
        for j, (t0, t1) in enumerate(truth):
            if d0 - tol <= t1 + tol and t0 - tol <= d1 + tol:
                cands.append((max(0, t0 - d1, d0 - t1), i, j))
    taken_d, taken_t, pairs = set(), set(), []
    for _, i, j in sorted(cands):
        if i not in taken_d and j not in taken_t:
            taken_d.add(i)
            taken_t.add(j)
            pairs.append((i, j))
    return sorted(pairs)
