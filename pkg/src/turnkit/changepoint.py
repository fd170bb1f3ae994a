"""PELT change points on yaw, isolation-forest outlier steps, and their fusion."""

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from . import _backend
from .angles import unwrap_deg
from .errors import InsufficientDataError
from .events import TurnEvent

# --- PELT -------------------------------------------------------------------


@dataclass(frozen=True)
class PeltConfig:
    penalty_beta: float = None  # None: 2 * sigma^2 * ln(n), sigma from the MAD of differences
    min_segment: int = 2
    cost_kind: str = "l2_mean"

    def __post_init__(self):
        if self.penalty_beta is not None and not self.penalty_beta >= 0:
            raise ValueError("penalty_beta must be >= 0")
        if self.min_segment < 1:
            raise ValueError("min_segment must be >= 1")
        if self.cost_kind != "l2_mean":
            raise ValueError(f"unsupported cost {self.cost_kind!r}")


class L2Cost:
    """Sum of squared deviations from the segment mean, O(1) per query.

    The series is centred before the prefix sums are taken; this leaves every
    segment cost unchanged mathematically and limits cancellation.
    """

    def __init__(self, series):
        x = np.asarray(series, dtype=np.float64)
        if x.ndim != 1:
            raise ValueError("series must be one-dimensional")
        self.n = len(x)
        xc = x - x.mean() if self.n else x
        self.s1 = np.concatenate([[0.0], np.cumsum(xc)])
        self.s2 = np.concatenate([[0.0], np.cumsum(xc * xc)])
        d = np.arange(self.n + 1, dtype=np.float64)
        d[0] = 1.0
        self.inv = 1.0 / d
        self.inv[0] = 0.0
        self._s1 = self.s1.tolist()
        self._s2 = self.s2.tolist()
        self._inv = self.inv.tolist()

    def half_open(self, a, b):
        """Cost of x[a:b]; same operation order as the compiled kernel."""
        m = self._s1[b] - self._s1[a]
        c = (self._s2[b] - self._s2[a]) - m * m * self._inv[b - a]
        return c if c > 0.0 else 0.0

    def __call__(self, a, b):
        """Cost of the inclusive range x[a..b]."""
        if not 0 <= a <= b < self.n:
            raise IndexError(f"segment [{a}, {b}] out of range for length {self.n}")
        return self.half_open(a, b + 1)


def segment_cost(series, a, b):
    return L2Cost(series)(a, b)


def mad_sigma(series):
    d = np.diff(np.asarray(series, dtype=np.float64))
    if len(d) == 0:
        return 0.0
    return float(1.4826 * np.median(np.abs(d - np.median(d))) / math.sqrt(2.0))


def default_penalty(series):
    n = len(series)
    return 2.0 * mad_sigma(series) ** 2 * math.log(max(n, 2))


def penalized_cost(cost: L2Cost, change_points, beta):
    """Total of (segment cost + beta) over the segmentation, summed left to right."""
    bounds = [0, *change_points, cost.n]
    total = 0.0
    for a, b in zip(bounds[:-1], bounds[1:]):
        total = total + cost.half_open(a, b) + beta
    return total


@dataclass
class PeltResult:
    change_points: list
    cost: float
    beta: float


def pelt_solve(series, cfg: PeltConfig = PeltConfig(), prune=True, backend=None) -> PeltResult:
    x = np.asarray(series, dtype=np.float64)
    n = len(x)
    if n < 2 * cfg.min_segment:
        raise InsufficientDataError(
            f"series of length {n} is shorter than 2 * min_segment = {2 * cfg.min_segment}"
        )
    beta = default_penalty(x) if cfg.penalty_beta is None else float(cfg.penalty_beta)
    cost = L2Cost(x)
    if math.isinf(beta):
        return PeltResult([], math.inf, beta)
    margin = 1e-9 * (abs(cost.s2[-1]) + 1.0)
    k = _backend.get_kernels(backend)
    F, last = k.pelt_core(cost.s1, cost.s2, cost.inv, beta, cfg.min_segment, prune, margin)
    cps = []
    t = n
    while t > 0:
        s = int(last[t])
        if s > 0:
            cps.append(s)
        t = s
    cps.reverse()
    return PeltResult(cps, float(F[n]), beta)


def pelt(series, cfg: PeltConfig = PeltConfig(), prune=True, backend=None):
    """Change points (start indices of new segments) minimizing the penalized L2 cost."""
    return pelt_solve(series, cfg, prune=prune, backend=backend).change_points


# --- isolation forest -------------------------------------------------------


@lru_cache(maxsize=None)
def average_path_length(n):
    """c(n): mean unsuccessful-search depth in a BST of n points."""
    if n <= 1:
        return 0.0
    if n == 2:
        return 1.0
    harmonic = math.fsum(1.0 / i for i in range(1, n))
    return 2.0 * harmonic - 2.0 * (n - 1) / n


def score_from_path(mean_path, subsample_size):
    """2 ** (-E[h(x)] / c(psi))."""
    return 2.0 ** (-np.asarray(mean_path, dtype=np.float64) / average_path_length(subsample_size))


@dataclass
class IsolationForestModel:
    feat: np.ndarray  # (trees, nodes) split dimension, -1 at leaves
    thr: np.ndarray
    left: np.ndarray
    right: np.ndarray
    size: np.ndarray
    n_nodes: np.ndarray
    subsample_size: int = 256
    tree_count: int = 100
    contamination: float = 0.05
    seed: int = 0
    n_features: int = 0
    degenerate: bool = False
    leaf_adj: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if not 0 < self.contamination < 0.5:
            raise ValueError("contamination must lie in (0, 0.5)")
        if self.leaf_adj is None:
            adj = np.vectorize(average_path_length, otypes=[np.float64])(self.size)
            self.leaf_adj = np.where(self.feat < 0, adj, 0.0)

    @property
    def max_depth(self):
        return max_depth_for(self.subsample_size)

    def tree(self, k):
        m = int(self.n_nodes[k])
        return {
            "feat": self.feat[k, :m].tolist(),
            "thr": self.thr[k, :m].tolist(),
            "left": self.left[k, :m].tolist(),
            "right": self.right[k, :m].tolist(),
            "size": self.size[k, :m].tolist(),
        }

    def tree_depth(self, k):
        depth = {0: 0}
        best = 0
        for node in range(int(self.n_nodes[k])):
            for child in (self.left[k, node], self.right[k, node]):
                if child >= 0:
                    depth[int(child)] = depth[node] + 1
                    best = max(best, depth[node] + 1)
        return best

    def to_json(self):
        return json.dumps(
            {
                "seed": self.seed,
                "subsample_size": self.subsample_size,
                "tree_count": self.tree_count,
                "contamination": self.contamination,
                "n_features": self.n_features,
                "degenerate": self.degenerate,
                "trees": [self.tree(k) for k in range(self.tree_count)],
            }
        ) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        width = 2 ** (max_depth_for(d["subsample_size"]) + 1) - 1
        T = len(d["trees"])
        arrays = {
            "feat": np.full((T, width), -1, dtype=np.int64),
            "thr": np.zeros((T, width)),
            "left": np.full((T, width), -1, dtype=np.int64),
            "right": np.full((T, width), -1, dtype=np.int64),
            "size": np.zeros((T, width), dtype=np.int64),
        }
        n_nodes = np.zeros(T, dtype=np.int64)
        for k, tree in enumerate(d["trees"]):
            m = len(tree["feat"])
            n_nodes[k] = m
            for key, arr in arrays.items():
                arr[k, :m] = tree[key]
        return cls(
            n_nodes=n_nodes,
            subsample_size=d["subsample_size"],
            tree_count=d["tree_count"],
            contamination=d["contamination"],
            seed=d["seed"],
            n_features=d["n_features"],
            degenerate=d["degenerate"],
            **arrays,
        )


def max_depth_for(subsample_size):
    return max(1, math.ceil(math.log2(subsample_size)))


def fit_iforest(points, tree_count=100, subsample_size=256, contamination=0.05, seed=0,
                backend=None) -> IsolationForestModel:
    """Grow ``tree_count`` isolation trees; tree k uses the RNG seeded by (seed, k)."""
    X = np.ascontiguousarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    n, d = X.shape
    if n < 2:
        raise InsufficientDataError("isolation forest needs at least 2 points")
    if subsample_size < 2:
        raise ValueError("subsample_size must be >= 2")
    k = _backend.get_kernels(backend)
    depth = max_depth_for(subsample_size)
    width = 2 ** (depth + 1) - 1
    feat = np.full((tree_count, width), -1, dtype=np.int64)
    thr = np.zeros((tree_count, width))
    left = np.full((tree_count, width), -1, dtype=np.int64)
    right = np.full((tree_count, width), -1, dtype=np.int64)
    size = np.zeros((tree_count, width), dtype=np.int64)
    n_nodes = np.zeros(tree_count, dtype=np.int64)
    for t in range(tree_count):
        rng = np.random.default_rng([seed, t])
        if subsample_size <= n:
            idx = rng.choice(n, subsample_size, replace=False)
        else:
            idx = rng.integers(0, n, subsample_size)
        u = rng.random((width, 2))
        f, th, lf, rt, sz, m = k.build_tree(X[idx], u, depth)
        feat[t], thr[t], left[t], right[t], size[t] = f, th, lf, rt, sz
        n_nodes[t] = m
    degenerate = bool(np.all(X == X[0]))
    return IsolationForestModel(
        feat, thr, left, right, size, n_nodes,
        subsample_size=subsample_size, tree_count=tree_count, contamination=contamination,
        seed=seed, n_features=d, degenerate=degenerate,
    )


def mean_path_lengths(model: IsolationForestModel, X, backend=None):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    k = _backend.get_kernels(backend)
    return k.mean_path_length(X, model.feat, model.thr, model.left, model.right, model.leaf_adj)


def score_samples(model: IsolationForestModel, X, backend=None):
    """Anomaly score in (0, 1) for each row of ``X``; 0.5 everywhere if degenerate."""
    X = np.asarray(X, dtype=np.float64)
    n = 1 if X.ndim == 1 else X.shape[0]
    if model.degenerate:
        return np.full(n, 0.5)
    return score_from_path(mean_path_lengths(model, X, backend), model.subsample_size)


def iforest_score(model: IsolationForestModel, x):
    return float(score_samples(model, np.asarray(x, dtype=np.float64)[None, :])[0])


def outlier_count(n, contamination):
    return math.ceil(Fraction(str(contamination)) * n)


def flag_outliers(scores, contamination):
    """Indices of the ceil(contamination * n) highest scores, ties to the lower index."""
    scores = np.asarray(scores, dtype=np.float64)
    k = outlier_count(len(scores), contamination)
    order = np.lexsort((np.arange(len(scores)), -scores))
    return sorted(int(i) for i in order[:k])


# --- turn events ------------------------------------------------------------


@dataclass
class PeltDiagnostics:
    change_points: list
    overlaps: int
    beta: float


def _merge_spans(items):
    """Merge (first, last, score) triples that share a step; keeps max score."""
    merged = []
    for first, last, score in sorted(items):
        if merged and first <= merged[-1][1]:
            f, l, s = merged[-1]
            merged[-1] = (f, max(l, last), max(s, score))
        else:
            merged.append((first, last, score))
    return merged


def _pelt_spans(yaw, cfg: PeltConfig):
    x = unwrap_deg(yaw)
    n = len(x)
    res = pelt_solve(x, cfg)
    cost = L2Cost(x)
    bounds = [0, *res.change_points, n]
    half = cfg.min_segment - 1
    spans = []
    for i, cp in enumerate(res.change_points):
        a, b = bounds[i], bounds[i + 2]
        gain = cost.half_open(a, b) - cost.half_open(a, cp) - cost.half_open(cp, b)
        score = 1.0 if res.beta == 0 else gain / (gain + res.beta)
        spans.append((max(0, cp - half), min(n - 1, cp + half), float(min(max(score, 0.0), 1.0))))
    merged = _merge_spans(spans)
    overlaps = len(spans) - len(merged)
    return merged, PeltDiagnostics(res.change_points, overlaps, res.beta)


def detect_pelt(yaw, cfg: PeltConfig = PeltConfig(), diagnostics=False):
    """PELT change points on the unwrapped yaw series as turn events."""
    spans, diag = _pelt_spans(yaw, cfg)
    events = [TurnEvent(a, b, "pelt", s) for a, b, s in spans]
    return (events, diag) if diagnostics else events


@dataclass(frozen=True)
class ForestConfig:
    tree_count: int = 100
    subsample_size: int = 256
    contamination: float = 0.05
    seed: int = 0


def detect_iforest(features, cfg: ForestConfig = ForestConfig()):
    """Single-step (index, score) pairs for the most isolated steps."""
    model = fit_iforest(
        features, cfg.tree_count, cfg.subsample_size, cfg.contamination, cfg.seed
    )
    scores = score_samples(model, features)
    if model.degenerate:
        return []
    return [(i, float(scores[i])) for i in flag_outliers(scores, cfg.contamination)]


def detect_pelt_if(yaw, features, pelt_cfg: PeltConfig = PeltConfig(),
                   forest_cfg: ForestConfig = ForestConfig()):
    """Union of PELT events and isolation-forest outlier steps, merged where they overlap."""
    yaw = np.asarray(yaw, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if len(features) != len(yaw):
        raise ValueError("need one feature row per step")
    spans, _ = _pelt_spans(yaw, pelt_cfg)
    items = list(spans) + [(i, i, s) for i, s in detect_iforest(features, forest_cfg)]
    return [TurnEvent(a, b, "pelt_if", s) for a, b, s in _merge_spans(items)]
