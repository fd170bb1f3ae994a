"""HMM turn detectors: 3-step composite states and block-based region HMM."""

import json
import warnings
from collections import Counter
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .angles import classify_region, region_distance
from .errors import InsufficientDataError
from .events import TurnEvent

N_REGIONS = 8

__all__ = [
    "HmmModel",
    "LegacyModel",
    "build_legacy_states",
    "classify_region",
    "cluster_legacy_values",
    "default_model",
    "detect_hmm",
    "detect_legacy",
    "forward_beliefs",
    "train_hmm",
]


@dataclass(frozen=True)
class HmmModel:
    """Region HMM.

    ``transition[i, j]`` is P(next region = i+1 | current region = j+1), so
    columns are distributions. ``emission`` rows are (turn, no turn) per region.
    """

    transition: np.ndarray
    emission: np.ndarray
    obs_epsilon: float = 0.1

    def __post_init__(self):
        T = np.asarray(self.transition, dtype=np.float64)
        E = np.asarray(self.emission, dtype=np.float64)
        object.__setattr__(self, "transition", T)
        object.__setattr__(self, "emission", E)
        if T.shape != (N_REGIONS, N_REGIONS) or E.shape != (2, N_REGIONS):
            raise ValueError("transition must be 8x8 and emission 2x8")
        if np.any(T < 0) or np.any(T > 1) or np.any(E < 0) or np.any(E > 1):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.abs(T.sum(axis=0) - 1) > 0.005):
            raise ValueError("transition columns must sum to 1 (within 0.005)")
        if np.any(np.abs(E.sum(axis=0) - 1) > 1e-9):
            raise ValueError("emission columns must sum to 1")
        if not 0 <= self.obs_epsilon < 1:
            raise ValueError("obs_epsilon must lie in [0, 1)")

    def to_json(self):
        return json.dumps(
            {
                "transition": self.transition.tolist(),
                "emission": self.emission.tolist(),
                "obs_epsilon": self.obs_epsilon,
            },
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(d["transition"], d["emission"], float(d.get("obs_epsilon", 0.1)))

    def with_epsilon(self, obs_epsilon):
        return HmmModel(self.transition, self.emission, obs_epsilon)


def default_model() -> HmmModel:
    """The published 8-region transition and emission tables."""
    text = resources.files("turnkit").joinpath("data/tables.json").read_text()
    return HmmModel.from_json(text)


def train_hmm(corpus, alpha=1.0) -> HmmModel:
    """Estimate transition/emission tables from labelled block sequences.

    ``corpus`` is an iterable of walks; each walk is a sequence of
    ``(region, is_turn)`` pairs, one per block.
    """
    trans = np.zeros((N_REGIONS, N_REGIONS))
    turns = np.zeros(N_REGIONS)
    blocks = np.zeros(N_REGIONS)
    n_walks = 0
    for walk in corpus:
        n_walks += 1
        prev = None
        for region, is_turn in walk:
            r = int(region) - 1
            blocks[r] += 1
            turns[r] += bool(is_turn)
            if prev is not None:
                trans[r, prev] += 1
            prev = r
    if blocks.sum() == 0:
        raise InsufficientDataError("cannot train on an empty corpus")
    trans += alpha
    T = trans / trans.sum(axis=0, keepdims=True)
    p_turn = (turns + alpha) / (blocks + 2 * alpha)
    E = np.vstack([p_turn, 1.0 - p_turn])
    return HmmModel(T, E)


def forward_beliefs(regions, model: HmmModel):
    """Filtered distributions over hidden regions, one row per block."""
    obs = [int(r) - 1 for r in regions]
    if not obs:
        return np.zeros((0, N_REGIONS))
    eps = model.obs_epsilon
    beliefs = np.zeros((len(obs), N_REGIONS))
    beliefs[0, obs[0]] = 1.0
    for t in range(1, len(obs)):
        pred = model.transition @ beliefs[t - 1]
        like = np.full(N_REGIONS, eps / (N_REGIONS - 1))
        like[obs[t]] = 1.0 - eps
        post = pred * like
        total = post.sum()
        if total > 0:
            beliefs[t] = post / total
        else:
            # observation impossible under the prior; trust it
            beliefs[t, obs[t]] = 1.0
    return beliefs


def detect_hmm(blocks, model: HmmModel = None):
    """Flag block boundaries where the posterior of staying put drops below 0.5.

    The event covers the block entered at the boundary. Its score is the
    posterior change probability weighted by the relative turn emission of the
    region being left.
    """
    if model is None:
        model = default_model()
    if not blocks:
        return []
    beliefs = forward_beliefs([b.region for b in blocks], model)
    e_turn = model.emission[0]
    e_max = e_turn.max() if e_turn.max() > 0 else 1.0
    events = []
    for t in range(len(blocks) - 1):
        stay_region = int(np.argmax(beliefs[t]))
        stay = beliefs[t + 1, stay_region]
        if stay < 0.5:
            score = float((1.0 - stay) * e_turn[stay_region] / e_max)
            b = blocks[t + 1]
            events.append(TurnEvent(b.first_step, b.last_step, "hmm_block", score))
    return events


# --- legacy 3-step composite states ---------------------------------------


def build_legacy_states(regions):
    """Tile per-step regions into non-overlapping triples; a 1-2 step tail is dropped."""
    regions = [int(r) for r in regions]
    if len(regions) < 3:
        raise InsufficientDataError("legacy states need at least 3 steps")
    n = len(regions) // 3
    return [tuple(regions[3 * i : 3 * i + 3]) for i in range(n)]


def triple_distance(a, b):
    return sum(region_distance(x, y) for x, y in zip(a, b))


@dataclass(frozen=True)
class LegacyModel:
    values: tuple
    value_probs: np.ndarray
    cluster_count: int = 14
    underfilled: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(tuple(int(r) for r in v) for v in self.values))
        P = np.asarray(self.value_probs, dtype=np.float64)
        object.__setattr__(self, "value_probs", P)
        k = len(self.values)
        if P.shape != (k, k):
            raise ValueError("value_probs must be square over the retained values")
        if np.any(np.abs(P.sum(axis=1) - 1) > 1e-9):
            raise ValueError("successor distributions must sum to 1")
        if not self.underfilled and k != self.cluster_count:
            raise ValueError("number of values must equal cluster_count")

    def relabel(self, triple):
        """Index of the retained value nearest to ``triple`` (ties: more frequent)."""
        triple = tuple(int(r) for r in triple)
        best = None
        best_d = None
        for i, v in enumerate(self.values):
            d = triple_distance(triple, v)
            if best_d is None or d < best_d:
                best, best_d = i, d
        return best

    def p_keep(self, index):
        return float(self.value_probs[index, index])

    def to_json(self):
        return json.dumps(
            {
                "values": [list(v) for v in self.values],
                "value_probs": self.value_probs.tolist(),
                "cluster_count": self.cluster_count,
                "underfilled": self.underfilled,
            },
            indent=2,
        ) + "\n"

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        return cls(
            tuple(tuple(v) for v in d["values"]),
            d["value_probs"],
            int(d["cluster_count"]),
            bool(d.get("underfilled", False)),
        )


def _as_sequences(triples):
    triples = list(triples)
    if triples and len(triples[0]) == 3 and all(np.isscalar(r) for r in triples[0]):
        return [triples]
    return [list(seq) for seq in triples]


def cluster_legacy_values(triples, cluster_count=14, alpha=1.0) -> LegacyModel:
    """Keep the ``cluster_count`` most frequent triples and fold the rest in.

    ``triples`` is one sequence of triples or a list of such sequences (one per
    walk); successor counts never cross walk boundaries.
    """
    seqs = [[tuple(int(r) for r in tr) for tr in seq] for seq in _as_sequences(triples)]
    counts = Counter(tr for seq in seqs for tr in seq)
    if not counts:
        raise InsufficientDataError("cannot cluster an empty corpus")
    ranked = sorted(counts, key=lambda tr: (-counts[tr], tr))
    underfilled = len(ranked) < cluster_count
    if underfilled:
        warnings.warn(
            f"only {len(ranked)} distinct triples for {cluster_count} clusters", stacklevel=2
        )
    values = ranked[:cluster_count]
    k = len(values)
    probe = LegacyModel(values, np.eye(k), cluster_count, underfilled)
    label = {tr: probe.relabel(tr) for tr in counts}
    succ = np.full((k, k), float(alpha))
    for seq in seqs:
        for a, b in zip(seq[:-1], seq[1:]):
            succ[label[a], label[b]] += 1
    probs = succ / succ.sum(axis=1, keepdims=True)
    return LegacyModel(values, probs, cluster_count, underfilled)


def detect_legacy(triples, model: LegacyModel):
    """Flag composite states whose chance of keeping their value is below 0.5."""
    events = []
    for t, tr in enumerate(triples):
        idx = model.relabel(tr)
        if idx is None or not 0 <= idx < len(model.values):
            raise RuntimeError(f"triple {tr} did not map to a retained value")
        keep = model.p_keep(idx)
        if keep < 0.5:
            events.append(TurnEvent(3 * t, 3 * t + 2, "hmm_legacy", 1.0 - keep))
    return events


def legacy_regions(theta):
    return [int(r) for r in np.atleast_1d(classify_region(np.asarray(theta, dtype=np.float64)))]
