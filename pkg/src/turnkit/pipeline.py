"""Per-walk detector dispatch and the six-method comparison."""

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .changepoint import ForestConfig, PeltConfig, detect_pelt, detect_pelt_if
from .evaluate import MatchConfig, match_events, metrics
from .hmm import (
    HmmModel,
    LegacyModel,
    build_legacy_states,
    cluster_legacy_values,
    default_model,
    detect_hmm,
    detect_legacy,
    legacy_regions,
    train_hmm,
)
from .signal import (
    FilterConfig,
    ImuLog,
    StepConfig,
    blocks_for_walk,
    detect_steps,
    direction_angle,
    relative_heading,
    step_features,
)
from .threshold import ThresholdConfig, detect_threshold, flags_to_events, merge_adjacent

METHODS = ("threshold", "threshold_merged", "hmm_legacy", "hmm_block", "pelt", "pelt_if")


@dataclass
class WalkData:
    """Step-indexed inputs shared by all detectors."""

    yaw: np.ndarray
    theta: np.ndarray
    features: np.ndarray = None
    truth: list = None
    steps: list = None

    @property
    def n_steps(self):
        return len(self.yaw)

    @classmethod
    def from_synth(cls, walk, filter_cfg: FilterConfig = FilterConfig()):
        return cls(
            np.asarray(walk.yaw, dtype=np.float64),
            relative_heading(walk.yaw, filter_cfg),
            np.asarray(walk.features, dtype=np.float64),
            list(walk.truth),
        )

    @classmethod
    def from_imu(cls, log: ImuLog, step_cfg: StepConfig = StepConfig(),
                 filter_cfg: FilterConfig = FilterConfig(), truth=None):
        steps = direction_angle(detect_steps(log, step_cfg), log, filter_cfg, step_cfg)
        return cls(
            np.array([s.yaw for s in steps]),
            np.array([s.theta for s in steps]),
            step_features(steps, log),
            truth,
            steps,
        )


@dataclass
class DetectorConfig:
    threshold: ThresholdConfig = field(default_factory=ThresholdConfig)
    filter: FilterConfig = field(default_factory=FilterConfig)
    hmm_model: HmmModel = None
    legacy_model: LegacyModel = None
    pelt: PeltConfig = field(default_factory=PeltConfig)
    forest: ForestConfig = field(default_factory=ForestConfig)


def legacy_triples(theta):
    regions = legacy_regions(theta)
    if len(regions) < 3:
        return []
    return build_legacy_states(regions)


def train_legacy(walks, cluster_count=14):
    """Cluster composite 3-step states over a corpus of WalkData."""
    seqs = [legacy_triples(w.theta) for w in walks]
    return cluster_legacy_values([s for s in seqs if s], cluster_count)


def labelled_blocks(walk: WalkData, filter_cfg: FilterConfig = FilterConfig()):
    """(region, is_turn) per block; a block is a turn if it touches a true turn."""
    out = []
    for b in blocks_for_walk(walk.theta, filter_cfg):
        turn = any(b.first_step <= t1 and t0 <= b.last_step for t0, t1 in walk.truth)
        out.append((b.region, turn))
    return out


def train_block_hmm(walks, filter_cfg: FilterConfig = FilterConfig(), alpha=1.0):
    return train_hmm([labelled_blocks(w, filter_cfg) for w in walks], alpha)


@lru_cache(maxsize=1)
def default_legacy_model():
    """Legacy model clustered on a fixed synthetic training corpus (seed 0)."""
    from .synth import generate_corpus

    return train_legacy([WalkData.from_synth(w) for w in generate_corpus(200, seed=0)])


def run_method(method, walk: WalkData, cfg: DetectorConfig = None):
    cfg = cfg or DetectorConfig()
    method = method.replace("-", "_")
    if walk.n_steps < 2:
        return []
    if method == "threshold":
        return flags_to_events(detect_threshold(walk.yaw, cfg.threshold))
    if method == "threshold_merged":
        return merge_adjacent(detect_threshold(walk.yaw, cfg.threshold), cfg.threshold)
    if method == "hmm_legacy":
        model = cfg.legacy_model or default_legacy_model()
        return detect_legacy(legacy_triples(walk.theta), model)
    if method == "hmm_block":
        return detect_hmm(blocks_for_walk(walk.theta, cfg.filter), cfg.hmm_model or default_model())
    if walk.n_steps < 2 * cfg.pelt.min_segment:
        return []
    if method == "pelt":
        return detect_pelt(walk.yaw, cfg.pelt)
    if method == "pelt_if":
        if walk.features is None:
            raise ValueError("pelt_if needs per-step IMU features")
        return detect_pelt_if(walk.yaw, walk.features, cfg.pelt, cfg.forest)
    raise ValueError(f"unknown method {method!r}")


def compare_methods(walks, cfg: DetectorConfig = None, match_cfg: MatchConfig = MatchConfig(),
                    methods=METHODS):
    """One pooled EvalReport per method over a corpus of WalkData with truth.

    Without an explicit legacy model, one is clustered on the corpus itself.
    """
    cfg = cfg or DetectorConfig()
    if "hmm_legacy" in methods and cfg.legacy_model is None:
        cfg = DetectorConfig(cfg.threshold, cfg.filter, cfg.hmm_model, train_legacy(walks),
                             cfg.pelt, cfg.forest)
    reports = []
    for method in methods:
        matchings = [match_events(run_method(method, w, cfg), w.truth, match_cfg) for w in walks]
        reports.append(metrics(matchings, method))
    return reports
