import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import c_exact, exhaustive_segmentation, naive_cost
from turnkit.changepoint import (
    ForestConfig,
    IsolationForestModel,
    L2Cost,
    PeltConfig,
    average_path_length,
    default_penalty,
    detect_pelt,
    detect_pelt_if,
    fit_iforest,
    flag_outliers,
    iforest_score,
    mad_sigma,
    outlier_count,
    pelt,
    pelt_solve,
    penalized_cost,
    score_from_path,
    score_samples,
    segment_cost,
)
from turnkit.errors import InsufficientDataError
from turnkit.synth import CorpusTemplate, generate_corpus

series = st.lists(st.floats(-100, 100, allow_nan=False), min_size=1, max_size=40)


def test_cost_examples():
    assert segment_cost([4, 4, 4], 0, 2) == 0.0
    assert segment_cost([0, 0, 6, 6], 0, 3) == 36.0
    assert segment_cost([7.5], 0, 0) == 0.0
    with pytest.raises(IndexError):
        segment_cost([1, 2], 1, 2)


@given(series, st.data())
def test_cost_matches_direct_sum(xs, data):
    a = data.draw(st.integers(0, len(xs) - 1))
    b = data.draw(st.integers(a, len(xs) - 1))
    got = L2Cost(xs)(a, b)
    want = naive_cost(xs, a, b)
    assert got >= 0
    assert abs(got - want) <= 1e-7 * (1 + sum(x * x for x in xs))


def test_pelt_examples():
    assert pelt(np.full(20, 3.0), PeltConfig(penalty_beta=1.0)) == []
    x = np.array([0.0] * 10 + [5.0] * 10)
    assert pelt(x, PeltConfig(penalty_beta=1.0)) == [10]
    best, cps = exhaustive_segmentation(L2Cost(x).half_open, 20, 1.0, min_seg=2)
    assert cps == [10]
    assert pelt(np.random.default_rng(0).normal(size=30), PeltConfig(penalty_beta=math.inf)) == []


def test_pelt_too_short():
    with pytest.raises(InsufficientDataError):
        pelt([1.0, 2.0, 3.0], PeltConfig(min_segment=2))


def test_default_penalty():
    x = np.random.default_rng(1).normal(0, 2.0, 500)
    d = np.diff(x)
    sigma = 1.4826 * np.median(np.abs(d - np.median(d))) / math.sqrt(2)
    assert mad_sigma(x) == pytest.approx(sigma, rel=1e-12)
    assert default_penalty(x) == pytest.approx(2 * sigma**2 * math.log(500), rel=1e-12)
    assert 1.6 < mad_sigma(x) < 2.4


def random_series(rng, n):
    x = rng.normal(0, 1, n)
    if rng.random() < 0.5:
        for cp in sorted(rng.choice(np.arange(1, n), min(n - 1, int(rng.integers(1, 3))), replace=False)):
            x[cp:] += rng.normal(0, 5)
    return x


@pytest.mark.parametrize("min_seg", [1, 2, 3])
def test_pelt_matches_exhaustive(min_seg):
    rng = np.random.default_rng(100 + min_seg)
    for _ in range(30):
        n = int(rng.integers(2 * min_seg, 11))
        x = random_series(rng, n)
        beta = float(rng.uniform(0.1, 8))
        res = pelt_solve(x, PeltConfig(beta, min_seg))
        cost = L2Cost(x)
        best, _ = exhaustive_segmentation(cost.half_open, n, beta, min_seg)
        assert res.cost == best
        assert penalized_cost(cost, res.change_points, beta) == best


def test_pruning_sound():
    rng = np.random.default_rng(7)
    for _ in range(100):
        x = random_series(rng, int(rng.integers(4, 200)))
        cfg = PeltConfig(float(rng.uniform(0.5, 20)), int(rng.integers(1, 4)))
        if len(x) < 2 * cfg.min_segment:
            continue
        assert pelt(x, cfg, prune=True) == pelt(x, cfg, prune=False)


def test_changepoint_count_monotone_in_beta():
    rng = np.random.default_rng(11)
    for _ in range(10):
        x = random_series(rng, 120)
        counts = [len(pelt(x, PeltConfig(b))) for b in np.geomspace(0.01, 1e4, 25)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


@given(st.integers(1, 40), st.integers(0, 2**31 - 1))
def test_pelt_backends_identical(n, seed):
    x = random_series(np.random.default_rng(seed), n + 4)
    a = pelt_solve(x, backend="python")
    b = pelt_solve(x, backend="cython")
    assert a.change_points == b.change_points
    assert a.cost == b.cost


# --- isolation forest ---


def test_c_matches_exact():
    assert average_path_length(1) == 0.0
    assert average_path_length(2) == 1.0
    for n in (3, 4, 10, 100, 256, 1000):
        assert average_path_length(n) == pytest.approx(float(c_exact(n)), rel=1e-13)


def test_score_fixed_points():
    for psi in (2, 16, 256):
        c = average_path_length(psi)
        assert score_from_path(np.array([c]), psi)[0] == 0.5
        assert score_from_path(np.array([0.0]), psi)[0] == 1.0
        assert score_from_path(np.array([2 * c]), psi)[0] == 0.25


@given(st.lists(st.floats(0.0, 50.0), min_size=2, max_size=20))
def test_score_monotone(paths):
    paths = sorted(paths)
    s = score_from_path(np.array(paths), 256)
    assert np.all(np.diff(s) <= 0)
    assert np.all((s > 0) & (s <= 1))


def test_two_points_one_tree():
    m = fit_iforest([[0.0], [1.0]], tree_count=1, subsample_size=2)
    t = m.tree(0)
    assert m.tree_depth(0) == 1
    assert t["size"] == [2, 1, 1]
    s = score_samples(m, [[0.0], [1.0]])
    assert s[0] == s[1] == 0.5


def test_forest_deterministic_and_round_trip():
    X = np.random.default_rng(5).normal(size=(300, 4))
    a = fit_iforest(X, tree_count=20, seed=3)
    b = fit_iforest(X, tree_count=20, seed=3)
    for k in range(20):
        assert a.tree(k) == b.tree(k)
        assert a.tree_depth(k) <= math.ceil(math.log2(256))
    c = IsolationForestModel.from_json(a.to_json())
    assert np.array_equal(score_samples(a, X), score_samples(c, X))
    assert fit_iforest(X, tree_count=20, seed=4).tree(0) != a.tree(0)


def test_planted_outlier_ranks_first():
    rng = np.random.default_rng(0)
    X = np.vstack([rng.normal(size=(256, 2)), [[10.0, 10.0]]])
    s = score_samples(fit_iforest(X, seed=0), X)
    assert int(np.argmax(s)) == 256
    assert 0.0 < iforest_score(fit_iforest(X, seed=0), X[256]) < 1.0


def test_degenerate_forest():
    m = fit_iforest(np.ones((10, 3)))
    assert m.degenerate
    assert np.all(score_samples(m, np.ones((4, 3))) == 0.5)


def test_contamination_validation():
    with pytest.raises(ValueError):
        fit_iforest(np.random.default_rng(0).normal(size=(10, 2)), contamination=0.5)


@given(st.integers(1, 500), st.sampled_from([0.01, 0.05, 0.1, 0.33]))
def test_outlier_count(n, c):
    assert outlier_count(n, c) == -(-round(c * 100) * n // 100)
    scores = np.random.default_rng(n).random(n)
    assert len(flag_outliers(scores, c)) == outlier_count(n, c)


def test_flag_ties_to_lower_index():
    assert flag_outliers([0.5, 0.9, 0.9, 0.9], 0.5) == [1, 2]


@given(st.integers(2, 60), st.integers(0, 2**31 - 1))
def test_forest_backends_identical(n, seed):
    X = np.random.default_rng(seed).normal(size=(n, 3))
    a = fit_iforest(X, tree_count=5, subsample_size=32, seed=seed, backend="python")
    b = fit_iforest(X, tree_count=5, subsample_size=32, seed=seed, backend="cython")
    for k in range(5):
        assert a.tree(k) == b.tree(k)
    assert np.array_equal(score_samples(a, X, backend="python"), score_samples(b, X, backend="cython"))


# --- fusion ---


def _fusion_walk(outlier_at):
    yaw = np.array([0.0] * 10 + [90.0] * 30)
    feats = np.random.default_rng(2).normal(size=(40, 9))
    feats[outlier_at] += 40.0
    return yaw, feats


def test_fusion_disjoint_union():
    yaw, feats = _fusion_walk(25)
    cfg = ForestConfig(contamination=0.025)
    assert [e.span for e in detect_pelt(yaw)] == [(9, 11)]
    events = detect_pelt_if(yaw, feats, PeltConfig(), cfg)
    assert [e.span for e in events] == [(9, 11), (25, 25)]
    assert {e.method for e in events} == {"pelt_if"}


def test_fusion_overlap_dedup():
    yaw, feats = _fusion_walk(10)
    events = detect_pelt_if(yaw, feats, PeltConfig(), ForestConfig(contamination=0.025))
    assert [e.span for e in events] == [(9, 11)]


def test_fusion_covers_pelt():
    template = CorpusTemplate(yaw_noise_sigma=5.0)
    for walk in generate_corpus(15, template, seed=9):
        pelt_steps = {i for e in detect_pelt(walk.yaw) for i in range(e.first_step, e.last_step + 1)}
        fused = detect_pelt_if(walk.yaw, walk.features)
        fused_steps = {i for e in fused for i in range(e.first_step, e.last_step + 1)}
        assert pelt_steps <= fused_steps
        for a, b in zip(fused, fused[1:]):
            assert a.last_step < b.first_step


def test_pelt_events_ordered_disjoint():
    x = np.concatenate([np.zeros(10), np.full(3, 40.0), np.full(10, 90.0)])
    events, diag = detect_pelt(x, PeltConfig(penalty_beta=10.0, min_segment=3), diagnostics=True)
    assert diag.change_points == [10, 13]
    assert [e.span for e in events] == [(8, 15)]
    assert diag.overlaps == 1


def test_backend_switch_by_environment():
    import os
    import subprocess
    import sys

    env = dict(os.environ, TURNKIT_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "import turnkit; print(turnkit.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
