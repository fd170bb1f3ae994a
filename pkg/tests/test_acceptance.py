"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s`` to see the summary lines.
"""

import math
import time

import numpy as np
import pytest

from oracles import exhaustive_segmentation, region_of
from turnkit.angles import classify_region
from turnkit.changepoint import (
    L2Cost,
    PeltConfig,
    average_path_length,
    fit_iforest,
    flag_outliers,
    pelt,
    pelt_solve,
    score_from_path,
    score_samples,
)
from turnkit.cli import main
from turnkit.evaluate import match_events, metrics
from turnkit.hmm import default_model
from turnkit.pipeline import run_method
from turnkit.threshold import detect_threshold

# published transition (column = current region) and emission tables
PUBLISHED_TRANSITION = [
    [0.5921, 0.0542, 0.0244, 0.0105, 0.0294, 0.0114, 0.0162, 0.0705],
    [0.0950, 0.7808, 0.1389, 0.0056, 0.0037, 0.0030, 0.0015, 0.0041],
    [0.0257, 0.1220, 0.7311, 0.0670, 0.0074, 0.0000, 0.0015, 0.0062],
    [0.0515, 0.0079, 0.0944, 0.8406, 0.1532, 0.0068, 0.0015, 0.0041],
    [0.0277, 0.0068, 0.0044, 0.0664, 0.6949, 0.0781, 0.0103, 0.0073],
    [0.0416, 0.0090, 0.0011, 0.0050, 0.1029, 0.8225, 0.1521, 0.0093],
    [0.0238, 0.0056, 0.0000, 0.0019, 0.0049, 0.0698, 0.7061, 0.0870],
    [0.1426, 0.0102, 0.0056, 0.0031, 0.0037, 0.0083, 0.1108, 0.8104],
]
PUBLISHED_EMISSION = [
    [0.0812, 0.1085, 0.1300, 0.1011, 0.1360, 0.0979, 0.1773, 0.1192],
    [0.9188, 0.8915, 0.8700, 0.8989, 0.8640, 0.9021, 0.8227, 0.8808],
]


@pytest.fixture
def verdict(capsys):
    def emit(n, title, ok, detail):
        with capsys.disabled():
            print(f"\n[{'PASS' if ok else 'FAIL'}] criterion {n}: {title} ({detail})")
        assert ok, detail

    return emit


def test_01_pelt_matches_exhaustive(verdict):
    rng = np.random.default_rng(2024)
    mismatches = 0
    elapsed = 0.0
    for trial in range(200):
        n = int(rng.integers(4, 13))
        x = rng.normal(0.0, 1.0, n)
        if trial % 2 == 0:  # mean-shift series; odd trials stay pure noise
            for cp in rng.choice(np.arange(1, n), int(rng.integers(1, 3)), replace=False):
                x[cp:] += rng.normal(0.0, 6.0)
        min_seg = 1 + trial % 2
        cfg = PeltConfig(min_segment=min_seg)
        t0 = time.perf_counter()
        res = pelt_solve(x, cfg)
        elapsed += time.perf_counter() - t0
        best, _ = exhaustive_segmentation(L2Cost(x).half_open, n, res.beta, min_seg)
        mismatches += res.cost != best
    verdict(1, "PELT cost equals exhaustive minimum", mismatches == 0 and elapsed < 10.0,
            f"{200 - mismatches}/200 bitwise equal, pelt time {elapsed:.3f}s")


def test_02_pelt_scaling(verdict):
    rng = np.random.default_rng(0)
    n = 100_000
    planted = np.array([(n // 51) * k for k in range(1, 51)]) + rng.integers(-200, 201, 50)
    x = rng.normal(0.0, 1.0, n)
    for cp in planted:
        x[cp:] += rng.choice([-1.0, 1.0]) * rng.uniform(3.0, 6.0)
    pelt(x[:1000])  # warm caches and imports
    t0 = time.perf_counter()
    found = np.array(pelt(x))
    elapsed = time.perf_counter() - t0
    recovered = int(sum(np.min(np.abs(found - cp)) <= 2 for cp in planted)) if len(found) else 0
    verdict(2, "PELT on n=100,000", elapsed < 1.0 and recovered >= 45,
            f"{elapsed:.3f}s, recovered {recovered}/50 within +-2")


def test_03_table_fidelity(verdict):
    m = default_model()
    exact = (m.transition.tolist() == PUBLISHED_TRANSITION
             and m.emission.tolist() == PUBLISHED_EMISSION)
    t_dev = float(np.max(np.abs(m.transition.sum(axis=0) - 1.0)))
    e_dev = float(np.max(np.abs(m.emission.sum(axis=0) - 1.0)))
    spot = m.transition[0, 0] == 0.5921 and m.emission[0, 0] == 0.0812
    verdict(3, "shipped tables match published entries", exact and spot and t_dev <= 0.005 and e_dev <= 1e-9,
            f"exact={exact}, max transition column dev {t_dev:.4f}, emission {e_dev:.1e}")


def test_04_score_fixed_points(verdict):
    psi = 256
    c = average_path_length(psi)
    half = score_from_path(np.array([c]), psi)[0]
    one = score_from_path(np.array([0.0]), psi)[0]
    rng = np.random.default_rng(4)
    model = fit_iforest(rng.normal(size=(1000, 3)), seed=4)
    s = score_samples(model, rng.normal(0.0, 3.0, size=(10_000, 3)))
    inside = bool(np.all((s > 0.0) & (s < 1.0)))
    verdict(4, "score fixed points and range", half == 0.5 and one == 1.0 and inside,
            f"s(c(psi))={half}, s(0)={one}, 10,000 scores in (0,1): {inside}")


def test_05_outlier_recovery(verdict):
    hits = 0
    counts_ok = True
    for seed in range(100):
        rng = np.random.default_rng(seed)
        X = np.vstack([rng.normal(size=(256, 2)), [[10.0, 10.0]]])
        s = score_samples(fit_iforest(X, seed=seed), X)
        hits += int(np.argmax(s)) == 256
        counts_ok &= len(flag_outliers(s, 0.05)) == math.ceil(0.05 * len(X))
    verdict(5, "planted outlier ranks first", hits >= 95 and counts_ok,
            f"{hits}/100 seeds, contamination flags ceil(0.05n)=13: {counts_ok}")


def test_06_merge_invariants(verdict, walks42):
    raw_missed = merged_missed = 0
    raw_flags = merged_events = 0
    for w in walks42:
        raw = run_method("threshold", w)
        merged = run_method("threshold_merged", w)
        raw_flags += int(detect_threshold(w.yaw).sum())
        merged_events += len(merged)
        raw_missed += len(match_events(raw, w.truth).missed_truth)
        merged_missed += len(match_events(merged, w.truth).missed_truth)
    ok = raw_missed == merged_missed and merged_events <= raw_flags
    verdict(6, "merging keeps coverage", ok,
            f"missed raw {raw_missed} / merged {merged_missed}, events {raw_flags} -> {merged_events}")


def test_07_fusion_dominance(verdict, walks42):
    worse = 0
    fa_lost = 0
    for w in walks42:
        p_events = run_method("pelt", w)
        f_events = run_method("pelt_if", w)
        p = match_events(p_events, w.truth)
        f = match_events(f_events, w.truth)
        worse += len(f.missed_truth) > len(p.missed_truth)
        # every PELT false-alarm span stays covered by a fusion false alarm
        f_fa = [f_events[i] for i in f.false_alarms]
        for i in p.false_alarms:
            e = p_events[i]
            if not any(g.first_step <= e.first_step and e.last_step <= g.last_step for g in f_fa):
                fa_lost += 1
    verdict(7, "fusion never misses more than PELT", worse == 0 and fa_lost == 0,
            f"walks with more misses {worse}/100, PELT false alarms not kept {fa_lost}")


def test_08_hmm_block_quality(verdict, walks42):
    r = metrics([match_events(run_method("hmm_block", w), w.truth) for w in walks42], "hmm_block")
    ok = r.missed_rate <= 0.10 and r.false_alarm_rate <= 0.10
    verdict(8, "hmm-block on the noise-3 corpus", ok,
            f"missed {100 * r.missed_rate:.2f}%, false alarm {100 * r.false_alarm_rate:.2f}%")


def test_09_region_grid(verdict):
    grid = np.arange(-1800, 1800) / 10.0
    regions = classify_region(grid)
    single = all([region_of(float(t))] == [r] for t, r in zip(grid, regions.tolist()))
    periodic = (np.array_equal(regions, classify_region(grid + 360.0))
                and np.array_equal(regions, classify_region(grid - 360.0)))
    bounds = -22.5 + 45.0 * np.arange(8)
    half_open = all(
        classify_region(b) == k + 1 and classify_region(np.nextafter(b, -np.inf)) == (k - 1) % 8 + 1
        for k, b in enumerate(bounds)
    )
    verdict(9, "region classifier on a 3,600-point grid", single and periodic and half_open,
            f"one region each: {single}, periodic: {periodic}, half-open: {half_open}")


def _run_all_commands(d):
    """Run every CLI command into ``d`` and return {relative path: bytes}."""
    import contextlib
    import io

    corpus = d / "corpus"
    codes = [main(["synth", "--count", "3", "--seed", "11", "--out", str(corpus)])]
    walk = str(corpus / "walk_000.csv")
    walks = [str(p) for p in sorted(corpus.glob("walk_*.csv"))]
    codes.append(main(["steps", walk, "--out", str(d / "steps.csv")]))
    for m in ("threshold", "threshold-merged", "hmm-legacy", "hmm-block", "pelt", "pelt-if"):
        codes.append(main(["detect", walk, "--method", m, "--seed", "5", "--out", str(d / f"{m}.json")]))
    for kind in ("hmm", "legacy", "forest"):
        codes.append(main(["train", *walks, "--kind", kind, "--seed", "5", "--out", str(d / f"{kind}.model.json")]))
    codes.append(main(["eval", str(d / "pelt-if.json"), "--walk", walk, "--out", str(d / "report.json"),
                       "--csv", str(d / "report.csv"), "--plot", str(d / "plot.svg")]))
    buf = io.StringIO()
    with contextlib.redirect_stdout(buf):
        codes.append(main(["compare", str(corpus), "--seed", "5", "--out", str(d / "cmp.json"),
                           "--csv", str(d / "cmp.csv")]))
    (d / "cmp.txt").write_text(buf.getvalue())
    assert codes == [0] * len(codes), codes
    return {str(p.relative_to(d)): p.read_bytes() for p in sorted(d.rglob("*")) if p.is_file()}


def test_10_cli_determinism(verdict, tmp_path):
    a = _run_all_commands(tmp_path / "a")
    b = _run_all_commands(tmp_path / "b")
    differing = sorted(k for k in a if a[k] != b.get(k))
    same_set = a.keys() == b.keys()
    verdict(10, "CLI reruns are byte-identical", same_set and not differing,
            f"{len(a)} output files compared, differing: {differing or 'none'}")
