"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--n 20000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from turnkit.changepoint import PeltConfig, fit_iforest, pelt_solve, score_samples


def planted_series(n, shifts, seed=0):
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, 1.0, n)
    for cp in np.linspace(0, n, shifts + 2, dtype=int)[1:-1]:
        x[cp:] += rng.choice([-5.0, 5.0])
    return x


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=20000, help="PELT series length")
    ap.add_argument("--points", type=int, default=2000, help="isolation forest rows")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    x = planted_series(args.n, max(1, args.n // 2000))
    X = np.random.default_rng(1).normal(size=(args.points, 9))
    cfg = PeltConfig()

    rows = []
    results = {}
    for backend in ("cython", "python"):
        t_pelt, res = best_of(lambda: pelt_solve(x, cfg, backend=backend), args.repeat)
        t_fit, model = best_of(lambda: fit_iforest(X, backend=backend), args.repeat)
        t_score, scores = best_of(lambda: score_samples(model, X, backend=backend), args.repeat)
        results[backend] = (res, scores)
        rows.append((backend, t_pelt, t_fit, t_score))

    print(f"{'backend':<8}{'pelt n=' + str(args.n):>16}{'forest fit':>12}{'forest score':>14}")
    for name, a, b, c in rows:
        print(f"{name:<8}{a:>15.3f}s{b:>11.3f}s{c:>13.3f}s")
    speed = [p / c for p, c in zip(rows[1][1:], rows[0][1:])]
    print(f"{'speedup':<8}{speed[0]:>15.1f}x{speed[1]:>11.1f}x{speed[2]:>13.1f}x")

    (rc, sc), (rp, sp) = results["cython"], results["python"]
    same = rc.change_points == rp.change_points and rc.cost == rp.cost and np.array_equal(sc, sp)
    print("outputs identical:", same)


if __name__ == "__main__":
    main()
