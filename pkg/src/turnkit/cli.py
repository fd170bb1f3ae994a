"""turnkit command line: synth, steps, detect, train, eval, compare.

Exit codes: 0 ok, 2 usage or validation, 3 unparseable input, 4 missing
truth sidecar.
"""

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .changepoint import ForestConfig, PeltConfig, fit_iforest
from .errors import InsufficientDataError, ParseError, SchemaError
from .evaluate import (
    MatchConfig,
    evaluate,
    format_table,
    match_events,
    metrics,
    reports_to_csv,
    reports_to_json,
)
from .events import events_from_json, events_to_json
from .hmm import HmmModel, LegacyModel, default_model
from .pipeline import (
    METHODS,
    DetectorConfig,
    WalkData,
    run_method,
    train_block_hmm,
    train_legacy,
)
from .signal import FilterConfig, parse_imu_csv, write_imu_csv, write_steps_csv
from .synth import CorpusTemplate, corpus_checksum, generate_corpus
from .threshold import ThresholdConfig

EXIT_USAGE = 2
EXIT_PARSE = 3
EXIT_MISSING = 4

CLI_METHODS = tuple(m.replace("_", "-") for m in METHODS)

# flag name -> built-in default, for options a --config file may also set
OVERRIDABLE = {
    "tau": 22.5,
    "merge_gap": 1,
    "beta": None,
    "min_segment": 2,
    "contamination": 0.05,
    "trees": 100,
    "subsample": 256,
    "seed": 0,
    "obs_epsilon": None,
    "tolerance": 2,
    "model": None,
    "legacy_model": None,
}


class CliError(Exception):
    def __init__(self, message, code=EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _read_text(path):
    try:
        return Path(path).read_text()
    except FileNotFoundError:
        raise CliError(f"no such file: {path}") from None
    except UnicodeDecodeError as exc:
        raise CliError(f"{path}: not UTF-8 text ({exc})", EXIT_PARSE) from None


def _write(path, text):
    if path is None or path == "-":
        sys.stdout.write(text)
        return
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror}") from None


def _load_json(path, what):
    try:
        return json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise CliError(f"{path}: malformed {what} ({exc})", EXIT_PARSE) from None


def sidecar_path(walk_path):
    p = Path(walk_path)
    return p.with_name(p.stem + ".truth.json")


def load_truth(path):
    if not Path(path).exists():
        raise CliError(f"missing truth sidecar: {path}", EXIT_MISSING)
    d = _load_json(path, "truth sidecar")
    try:
        return [(int(a), int(b)) for a, b in d["turns"]]
    except (KeyError, TypeError, ValueError):
        raise CliError(f"{path}: expected {{\"turns\": [[first, last], ...]}}", EXIT_PARSE) from None


def load_walk(path, with_truth=False):
    try:
        data = Path(path).read_bytes()
    except FileNotFoundError:
        raise CliError(f"no such file: {path}") from None
    log = parse_imu_csv(data)
    truth = load_truth(sidecar_path(path)) if with_truth else None
    return WalkData.from_imu(log, truth=truth)


def resolve(args):
    """Explicit flags win over --config values, which win over defaults."""
    conf = {}
    if getattr(args, "config", None):
        conf = _load_json(args.config, "config")
        if not isinstance(conf, dict):
            raise CliError(f"{args.config}: config must be a JSON object")
        unknown = sorted(set(conf) - set(OVERRIDABLE))
        if unknown:
            raise CliError(f"{args.config}: unknown key(s) {', '.join(unknown)}")
    for key, default in OVERRIDABLE.items():
        if hasattr(args, key) and getattr(args, key) is None:
            setattr(args, key, conf.get(key, default))
    return args


def detector_config(args):
    try:
        hmm_model = None
        legacy_model = None
        if args.method == "hmm-block":
            hmm_model = (HmmModel.from_json(_read_text(args.model)) if args.model
                         else default_model())
            if args.obs_epsilon is not None:
                hmm_model = hmm_model.with_epsilon(float(args.obs_epsilon))
        model_path = args.legacy_model or (args.model if args.method == "hmm-legacy" else None)
        if model_path:
            legacy_model = LegacyModel.from_json(_read_text(model_path))
        return DetectorConfig(
            ThresholdConfig(float(args.tau), int(args.merge_gap)),
            FilterConfig(),
            hmm_model,
            legacy_model,
            PeltConfig(None if args.beta is None else float(args.beta), int(args.min_segment)),
            ForestConfig(int(args.trees), int(args.subsample), float(args.contamination),
                         int(args.seed)),
        )
    except (KeyError, json.JSONDecodeError) as exc:
        raise CliError(f"malformed model file: {exc}", EXIT_PARSE) from None
    except ValueError as exc:
        raise CliError(str(exc)) from None


# ---- commands ---------------------------------------------------------------


def cmd_synth(args):
    if args.count < 1:
        raise CliError("--count must be >= 1")
    if args.noise < 0:
        raise CliError("--noise must be >= 0")
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise CliError(f"cannot create {out}: {exc.strerror}") from None
    template = CorpusTemplate(yaw_noise_sigma=args.noise)
    walks = generate_corpus(args.count, template, seed=args.seed, with_imu=True)
    width = max(3, len(str(args.count - 1)))
    entries = []
    for k, walk in enumerate(walks):
        name = f"walk_{k:0{width}d}"
        _write(out / f"{name}.csv", write_imu_csv(walk.imu))
        _write(out / f"{name}.truth.json", walk.truth_json())
        entries.append({"walk": f"{name}.csv", "truth": f"{name}.truth.json",
                        "steps": walk.n_steps, "turns": len(walk.truth)})
    manifest = {
        "seed": args.seed,
        "count": args.count,
        "yaw_noise_sigma": args.noise,
        "checksum": corpus_checksum(walks),
        "walks": entries,
    }
    _write(out / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return 0


def cmd_steps(args):
    walk = load_walk(args.input)
    _write(args.out, write_steps_csv(walk.steps))
    return 0


def cmd_detect(args):
    resolve(args)
    cfg = detector_config(args)
    walk = load_walk(args.input)
    events = run_method(args.method, walk, cfg)
    _write(args.out, events_to_json(events))
    return 0


def cmd_train(args):
    resolve(args)
    if args.kind == "forest":
        walks = [load_walk(p) for p in args.walks]
        X = np.vstack([w.features for w in walks])
        try:
            model = fit_iforest(X, int(args.trees), int(args.subsample),
                                float(args.contamination), int(args.seed))
        except ValueError as exc:
            raise CliError(str(exc)) from None
        _write(args.out, model.to_json())
        return 0
    walks = [load_walk(p, with_truth=args.kind == "hmm") for p in args.walks]
    if args.kind == "hmm":
        model = train_block_hmm(walks, alpha=args.alpha)
    else:
        model = train_legacy(walks, cluster_count=args.clusters)
    _write(args.out, model.to_json())
    return 0


def render_svg(steps, events, size=480, margin=20):
    """Trajectory plot: one dot per step, red inside a detected turn, black otherwise."""
    turn = set()
    for e in events:
        turn.update(range(e.first_step, e.last_step + 1))
    xy = np.array([s.pos for s in steps], dtype=np.float64).reshape(-1, 2)
    lo = xy.min(axis=0) if len(xy) else np.zeros(2)
    span = float(np.max(np.ptp(xy, axis=0))) if len(xy) else 0.0
    scale = (size - 2 * margin) / span if span > 0 else 1.0
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for i, (x, y) in enumerate(xy):
        cx = margin + (x - lo[0]) * scale
        cy = size - margin - (y - lo[1]) * scale  # north up
        color = "red" if i in turn else "black"
        lines.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.5" fill="{color}" '
                     f'data-step="{i}"/>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def cmd_eval(args):
    resolve(args)
    if args.tolerance < 0:
        raise CliError("--tolerance must be >= 0")
    if args.truth is None and args.walk is None:
        raise CliError("need --truth or --walk (whose sidecar holds the truth)")
    if args.plot and args.walk is None:
        raise CliError("--plot needs --walk for the trajectory")
    try:
        events = events_from_json(_read_text(args.events))
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{args.events}: malformed events ({exc})", EXIT_PARSE) from None
    truth = load_truth(args.truth or sidecar_path(args.walk))
    method = events[0].method if events else ""
    report = evaluate(events, truth, MatchConfig(int(args.tolerance)), method)
    _write(args.out, reports_to_json([report]))
    if args.csv:
        _write(args.csv, reports_to_csv([report]))
    if args.plot:
        walk = load_walk(args.walk)
        _write(args.plot, render_svg(walk.steps, events))
    return 0


def _load_with_truth(path):
    return load_walk(path, with_truth=True)


def cmd_compare(args):
    resolve(args)
    root = Path(args.corpus)
    manifest_path = root / "manifest.json" if root.is_dir() else root
    manifest = _load_json(manifest_path, "manifest")
    paths = [manifest_path.parent / e["walk"] for e in manifest["walks"]]
    for p in paths:
        if not sidecar_path(p).exists():
            raise CliError(f"missing truth sidecar: {sidecar_path(p)}", EXIT_MISSING)
    args.method = None
    cfg = detector_config(args)
    if args.jobs > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            walks = list(pool.map(_load_with_truth, paths))  # map keeps input order
    else:
        walks = [_load_with_truth(p) for p in paths]
    if cfg.legacy_model is None:
        cfg.legacy_model = train_legacy(walks)
    methods = METHODS
    match_cfg = MatchConfig(int(args.tolerance))
    per_walk = [[match_events(run_method(m, w, cfg), w.truth, match_cfg) for m in methods]
                for w in walks]
    reports = [metrics([w[k] for w in per_walk], m) for k, m in enumerate(methods)]
    sys.stdout.write(format_table(reports) + "\n")
    if args.out:
        _write(args.out, reports_to_json(reports))
    if args.csv:
        _write(args.csv, reports_to_csv(reports))
    return 0


# ---- argument parsing -------------------------------------------------------


def _detector_flags(p):
    g = p.add_argument_group("detector parameters (override --config)")
    g.add_argument("--tau", type=float, help="threshold: yaw change per step, degrees")
    g.add_argument("--merge-gap", type=int, help="threshold-merged: max gap between flags")
    g.add_argument("--model", help="hmm-block: model JSON; hmm-legacy: legacy model JSON")
    g.add_argument("--legacy-model", help="legacy model JSON (compare)")
    g.add_argument("--obs-epsilon", type=float, help="hmm-block observation noise")
    g.add_argument("--beta", type=float, help="PELT penalty (default 2 sigma^2 ln n)")
    g.add_argument("--min-segment", type=int, help="PELT minimum segment length")
    g.add_argument("--contamination", type=float, help="isolation forest outlier fraction")
    g.add_argument("--trees", type=int, help="isolation forest tree count")
    g.add_argument("--subsample", type=int, help="isolation forest subsample size")
    g.add_argument("--seed", type=int, help="isolation forest seed")
    g.add_argument("--config", help="JSON object of the options above")


def build_parser():
    ap = argparse.ArgumentParser(prog="turnkit", description="Turn detection for step-level IMU walks.")
    ap.add_argument("--version", action="version", version=f"turnkit {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic corpus of IMU walks with truth sidecars")
    p.add_argument("--count", type=int, default=100)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--noise", type=float, default=3.0, help="per-step yaw noise sigma, degrees")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("steps", help="detect steps and per-step heading from an IMU CSV")
    p.add_argument("input")
    p.add_argument("--out", help="steps CSV (default stdout)")
    p.set_defaults(func=cmd_steps)

    p = sub.add_parser("detect", help="run one turn detector on an IMU CSV")
    p.add_argument("input")
    p.add_argument("--method", required=True, choices=CLI_METHODS)
    p.add_argument("--out", help="events JSON (default stdout)")
    _detector_flags(p)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("train", help="fit a model from IMU walks")
    p.add_argument("walks", nargs="+")
    p.add_argument("--kind", choices=("hmm", "legacy", "forest"), default="hmm")
    p.add_argument("--alpha", type=float, default=1.0, help="additive smoothing")
    p.add_argument("--clusters", type=int, default=14, help="legacy: retained state values")
    p.add_argument("--contamination", type=float)
    p.add_argument("--trees", type=int)
    p.add_argument("--subsample", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--config")
    p.add_argument("--out", help="model JSON (default stdout)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="score detected events against truth")
    p.add_argument("events", help="events JSON from detect")
    p.add_argument("--truth", help="truth sidecar JSON")
    p.add_argument("--walk", help="IMU CSV; its sidecar is used when --truth is absent")
    p.add_argument("--tolerance", type=int, help="matching tolerance in steps (default 2)")
    p.add_argument("--config")
    p.add_argument("--out", help="report JSON (default stdout)")
    p.add_argument("--csv", help="also write the report as CSV")
    p.add_argument("--plot", help="SVG trajectory with detected turn steps in red")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("compare", help="six-method comparison over a synth corpus")
    p.add_argument("corpus", help="corpus directory or its manifest.json")
    p.add_argument("--tolerance", type=int)
    p.add_argument("--jobs", type=int, default=1, help="worker processes")
    p.add_argument("--out", help="report JSON")
    p.add_argument("--csv", help="report CSV")
    _detector_flags(p)
    p.set_defaults(func=cmd_compare)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"turnkit: {exc}", file=sys.stderr)
        return exc.code
    except (ParseError, SchemaError, InsufficientDataError) as exc:
        print(f"turnkit: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ValueError as exc:
        print(f"turnkit: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
