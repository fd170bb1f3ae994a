"""Synthetic walks with known turn intervals.

Per-step yaw ramps linearly through each turn and stays flat (plus noise) on
straight runs. Optionally a 100 Hz raw IMU log is rendered from the same walk
so the full signal chain can be exercised against ground truth.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .angles import unwrap_deg, wrap180
from .signal import ImuLog

GRAVITY = 9.81
BASELINE_FEATURES = np.array([0.0, 0.0, GRAVITY, 0.0, 0.0, GRAVITY, 0.0, 22.0, -40.0])
FEATURE_NOISE = np.array([0.15, 0.15, 0.15, 0.05, 0.05, 0.05, 1.0, 1.0, 1.0])
TURN_ANGLES = (45.0, -45.0, 90.0, -90.0, 135.0, -135.0, 180.0)


@dataclass(frozen=True)
class WalkSpec:
    """``segments`` holds (straight_steps, turn_angle_deg, turn_steps) triples."""

    segments: tuple
    yaw_noise_sigma: float = 0.0
    feature_shift: tuple = (0.0,) * 9
    seed: int = 0
    feature_noise: tuple = tuple(FEATURE_NOISE)

    def __post_init__(self):
        for straight, _, turn_steps in self.segments:
            if straight < 1 or turn_steps < 1:
                raise ValueError("straight_steps and turn_steps must be >= 1")
        if self.yaw_noise_sigma < 0:
            raise ValueError("yaw_noise_sigma must be >= 0")
        if len(self.feature_shift) != 9:
            raise ValueError("feature_shift must have 9 entries")


@dataclass
class SynthWalk:
    yaw: np.ndarray
    features: np.ndarray
    truth: list
    spec: WalkSpec = None
    imu: ImuLog = None
    clean_yaw: np.ndarray = field(default=None, repr=False)

    @property
    def n_steps(self):
        return len(self.yaw)

    def truth_json(self):
        return json.dumps({"turns": [list(t) for t in self.truth]}) + "\n"


def generate_walk(spec: WalkSpec, with_imu=False, sample_rate_hz=100.0) -> SynthWalk:
    heading = 0.0
    clean = []
    truth = []
    is_turn = []
    for straight, angle, turn_steps in spec.segments:
        clean.extend([heading] * straight)
        is_turn.extend([False] * straight)
        start = len(clean)
        for k in range(1, turn_steps + 1):
            clean.append(heading + angle * k / turn_steps)
        heading += angle
        is_turn.extend([angle != 0] * turn_steps)
        if angle != 0:
            truth.append((start, len(clean) - 1))
    clean = np.asarray(clean, dtype=np.float64)
    n = len(clean)
    rng = np.random.default_rng(spec.seed)
    yaw_noise = rng.normal(0.0, 1.0, n) * spec.yaw_noise_sigma
    feat_noise = rng.normal(0.0, 1.0, (n, 9)) * np.asarray(spec.feature_noise)
    yaw = np.atleast_1d(wrap180(clean + yaw_noise))
    features = BASELINE_FEATURES + feat_noise
    features[np.asarray(is_turn)] += np.asarray(spec.feature_shift, dtype=np.float64)
    walk = SynthWalk(yaw, features, truth, spec, clean_yaw=clean)
    if with_imu:
        walk.imu = render_imu(walk, sample_rate_hz)
    return walk


def render_imu(walk: SynthWalk, sample_rate_hz=100.0, step_period=0.5, lead=0.25,
               spike_height=4.0, spike_width=0.04) -> ImuLog:
    """Raw 12-channel log for a walk: phone flat, one vertical accel spike per
    step, gyro z carrying each step's yaw change spread over the step window."""
    n = walk.n_steps
    fs = float(sample_rate_hz)
    per_step = int(round(step_period * fs))
    lead_n = int(round(lead * fs))
    total = lead_n + n * per_step + lead_n
    t = np.arange(total) / fs
    yaw_u = unwrap_deg(walk.yaw)
    delta = np.diff(np.concatenate([[0.0], yaw_u]))

    rate = np.zeros(total)  # clockwise heading rate, deg/s
    heading = np.zeros(total)
    step_of = np.full(total, -1)
    for k in range(n):
        a = lead_n + k * per_step
        b = a + per_step
        rate[a:b] = delta[k] / step_period
        step_of[a:b] = k
    heading[1:] = np.cumsum(rate[:-1] / fs)

    grav = np.tile([0.0, 0.0, GRAVITY], (total, 1))
    acc = grav.copy()
    peaks = lead + (np.arange(n) + 0.5) * step_period
    for tp in peaks:
        lo = int(max(0, (tp - 5 * spike_width) * fs))
        hi = int(min(total, (tp + 5 * spike_width) * fs + 1))
        acc[lo:hi, 2] += spike_height * np.exp(-0.5 * ((t[lo:hi] - tp) / spike_width) ** 2)

    h = np.radians(heading)
    bh = math.hypot(BASELINE_FEATURES[6], BASELINE_FEATURES[7])
    mag = np.column_stack([-bh * np.sin(h), bh * np.cos(h), np.full(total, BASELINE_FEATURES[8])])

    inside = step_of >= 0
    offsets = walk.features - BASELINE_FEATURES
    acc[inside] += offsets[step_of[inside], 0:3]
    mag[inside] += offsets[step_of[inside], 6:9]

    gyro = np.zeros((total, 3))
    gyro[:, 2] = -np.radians(rate)
    return ImuLog(t=t, acc=acc, grav=grav, mag=mag, gyro=gyro, sample_rate_hz=fs)


@dataclass(frozen=True)
class CorpusTemplate:
    turns: tuple = (2, 6)  # inclusive range of turns per walk
    straight_steps: tuple = (5, 30)
    turn_steps: tuple = (1, 8)
    angles: tuple = TURN_ANGLES
    yaw_noise_sigma: float = 3.0
    feature_shift: tuple = (0.8, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)


def corpus_specs(count, template: CorpusTemplate = CorpusTemplate(), seed=42):
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = np.random.default_rng(seed)
    specs = []
    for _ in range(count):
        n_turns = int(rng.integers(template.turns[0], template.turns[1] + 1))
        segments = []
        for _ in range(n_turns):
            straight = int(rng.integers(template.straight_steps[0], template.straight_steps[1] + 1))
            angle = float(template.angles[int(rng.integers(len(template.angles)))])
            turn_steps = int(rng.integers(template.turn_steps[0], template.turn_steps[1] + 1))
            segments.append((straight, angle, turn_steps))
        tail = int(rng.integers(template.straight_steps[0], template.straight_steps[1] + 1))
        segments.append((tail, 0.0, 1))
        specs.append(
            WalkSpec(
                tuple(segments),
                yaw_noise_sigma=template.yaw_noise_sigma,
                feature_shift=template.feature_shift,
                seed=int(rng.integers(2**31)),
            )
        )
    return specs


def generate_corpus(count, template: CorpusTemplate = CorpusTemplate(), seed=42, with_imu=False):
    return [generate_walk(s, with_imu=with_imu) for s in corpus_specs(count, template, seed)]


def corpus_checksum(walks):
    h = hashlib.sha256()
    for w in walks:
        h.update(np.ascontiguousarray(w.yaw, dtype="<f8").tobytes())
        h.update(np.ascontiguousarray(w.features, dtype="<f8").tobytes())
        h.update(json.dumps(w.truth).encode())
    return h.hexdigest()
