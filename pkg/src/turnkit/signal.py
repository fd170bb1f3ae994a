"""IMU ingestion, step detection, heading and block segmentation."""

import csv
import dataclasses
import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import signal as sps

from .angles import circular_mean, classify_region, unwrap_deg, wrap180
from .errors import InsufficientDataError, OrderingError, ParseError, SchemaError

IMU_COLUMNS = (
    "t",
    "acc_x", "acc_y", "acc_z",
    "grav_x", "grav_y", "grav_z",
    "mag_x", "mag_y", "mag_z",
    "gyr_x", "gyr_y", "gyr_z",
)
STEP_COLUMNS = ("index", "t_start", "t_end", "yaw_deg", "theta_deg", "pos_x", "pos_y")

# channels fed to the isolation forest, in column order
FEATURE_CHANNELS = IMU_COLUMNS[1:10]


class ImuSample(NamedTuple):
    t: float
    acc: tuple
    grav: tuple
    mag: tuple
    gyro: tuple


@dataclass(frozen=True)
class ImuLog:
    """Timestamped 12-channel IMU stream stored column-wise.

    ``acc`` is the raw accelerometer (specific force, gravity included),
    ``grav`` the gravity estimate, ``mag`` in microtesla, ``gyro`` in rad/s.
    """

    t: np.ndarray
    acc: np.ndarray
    grav: np.ndarray
    mag: np.ndarray
    gyro: np.ndarray
    sample_rate_hz: float

    def __post_init__(self):
        if len(self.t) < 2:
            raise InsufficientDataError("an IMU log needs at least 2 samples")
        if np.any(np.diff(self.t) <= 0):
            bad = int(np.argmax(np.diff(self.t) <= 0)) + 2
            raise OrderingError(f"timestamps not strictly increasing at row {bad}")
        if not self.sample_rate_hz > 0:
            raise ValueError("sample_rate_hz must be positive")

    def __len__(self):
        return len(self.t)

    def sample(self, i) -> ImuSample:
        return ImuSample(
            float(self.t[i]),
            tuple(self.acc[i]),
            tuple(self.grav[i]),
            tuple(self.mag[i]),
            tuple(self.gyro[i]),
        )

    @property
    def samples(self):
        return [self.sample(i) for i in range(len(self))]

    @property
    def is_regular(self):
        """True when 99% of sample gaps are within 20% of the nominal period."""
        dt = np.diff(self.t)
        nominal = 1.0 / self.sample_rate_hz
        ok = np.abs(dt - nominal) <= 0.2 * nominal
        return bool(np.mean(ok) >= 0.99)

    @classmethod
    def from_array(cls, data, sample_rate_hz=None):
        data = np.asarray(data, dtype=np.float64)
        t = data[:, 0].copy()
        if sample_rate_hz is None:
            sample_rate_hz = estimate_rate(t)
        return cls(
            t=t,
            acc=data[:, 1:4].copy(),
            grav=data[:, 4:7].copy(),
            mag=data[:, 7:10].copy(),
            gyro=data[:, 10:13].copy(),
            sample_rate_hz=float(sample_rate_hz),
        )

    def to_array(self):
        return np.column_stack([self.t, self.acc, self.grav, self.mag, self.gyro])


def estimate_rate(t):
    dt = np.diff(np.asarray(t, dtype=np.float64))
    if np.any(dt <= 0):
        bad = int(np.argmax(dt <= 0)) + 2
        raise OrderingError(f"timestamps not strictly increasing at row {bad}")
    # rounded so exact-rate logs with float timestamps report the nominal rate
    return round(float(np.median(1.0 / dt)), 6)


def parse_imu_csv(data) -> ImuLog:
    """Parse an IMU CSV (bytes or str) with the fixed 13-column header."""
    if isinstance(data, (bytes, bytearray)):
        try:
            text = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"input is not UTF-8: {exc}") from exc
    else:
        text = data
    lines = text.splitlines()
    if not lines:
        raise SchemaError("empty file", missing=IMU_COLUMNS)
    header = next(csv.reader([lines[0]]))
    header = [h.strip() for h in header]
    if tuple(header) != IMU_COLUMNS:
        missing = [c for c in IMU_COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"missing column(s): {', '.join(missing)}", missing=missing)
        raise SchemaError(f"header must be exactly {','.join(IMU_COLUMNS)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=1):
        if not line.strip():
            raise ParseError(f"blank line at data row {lineno}", row=lineno)
        cells = line.split(",")
        if len(cells) != len(IMU_COLUMNS):
            raise ParseError(
                f"row {lineno}: expected {len(IMU_COLUMNS)} fields, got {len(cells)}", row=lineno
            )
        try:
            values = [float(c) for c in cells]
        except ValueError as exc:
            raise ParseError(f"row {lineno}: {exc}", row=lineno) from exc
        if not all(math.isfinite(v) for v in values):
            raise ParseError(f"row {lineno}: non-finite value", row=lineno)
        rows.append(values)
    if len(rows) < 2:
        raise InsufficientDataError("an IMU log needs at least 2 samples")
    arr = np.asarray(rows, dtype=np.float64)
    if arr[0, 0] < 0:
        raise ParseError("row 1: negative timestamp", row=1)
    return ImuLog.from_array(arr)


def write_imu_csv(log: ImuLog) -> str:
    buf = io.StringIO()
    buf.write(",".join(IMU_COLUMNS) + "\n")
    for row in log.to_array():
        buf.write(",".join(_fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _fmt(v):
    return format(float(v), ".10g")


@dataclass(frozen=True)
class StepRecord:
    index: int
    t_start: float
    t_end: float
    yaw: float
    theta: float = math.nan
    pos: tuple = (0.0, 0.0)


def write_steps_csv(steps) -> str:
    buf = io.StringIO()
    buf.write(",".join(STEP_COLUMNS) + "\n")
    for s in steps:
        vals = [s.t_start, s.t_end, s.yaw, s.theta, s.pos[0], s.pos[1]]
        buf.write(str(s.index) + "," + ",".join(_fmt(v) for v in vals) + "\n")
    return buf.getvalue()


@dataclass(frozen=True)
class StepConfig:
    lowpass_hz: float = 3.0
    filter_order: int = 2
    peak_threshold: float = 1.2  # m/s^2 above the gravity-removed baseline
    min_interval: float = 0.3  # s
    step_length: float = 0.7  # m
    velocity_correction: bool = False  # see direction_angle
    min_speed: float = 0.2  # m/s; below this the per-step velocity direction is ignored


@dataclass(frozen=True)
class FilterConfig:
    order: int = 2
    low_cut: float = 0.02  # cycles/step
    high_cut: float = 0.25
    peak_prominence: float = 10.0  # degrees

    def __post_init__(self):
        if not 0 < self.low_cut < self.high_cut < 0.5:
            raise ValueError("need 0 < low_cut < high_cut < 0.5")
        if self.order not in (2, 4):
            raise ValueError("order must be 2 or 4")


@dataclass(frozen=True)
class BlockRecord:
    first_step: int
    last_step: int
    theta: float = math.nan
    region: int = 0

    @property
    def length(self):
        return self.last_step - self.first_step + 1


def _up_axis(grav):
    norm = np.linalg.norm(grav, axis=1, keepdims=True)
    norm[norm == 0] = 1.0
    return grav / norm


def _lowpass_padlen(sos):
    return 3 * (2 * len(sos) + 1 - min((sos[:, 2] == 0).sum(), (sos[:, 5] == 0).sum()))


def heading_trace(log: ImuLog):
    """Clockwise-positive heading in degrees at every sample, starting at 0.

    Gyro rate is projected on the gravity axis and integrated with the left
    Riemann rule.
    """
    up = _up_axis(log.grav)
    rate = -np.degrees(np.einsum("ij,ij->i", log.gyro, up))
    dt = np.diff(log.t)
    h = np.empty(len(log.t))
    h[0] = 0.0
    np.cumsum(rate[:-1] * dt, out=h[1:])
    return h


def detect_steps(log: ImuLog, cfg: StepConfig = StepConfig()):
    """Heel-strike peaks of low-passed dynamic acceleration, one StepRecord each."""
    fs = log.sample_rate_hz
    sos = sps.butter(cfg.filter_order, cfg.lowpass_hz, btype="low", fs=fs, output="sos")
    padlen = _lowpass_padlen(sos)
    if len(log) <= max(padlen, int(math.ceil(fs / cfg.lowpass_hz))):
        raise InsufficientDataError(
            f"log of {len(log)} samples is shorter than the filter settling window"
        )
    dyn = np.linalg.norm(log.acc, axis=1) - np.linalg.norm(log.grav, axis=1)
    smooth = sps.sosfiltfilt(sos, dyn)
    distance = max(1, int(round(cfg.min_interval * fs)))
    peaks, _ = sps.find_peaks(smooth, height=cfg.peak_threshold, distance=distance)
    if len(peaks) == 0:
        return []

    tp = log.t[peaks]
    if len(tp) == 1:
        half = np.array([cfg.min_interval, cfg.min_interval])
        starts = np.array([tp[0] - half[0]])
        ends = np.array([tp[0] + half[1]])
    else:
        mids = 0.5 * (tp[:-1] + tp[1:])
        starts = np.concatenate([[tp[0] - (tp[1] - tp[0]) / 2], mids])
        ends = np.concatenate([mids, [tp[-1] + (tp[-1] - tp[-2]) / 2]])
    starts = np.maximum(starts, log.t[0])
    ends = np.minimum(ends, log.t[-1])

    heading = heading_trace(log)
    yaw = wrap180(np.interp(ends, log.t, heading))
    yaw = np.atleast_1d(yaw)

    steps = []
    x = y = 0.0
    for k in range(len(tp)):
        r = math.radians(yaw[k])
        x += cfg.step_length * math.sin(r)
        y += cfg.step_length * math.cos(r)
        steps.append(StepRecord(k, float(starts[k]), float(ends[k]), float(yaw[k]), pos=(x, y)))
    return steps


def _window_masks(steps, log):
    for s in steps:
        yield (log.t >= s.t_start) & (log.t < s.t_end)


def velocity_offsets(steps, log: ImuLog, cfg: StepConfig = StepConfig()):
    """Per-step signed angle (deg, clockwise) from the device forward axis to
    the horizontal velocity change over the step; 0 when too small to trust."""
    up = _up_axis(log.grav)
    lin = log.acc - log.grav
    lin_h = lin - np.einsum("ij,ij->i", lin, up)[:, None] * up
    dt = np.empty(len(log.t))
    dt[:-1] = np.diff(log.t)
    dt[-1] = dt[-2]
    out = np.zeros(len(steps))
    forward = np.array([0.0, 1.0, 0.0])
    for k, mask in enumerate(_window_masks(steps, log)):
        if not mask.any():
            continue
        v = (lin_h[mask] * dt[mask, None]).sum(axis=0)
        u = up[mask].mean(axis=0)
        u /= np.linalg.norm(u)
        f = forward - forward.dot(u) * u
        fn = np.linalg.norm(f)
        if fn < 1e-6 or np.linalg.norm(v) < cfg.min_speed:
            continue
        f /= fn
        right = np.cross(f, u)
        out[k] = math.degrees(math.atan2(v.dot(right), v.dot(f)))
    return out


def step_features(steps, log: ImuLog):
    """Window means of the nine acc/grav/mag channels, one row per step."""
    data = np.column_stack([log.acc, log.grav, log.mag])
    feats = np.zeros((len(steps), 9))
    for k, mask in enumerate(_window_masks(steps, log)):
        if mask.any():
            feats[k] = data[mask].mean(axis=0)
        else:
            feats[k] = data[int(np.searchsorted(log.t, steps[k].t_start)) - 1]
    return feats


def min_filter_length(cfg: FilterConfig = FilterConfig()):
    return 3 * cfg.order


def bandpass_yaw(yaw, cfg: FilterConfig = FilterConfig()):
    """Zero-phase Butterworth bandpass of a step-indexed series.

    Frequencies are in cycles/step. The caller is responsible for unwrapping
    angles; the filter itself is linear.
    """
    x = np.asarray(yaw, dtype=np.float64)
    if len(x) < min_filter_length(cfg):
        raise InsufficientDataError(
            f"bandpass needs at least {min_filter_length(cfg)} steps, got {len(x)}"
        )
    sos = sps.butter(cfg.order, [cfg.low_cut, cfg.high_cut], btype="band", fs=1.0, output="sos")
    padlen = min(_lowpass_padlen(sos), len(x) - 1)
    return sps.sosfiltfilt(sos, x, padlen=padlen)


def segment_blocks(filtered, cfg: FilterConfig = FilterConfig(), theta=None):
    """Split steps into blocks ending at prominent peaks of |filtered|.

    With ``theta`` given, each block gets the circular mean direction angle of
    its steps and the corresponding region.
    """
    f = np.abs(np.asarray(filtered, dtype=np.float64))
    n = len(f)
    if n == 0:
        return []
    peaks, _ = sps.find_peaks(f, prominence=cfg.peak_prominence)
    bounds = [int(p) for p in peaks if p < n - 1]
    blocks = []
    start = 0
    for p in bounds + [n - 1]:
        blocks.append(BlockRecord(start, p))
        start = p + 1
    if theta is not None:
        blocks = _annotate(blocks, theta)
    return blocks


def _annotate(blocks, theta):
    theta = np.asarray(theta, dtype=np.float64)
    out = []
    for b in blocks:
        m = circular_mean(theta[b.first_step : b.last_step + 1])
        out.append(dataclasses.replace(b, theta=m, region=classify_region(m)))
    return out


def block_spans(yaw, cfg: FilterConfig = FilterConfig(), annotate=False):
    """Blocks of a wrapped per-step angle series (a single block when the
    series is too short to filter)."""
    yaw = np.asarray(yaw, dtype=np.float64)
    theta = yaw if annotate else None
    if len(yaw) < min_filter_length(cfg):
        blocks = [BlockRecord(0, len(yaw) - 1)] if len(yaw) else []
        return _annotate(blocks, yaw) if annotate else blocks
    return segment_blocks(bandpass_yaw(unwrap_deg(yaw), cfg), cfg, theta=theta)


def relative_heading(yaw, cfg: FilterConfig = FilterConfig()):
    """Heading relative to the circular mean of the first block, in [-180, 180)."""
    yaw = np.asarray(yaw, dtype=np.float64)
    if len(yaw) == 0:
        return yaw.copy()
    first = block_spans(yaw, cfg)[0]
    base = circular_mean(yaw[first.first_step : first.last_step + 1])
    return np.atleast_1d(wrap180(yaw - base))


def direction_angle(steps, log: ImuLog = None, cfg: FilterConfig = FilterConfig(),
                    step_cfg: StepConfig = StepConfig()):
    """Fill ``theta`` on each step.

    Heading is referenced to the first block. With a raw log and
    ``step_cfg.velocity_correction`` set, the velocity-vs-orientation offset is
    added first; it is off by default because a per-step velocity change is
    dominated by accelerometer bias unless the device is well calibrated.
    """
    if not steps:
        raise InsufficientDataError("direction_angle needs at least one step")
    yaw = np.array([s.yaw for s in steps], dtype=np.float64)
    heading = yaw
    if log is not None and step_cfg.velocity_correction:
        heading = yaw + velocity_offsets(steps, log, step_cfg)
    theta = relative_heading(heading, cfg)
    return [dataclasses.replace(s, theta=float(th)) for s, th in zip(steps, theta)]


def blocks_for_walk(theta, cfg: FilterConfig = FilterConfig()):
    """Blocks with direction angle and region filled in."""
    return block_spans(theta, cfg, annotate=True)
