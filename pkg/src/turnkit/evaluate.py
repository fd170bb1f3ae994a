"""Event-to-truth matching and missed-detection / false-alarm / overlap metrics."""

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction

REPORT_COLUMNS = (
    "method", "true_turns", "detections", "matched", "missed",
    "false_alarms", "overlaps", "missed_rate", "false_alarm_rate",
)


@dataclass(frozen=True)
class MatchConfig:
    tolerance: int = 2  # steps each span is dilated by before testing intersection

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be >= 0")


@dataclass
class Matching:
    """Outcome of matching one walk (or a pooled corpus)."""

    n_truth: int
    n_detected: int
    pairs: list = field(default_factory=list)  # (detection index, truth index)
    overlaps: list = field(default_factory=list)  # detection indices
    false_alarms: list = field(default_factory=list)  # detection indices

    @property
    def matched_truth(self):
        return sorted(t for _, t in self.pairs)

    @property
    def missed_truth(self):
        hit = {t for _, t in self.pairs}
        return [t for t in range(self.n_truth) if t not in hit]


def _span(x):
    if hasattr(x, "first_step"):
        return int(x.first_step), int(x.last_step)
    a, b = x
    return int(a), int(b)


def match_events(detected, truth, cfg: MatchConfig = MatchConfig()) -> Matching:
    """Greedy one-to-one matching by increasing gap between spans.

    A detection and a truth interval can match when their spans, each dilated
    by ``cfg.tolerance``, intersect. Ties go to the earlier detection. A
    detection that could only match already-taken truths is an overlap; one
    with no candidate at all is a false alarm.
    """
    det = [_span(d) for d in detected]
    tru = [_span(t) for t in truth]
    tol = cfg.tolerance
    edges = []
    for i, (d0, d1) in enumerate(det):
        for j, (t0, t1) in enumerate(tru):
            if d0 - tol <= t1 + tol and t0 - tol <= d1 + tol:
                gap = max(0, t0 - d1, d0 - t1)
                edges.append((gap, i, j))
    edges.sort()
    used_d = set()
    used_t = set()
    pairs = []
    has_edge = set()
    for gap, i, j in edges:
        has_edge.add(i)
        if i in used_d or j in used_t:
            continue
        used_d.add(i)
        used_t.add(j)
        pairs.append((i, j))
    pairs.sort()
    overlaps = [i for i in range(len(det)) if i not in used_d and i in has_edge]
    false_alarms = [i for i in range(len(det)) if i not in has_edge]
    return Matching(len(tru), len(det), pairs, overlaps, false_alarms)


@dataclass
class EvalReport:
    true_turns: int
    detections: int
    matched: int
    missed: int
    false_alarms: int
    overlaps: int
    missed_rate: float
    false_alarm_rate: float
    method: str = ""
    no_truth: bool = False

    def row(self):
        d = asdict(self)
        return [d[c] for c in REPORT_COLUMNS]


def metrics(matching, method="") -> EvalReport:
    """Rates from a matching (or a list of matchings, pooled by counts)."""
    if isinstance(matching, Matching):
        matching = [matching]
    true_turns = sum(m.n_truth for m in matching)
    detections = sum(m.n_detected for m in matching)
    matched = sum(len(m.pairs) for m in matching)
    overlaps = sum(len(m.overlaps) for m in matching)
    false_alarms = sum(len(m.false_alarms) for m in matching)
    missed = true_turns - matched
    missed_rate = Fraction(missed, true_turns) if true_turns else Fraction(0)
    fa_rate = Fraction(false_alarms, detections) if detections else Fraction(0)
    return EvalReport(
        true_turns, detections, matched, missed, false_alarms, overlaps,
        float(missed_rate), float(fa_rate), method, no_truth=true_turns == 0,
    )


def evaluate(detected, truth, cfg: MatchConfig = MatchConfig(), method=""):
    return metrics(match_events(detected, truth, cfg), method)


def reports_to_json(reports):
    return json.dumps([asdict(r) for r in reports], indent=2) + "\n"


def reports_to_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in reports:
        row = r.row()
        row[7] = f"{row[7]:.6f}"
        row[8] = f"{row[8]:.6f}"
        w.writerow(row)
    return buf.getvalue()


def format_table(reports):
    lines = [f"{'method':<18}{'turns':>7}{'dets':>7}{'missed':>8}{'FA':>6}{'ovl':>6}"
             f"{'missed%':>9}{'FA%':>8}"]
    for r in reports:
        lines.append(
            f"{r.method:<18}{r.true_turns:>7}{r.detections:>7}{r.missed:>8}{r.false_alarms:>6}"
            f"{r.overlaps:>6}{100 * r.missed_rate:>9.2f}{100 * r.false_alarm_rate:>8.2f}"
        )
    return "\n".join(lines)
