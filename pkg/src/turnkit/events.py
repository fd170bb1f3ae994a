"""Detected turn events and their JSON form."""

import json
from dataclasses import asdict, dataclass

METHODS = ("threshold", "threshold_merged", "hmm_legacy", "hmm_block", "pelt", "pelt_if")


@dataclass(frozen=True)
class TurnEvent:
    first_step: int
    last_step: int
    method: str
    score: float = 1.0

    def __post_init__(self):
        if self.first_step > self.last_step:
            raise ValueError(f"empty span [{self.first_step}, {self.last_step}]")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")

    @property
    def span(self):
        return (self.first_step, self.last_step)


def events_to_json(events) -> str:
    return json.dumps([asdict(e) for e in events], indent=2) + "\n"


def events_from_json(text):
    return [
        TurnEvent(int(d["first_step"]), int(d["last_step"]), d["method"], float(d["score"]))
        for d in json.loads(text)
    ]
