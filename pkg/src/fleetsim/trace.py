"""Run traces: line-delimited JSON with stable float formatting.

The first line is the header record; every following line is one event.
Floats serialize with 9 significant digits and key order is fixed by record
construction, so identical runs produce byte-identical files.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

# record types
HEADER = "header"
STATE = "state"
CONTROL = "control"
CLUSTERS = "clusters"
QP = "qp"
PLAN = "plan"
QUEUE = "queue"
TASK = "task"
ARRIVAL = "arrival"
FAULT = "fault"
END = "end"


class TraceError(ValueError):
    """Malformed trace file."""


def _fmt(value) -> str:
    if value is None:
        return "null"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"non-finite value in trace record: {value}")
        if value == 0.0:
            return "0"
        return format(value, ".9g")
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ",".join(_fmt(v) for v in value) + "]"
    if isinstance(value, dict):
        parts = (f"{json.dumps(str(k))}:{_fmt(v)}" for k, v in value.items())
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(value).__name__} in trace record")


def dumps_record(record: dict) -> str:
    """Serialize one record to its canonical single-line form."""
    return _fmt(record)


@dataclass
class Trace:
    header: dict
    events: list[dict] = field(default_factory=list)

    def of_type(self, kind: str) -> Iterator[dict]:
        return (e for e in self.events if e.get("type") == kind)

    @property
    def duration(self) -> float:
        return float(self.header.get("duration", 0.0))


def write_trace(path: str | Path, trace: Trace) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_record(trace.header) + "\n")
        for event in trace.events:
            fh.write(dumps_record(event) + "\n")


def read_trace(path: str | Path) -> Trace:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise TraceError(f"{path}: empty trace file")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceError(f"{path}: line 1: {exc}") from None
    if header.get("type") != HEADER:
        raise TraceError(f"{path}: first record is not a header")
    events = []
    for n, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        try:
            events.append(json.loads(line))
        except json.JSONDecodeError as exc:
            raise TraceError(f"{path}: line {n}: {exc}") from None
    return Trace(header, events)
