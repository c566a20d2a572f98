"""Job trace CSV: job_id, submit_time, duration, num_gpus, user_id, group_id."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, List, TextIO, Union

TRACE_FIELDS = ["job_id", "submit_time", "duration", "num_gpus", "user_id", "group_id"]


class TraceFormatError(ValueError):
    pass


@dataclass(frozen=True)
class TraceRow:
    job_id: int
    submit_time: float  # seconds
    duration: float  # seconds
    num_gpus: int
    user_id: int
    group_id: int

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError(f"job {self.job_id}: duration must be > 0")
        if self.num_gpus < 1:
            raise ValueError(f"job {self.job_id}: num_gpus must be >= 1")
        if self.group_id < 0:
            raise ValueError(f"job {self.job_id}: group_id must be >= 0")


def _parse(row, line: int) -> TraceRow:
    try:
        return TraceRow(int(row["job_id"]), float(row["submit_time"]), float(row["duration"]),
                        int(row["num_gpus"]), int(row["user_id"]), int(row["group_id"]))
    except (TypeError, ValueError) as e:
        raise TraceFormatError(f"line {line}: {e}") from None


def read_trace(fh: TextIO) -> List[TraceRow]:
    """Parse a trace and shift submit times so the earliest is 0."""
    reader = csv.DictReader(fh)
    if reader.fieldnames is None:
        raise TraceFormatError("line 1: missing header row")
    missing = [f for f in TRACE_FIELDS if f not in reader.fieldnames]
    if missing:
        raise TraceFormatError(f"line 1: missing columns: {', '.join(missing)}")
    rows = [_parse(r, line) for line, r in enumerate(reader, start=2)]
    if not rows:
        return rows
    t0 = min(r.submit_time for r in rows)
    if t0 != 0:
        rows = [TraceRow(r.job_id, r.submit_time - t0, r.duration, r.num_gpus, r.user_id,
                         r.group_id) for r in rows]
    return rows


def ingest_trace(path: Union[str, Path]) -> List[TraceRow]:
    with open(path, newline="", encoding="utf-8") as fh:
        return read_trace(fh)


def write_trace(rows: Iterable[TraceRow], fh: TextIO) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(TRACE_FIELDS)
    for r in rows:
        w.writerow([r.job_id, repr(r.submit_time), repr(r.duration), r.num_gpus, r.user_id,
                    r.group_id])


def emit_trace(rows: Iterable[TraceRow], path: Union[str, Path]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        write_trace(rows, fh)
