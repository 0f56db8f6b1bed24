"""Reading recorded head-motion traces.

Traces are UTF-8 CSV files with header ``timestamp_ns,qw,qx,qy,qz`` and one
orientation sample per line.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .rotations import UnitQuaternion

__all__ = ["MotionTrace", "read_trace", "TraceFormatError"]

TRACE_HEADER = ["timestamp_ns", "qw", "qx", "qy", "qz"]


class TraceFormatError(ValueError):
    """Malformed trace file; the message carries the offending line number."""


@dataclass(frozen=True, eq=False)
class MotionTrace:
    timestamps_ns: np.ndarray
    quaternions: tuple[UnitQuaternion, ...]
    renormalized_rows: tuple[int, ...]  # 1-based line numbers that needed fixing

    @property
    def n_samples(self) -> int:
        return self.timestamps_ns.size

    @property
    def duration_s(self) -> float:
        return float(self.timestamps_ns[-1] - self.timestamps_ns[0]) * 1e-9


def read_trace(path: str | Path) -> MotionTrace:
    """Parse a trace CSV; non-unit quaternions are renormalized and reported."""
    path = Path(path)
    timestamps: list[int] = []
    quats: list[UnitQuaternion] = []
    renormalized: list[int] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceFormatError(f"{path}: empty trace file") from None
        if [h.strip() for h in header] != TRACE_HEADER:
            raise TraceFormatError(
                f"{path}:1: expected header {','.join(TRACE_HEADER)}, got {','.join(header)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 5:
                raise TraceFormatError(f"{path}:{lineno}: expected 5 fields, got {len(row)}")
            try:
                ts = int(row[0])
                w, x, y, z = (float(c) for c in row[1:])
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            norm = math.sqrt(w * w + x * x + y * y + z * z)
            if abs(norm - 1.0) > 1e-6:
                renormalized.append(lineno)
            try:
                quats.append(UnitQuaternion(w, x, y, z))
            except ValueError as exc:
                raise TraceFormatError(f"{path}:{lineno}: {exc}") from None
            timestamps.append(ts)
    if not timestamps:
        raise TraceFormatError(f"{path}: trace contains no samples")
    ts_arr = np.asarray(timestamps, dtype=np.int64)
    if not np.all(np.diff(ts_arr) > 0):
        bad = int(np.argmin(np.diff(ts_arr) > 0)) + 3  # header + 1-based + next row
        raise TraceFormatError(f"{path}:{bad}: timestamps must be strictly increasing")
    return MotionTrace(ts_arr, tuple(quats), tuple(renormalized))
