"""Deterministic result emission: CSV series, gain-map files, run manifests.

All numeric formatting is fixed so that identical results produce
byte-identical files regardless of worker count.
"""

from __future__ import annotations

import json
import struct
import sys
import time
from pathlib import Path

import numpy as np

from .config import ScenarioConfig
from .metrics import MetricSeries, GainMap

__all__ = [
    "fmt",
    "write_csv",
    "write_series",
    "write_gainmap_csv",
    "write_gainmap_binary",
    "read_gainmap_binary",
    "write_manifest",
]

_GAINMAP_MAGIC = b"GMAP"
# Binary gain-map layout: magic, uint32 resolution-u, uint32 resolution-v,
# float64 u-extent, float64 v-extent, then row-major (u-major) float64 gains
# with NaN outside the unit disk. Little-endian throughout.
_GAINMAP_HEADER = struct.Struct("<4sIIdd")


def fmt(value) -> str:
    """Stable scalar formatting for CSV output."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if np.isnan(v):
        return "nan"
    return format(v, ".10g")


def write_csv(path: Path, columns: list[str], rows) -> None:
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_series(path: Path, series: MetricSeries) -> None:
    """Binned metric series with the standard column set."""
    write_csv(
        path,
        ["bin_center_uv", "median_db", "p001_db", "p999_db", "min_db", "max_db", "mean_db", "n"],
        (
            (
                series.bin_centers[i],
                series.median[i],
                series.p001[i],
                series.p999[i],
                series.minimum[i],
                series.maximum[i],
                series.mean[i],
                series.count[i],
            )
            for i in range(series.bin_centers.size)
        ),
    )


def write_gainmap_csv(path: Path, gmap: GainMap) -> None:
    """Grid CSV: one row per u index, NaN outside the unit disk."""
    vals = np.where(gmap.valid, gmap.values, np.nan)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write("# rows: u index, cols: v index, extent [-1,1]^2, linear gain\n")
        for row in vals:
            fh.write(",".join(fmt(v) for v in row) + "\n")


def write_gainmap_binary(path: Path, gmap: GainMap) -> None:
    vals = np.where(gmap.valid, gmap.values, np.nan).astype("<f8")
    with path.open("wb") as fh:
        fh.write(_GAINMAP_HEADER.pack(_GAINMAP_MAGIC, gmap.resolution, gmap.resolution, 1.0, 1.0))
        fh.write(vals.tobytes(order="C"))


def read_gainmap_binary(path: Path) -> GainMap:
    raw = Path(path).read_bytes()
    magic, nu, nv, ue, ve = _GAINMAP_HEADER.unpack_from(raw)
    if magic != _GAINMAP_MAGIC:
        raise ValueError(f"{path}: not a gain-map file")
    vals = np.frombuffer(raw, dtype="<f8", offset=_GAINMAP_HEADER.size).reshape(nu, nv).copy()
    valid = ~np.isnan(vals)
    vals[~valid] = 0.0
    return GainMap(resolution=int(nu), values=vals, valid=valid)


def write_manifest(out_dir: Path, config: ScenarioConfig, wall_seconds: float, **extra) -> None:
    """Run manifest plus an echo of the fully-resolved configuration."""
    import covrage
    import scipy

    (out_dir / "resolved-config.txt").write_text(config.to_text(), encoding="utf-8")
    doc = {
        "config_sha256": config.digest(),
        "seed": config.seed,
        "versions": {
            "covrage": covrage.__version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": sys.version.split()[0],
        },
        "wall_seconds": round(wall_seconds, 3),
        "finished_utc": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()),
    }
    doc.update(extra)
    (out_dir / "manifest.json").write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
