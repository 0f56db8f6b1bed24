"""Scenario configuration: flat key=value text files, presets, validation.

Every experiment is fully described by a ScenarioConfig; the resolved
configuration round-trips losslessly through its text form and is echoed into
every output directory. Unknown keys are rejected.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .rotations import UnitQuaternion

__all__ = ["ScenarioConfig", "ConfigError", "PRESETS", "SPEED_OF_LIGHT"]

SPEED_OF_LIGHT = 299_792_458.0


class ConfigError(ValueError):
    """Invalid scenario configuration."""


@dataclass(frozen=True)
class ScenarioConfig:
    """Complete description of one simulation run.

    Defaults reproduce the 120 GHz multi-block setup: a 64x64 quarter-wavelength
    array in four blocks of four interleaved sub-arrays.
    """

    # array
    n_side: int = 64
    spacing_wavelengths: float = 0.25
    frequency_ghz: float = 120.0
    # partition
    blocks_per_side: int = 2
    interleave: int = 2
    # beam synthesis
    beam_types: tuple[str, ...] = ("tight", "loose")
    sample_spacing: float = 0.002
    bits: int = 0  # 0 = continuous phases
    # channel
    paths: int = 1
    k_factors_db: tuple[float, ...] = (25.0,)
    draws: int = 250
    # trajectories
    count: int = 5000
    angle_min_deg: float = 20.0
    angle_max_deg: float = 180.0
    ap_azimuth_deg: float = 0.0
    ap_elevation_deg: float = 0.0
    q_start: tuple[float, float, float, float] | None = None
    q_end: tuple[float, float, float, float] | None = None
    trace_file: str | None = None
    # evaluation
    shifts: tuple[float, ...] = (0.025, 0.05, 0.075)
    map_resolution: int = 512
    quantize_bits: tuple[int, ...] = (2, 4, 6, 8)
    gain_filter_db: float = 10.0
    windows_ms: tuple[float, ...] = (100.0, 200.0, 500.0, 1000.0)
    # execution
    seed: int = 1

    def __post_init__(self):
        if self.n_side < 1:
            raise ConfigError("n_side must be >= 1")
        if self.spacing_wavelengths <= 0 or self.frequency_ghz <= 0:
            raise ConfigError("spacing_wavelengths and frequency_ghz must be positive")
        if self.n_side % (self.blocks_per_side * self.interleave):
            raise ConfigError("n_side must divide into blocks_per_side * interleave")
        for b in self.beam_types:
            if b not in ("tight", "loose"):
                raise ConfigError(f"unknown beam type {b!r}")
        if not self.beam_types:
            raise ConfigError("at least one beam type required")
        if self.sample_spacing <= 0:
            raise ConfigError("sample_spacing must be positive")
        if self.bits < 0:
            raise ConfigError("bits must be >= 0")
        if self.paths < 1:
            raise ConfigError("paths must be >= 1")
        if self.draws < 1:
            raise ConfigError("draws must be >= 1")
        if self.count < 1:
            raise ConfigError("count must be >= 1")
        if not (0.0 <= self.angle_min_deg < self.angle_max_deg <= 180.0):
            raise ConfigError("need 0 <= angle_min_deg < angle_max_deg <= 180")
        if self.map_resolution < 16:
            raise ConfigError("map_resolution must be >= 16")
        if any(b < 1 for b in self.quantize_bits):
            raise ConfigError("quantize_bits entries must be >= 1")
        if any(s <= 0 for s in self.shifts):
            raise ConfigError("shifts must be positive")
        if (self.q_start is None) != (self.q_end is None):
            raise ConfigError("q_start and q_end must be given together")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / (self.frequency_ghz * 1e9)

    @property
    def spacing(self) -> float:
        return self.spacing_wavelengths * self.wavelength

    def endpoints(self) -> tuple[UnitQuaternion, UnitQuaternion] | None:
        if self.q_start is None:
            return None
        return UnitQuaternion(*self.q_start), UnitQuaternion(*self.q_end)

    def to_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_format_value(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    @staticmethod
    def from_text(text: str, base: "ScenarioConfig | None" = None) -> "ScenarioConfig":
        cfg = base or ScenarioConfig()
        overrides = {}
        types = {f.name: f for f in fields(ScenarioConfig)}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected 'key = value'")
            key, value = (part.strip() for part in line.split("=", 1))
            if key == "preset":
                if value not in PRESETS:
                    raise ConfigError(f"line {lineno}: unknown preset {value!r}")
                cfg = PRESETS[value]
                continue
            if key not in types:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            try:
                overrides[key] = _parse_value(key, value)
            except (ValueError, TypeError) as exc:
                raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
        return replace(cfg, **overrides)

    @staticmethod
    def from_file(path: str | Path, base: "ScenarioConfig | None" = None) -> "ScenarioConfig":
        return ScenarioConfig.from_text(Path(path).read_text(encoding="utf-8"), base)


_INT_KEYS = {"n_side", "blocks_per_side", "interleave", "bits", "paths", "draws",
             "count", "map_resolution", "seed"}
_FLOAT_KEYS = {"spacing_wavelengths", "frequency_ghz", "sample_spacing",
               "angle_min_deg", "angle_max_deg", "ap_azimuth_deg",
               "ap_elevation_deg", "gain_filter_db"}
_FLOAT_TUPLE_KEYS = {"k_factors_db", "shifts", "windows_ms"}
_INT_TUPLE_KEYS = {"quantize_bits"}
_QUAT_KEYS = {"q_start", "q_end"}


def _parse_value(key: str, value: str):
    if value == "none":
        return None
    if key in _INT_KEYS:
        return int(value)
    if key in _FLOAT_KEYS:
        return float(value)
    if key in _FLOAT_TUPLE_KEYS:
        return tuple(float(v) for v in value.split(",") if v.strip())
    if key in _INT_TUPLE_KEYS:
        return tuple(int(v) for v in value.split(",") if v.strip())
    if key in _QUAT_KEYS:
        parts = tuple(float(v) for v in value.split(","))
        if len(parts) != 4:
            raise ValueError("quaternion needs 4 components w,x,y,z")
        return parts
    if key == "beam_types":
        return tuple(v.strip() for v in value.split(",") if v.strip())
    if key == "trace_file":
        return value
    raise ValueError(f"unhandled key {key}")


def _format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ",".join(_format_value(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


PRESETS = {
    # 64x64 quarter-wavelength array at 120 GHz: 2x2 blocks of 4 interleaved
    # half-wavelength sub-arrays (16 sub-beams before transitionals).
    "paper-120ghz": ScenarioConfig(),
    # 32x32 half-wavelength array at 60 GHz: one block of 4 interleaved
    # sub-arrays.
    "paper-60ghz": ScenarioConfig(
        n_side=32,
        spacing_wavelengths=0.5,
        frequency_ghz=60.0,
        blocks_per_side=1,
        interleave=2,
    ),
}
