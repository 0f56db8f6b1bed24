"""Gain maps, coverage metrics, smoothing, and sliding-window motion statistics.

Gain maps sample the line-of-sight gain on a uniform grid over the uv square;
cells outside the unit disk are marked invalid and excluded from integrals,
which use uniform cell-area weighting. Distances from a direction to a
trajectory are great-circle angles to the dense sample polyline (numerically
equal to uv distance away from the hemisphere edge).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .arrays import WeightVector
from .core import TrajectoryPlan, _single_sample_plan, _rebalance
from .channel import uv_gain

__all__ = [
    "GainMap",
    "MetricSeries",
    "gain_map",
    "concentration_from_map",
    "gain_concentration",
    "isotropic_concentration",
    "shift_trajectory",
    "trajectory_gain_profile",
    "gain_variation",
    "savgol_smooth",
    "bin_series",
    "nearest_rank_percentile",
    "sliding_motion_stats",
    "MotionWindowStats",
    "DEFAULT_MAP_RESOLUTION",
    "PROFILE_GRANULARITY",
    "BIN_WIDTH",
]

DEFAULT_MAP_RESOLUTION = 512
PROFILE_GRANULARITY = 0.004  # uv step between gain evaluations along a path
BIN_WIDTH = 0.004  # uv width of trajectory-length bins


@dataclass(frozen=True, eq=False)
class GainMap:
    """Linear gain on a uniform grid over [-1, 1]^2; entries outside the unit
    disk are invalid."""

    resolution: int
    values: np.ndarray  # (resolution, resolution), u along axis 0
    valid: np.ndarray

    def __post_init__(self):
        self.values.setflags(write=False)
        self.valid.setflags(write=False)

    @property
    def cell_area(self) -> float:
        return (2.0 / self.resolution) ** 2

    def axis(self) -> np.ndarray:
        """Cell-center coordinates shared by both axes."""
        return (np.arange(self.resolution) + 0.5) / self.resolution * 2.0 - 1.0

    def valid_cells(self) -> np.ndarray:
        """(n, 2) uv coordinates of valid cell centers."""
        ax = self.axis()
        uu, vv = np.meshgrid(ax, ax, indexing="ij")
        return np.stack([uu[self.valid], vv[self.valid]], axis=1)

    def integral(self) -> float:
        """Cell-area-weighted sum of the valid gain entries."""
        return float(self.values[self.valid].sum() * self.cell_area)


def gain_map(w: WeightVector, resolution: int = DEFAULT_MAP_RESOLUTION) -> GainMap:
    """Line-of-sight gain for every direction of the visible hemisphere."""
    ax = (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0
    kd = 2.0 * math.pi * w.geometry.spacing / w.geometry.wavelength
    ex = np.exp(1j * kd * np.outer(ax, np.arange(w.geometry.nx)))
    ey = np.exp(1j * kd * np.outer(ax, np.arange(w.geometry.ny)))
    field = ex @ w.values.conj() @ ey.T
    uu, vv = np.meshgrid(ax, ax, indexing="ij")
    return GainMap(
        resolution=resolution,
        values=np.abs(field) ** 2,
        valid=uu * uu + vv * vv <= 1.0,
    )


def _angles_to_path(points_uv: np.ndarray, plan: TrajectoryPlan) -> np.ndarray:
    """Great-circle angle from each uv point to the nearest trajectory sample."""
    pu = np.asarray(points_uv, dtype=float)
    pw = np.sqrt(np.clip(1.0 - pu[:, 0] ** 2 - pu[:, 1] ** 2, 0.0, None))
    p3 = np.column_stack([pu, pw])
    tree = cKDTree(plan.samples_vec)
    chord, _ = tree.query(p3)
    return 2.0 * np.arcsin(np.clip(chord / 2.0, 0.0, 1.0))


def concentration_from_map(
    gmap: GainMap, plan: TrajectoryPlan, deltas: np.ndarray
) -> np.ndarray:
    """Fraction of total map gain within each angular distance of the path.

    Monotone nondecreasing in delta; reaches one once delta covers the whole
    hemisphere. Integration weights every valid cell equally.
    """
    deltas = np.asarray(deltas, dtype=float)
    dist = _angles_to_path(gmap.valid_cells(), plan)
    order = np.argsort(dist)
    gains = gmap.values[gmap.valid][order]
    cum = np.concatenate([[0.0], np.cumsum(gains)])
    total = cum[-1]
    idx = np.searchsorted(dist[order], deltas, side="right")
    return cum[idx] / total


def default_deltas() -> np.ndarray:
    """Distance grid covering the hemisphere at the binning granularity."""
    return np.arange(BIN_WIDTH, math.pi + BIN_WIDTH, BIN_WIDTH)


def gain_concentration(
    w: WeightVector,
    plan: TrajectoryPlan,
    deltas: np.ndarray | None = None,
    resolution: int = DEFAULT_MAP_RESOLUTION,
) -> tuple[np.ndarray, np.ndarray]:
    """Concentration CDF of a weight vector's gain around a trajectory."""
    deltas = default_deltas() if deltas is None else np.asarray(deltas, dtype=float)
    return deltas, concentration_from_map(gain_map(w, resolution), plan, deltas)


def isotropic_concentration(
    plan: TrajectoryPlan,
    deltas: np.ndarray | None = None,
    resolution: int = DEFAULT_MAP_RESOLUTION,
) -> tuple[np.ndarray, np.ndarray]:
    """Concentration of a constant-gain (isotropic) receiver: the fraction of
    the visible hemisphere's area within each distance of the path."""
    deltas = default_deltas() if deltas is None else np.asarray(deltas, dtype=float)
    ax = (np.arange(resolution) + 0.5) / resolution * 2.0 - 1.0
    uu, vv = np.meshgrid(ax, ax, indexing="ij")
    valid = uu * uu + vv * vv <= 1.0
    cells = np.stack([uu[valid], vv[valid]], axis=1)
    dist = np.sort(_angles_to_path(cells, plan))
    idx = np.searchsorted(dist, deltas, side="right")
    return deltas, idx / dist.size


def shift_trajectory(plan: TrajectoryPlan, dist: float, side: str = "left") -> TrajectoryPlan:
    """Displace every sample along the local path normal by a fixed uv distance.

    The normal points to the left of the travel direction (right with
    ``side="right"``); the shifted polyline is re-sampled to equal arc
    increments. Shifted samples may leave the unit disk; their 3D vectors are
    clamped to the horizon and ``in_front`` stays true, so check uv radii when
    that matters.
    """
    if side not in ("left", "right"):
        raise ValueError("side must be 'left' or 'right'")
    if plan.n_samples < 2:
        raise ValueError("shift needs at least two samples")
    uv = plan.samples_uv
    tangent = np.gradient(uv, axis=0)
    norm = np.hypot(tangent[:, 0], tangent[:, 1])
    norm[norm == 0] = 1.0
    normal = np.stack([-tangent[:, 1] / norm, tangent[:, 0] / norm], axis=1)
    if side == "right":
        normal = -normal
    shifted = uv + dist * normal
    # Resample the shifted polyline to equal arc increments. Points can sit
    # outside the unit disk; their vectors are clamped to the horizon plane.
    seg = np.hypot(*np.diff(shifted, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    if total < 1e-9:
        w0 = math.sqrt(max(0.0, 1.0 - shifted[0] @ shifted[0]))
        return _single_sample_plan(np.array([*shifted[0], w0]), plan.target_spacing)
    n = max(1, round(total / plan.target_spacing))
    pos = np.linspace(0.0, total, n + 1)
    out_uv = np.stack([np.interp(pos, cum, shifted[:, i]) for i in range(2)], axis=1)
    w = np.sqrt(np.clip(1.0 - out_uv[:, 0] ** 2 - out_uv[:, 1] ** 2, 0.0, None))
    return TrajectoryPlan(
        samples_uv=out_uv,
        samples_vec=np.column_stack([out_uv, w]),
        total_length=total,
        target_spacing=plan.target_spacing,
    )


def profile_points(
    plan: TrajectoryPlan, granularity: float = PROFILE_GRANULARITY
) -> tuple[np.ndarray, np.ndarray]:
    """Arc positions at the given granularity and their uv coordinates."""
    total = plan.total_length
    if plan.n_samples < 2 or total <= 0.0:
        return np.zeros(1), plan.samples_uv[:1].copy()
    pos = np.arange(0.0, total, granularity)
    if total - pos[-1] > 1e-12:
        pos = np.append(pos, total)
    cum = np.linspace(0.0, total, plan.n_samples)
    uv = np.stack([np.interp(pos, cum, plan.samples_uv[:, i]) for i in range(2)], axis=1)
    return pos, uv


def trajectory_gain_profile(
    w: WeightVector, plan: TrajectoryPlan, granularity: float = PROFILE_GRANULARITY
) -> tuple[np.ndarray, np.ndarray]:
    """Gain in dB at equal arc steps along the path, endpoints included.

    Evaluates the response directly (no grid interpolation). Returns
    (arc positions, gain_db).
    """
    pos, uv = profile_points(plan, granularity)
    gains = uv_gain(w, uv)
    return pos, 10.0 * np.log10(np.maximum(gains, 1e-300))


def gain_variation(profile_db: np.ndarray) -> float:
    """Spread (max minus min, dB) of a gain profile; shift-invariant."""
    profile_db = np.asarray(profile_db, dtype=float)
    if profile_db.size == 0:
        raise ValueError("empty gain profile")
    return float(profile_db.max() - profile_db.min())


def savgol_smooth(series: np.ndarray, window: int = 11, order: int = 2) -> np.ndarray:
    """Least-squares local-polynomial smoothing.

    Windows are centered and truncated at the series ends (the polynomial is
    refit on whatever part of the window exists). Series shorter than the
    window are returned unchanged. Polynomials up to the given order pass
    through unchanged.
    """
    if window % 2 != 1:
        raise ValueError("window must be odd")
    if order >= window:
        raise ValueError("order must be below window")
    y = np.asarray(series, dtype=float)
    n = y.size
    if n < window:
        return y.copy()
    half = window // 2
    out = np.empty(n)
    for i in range(n):
        lo = max(0, i - half)
        hi = min(n, i + half + 1)
        offsets = np.arange(lo, hi) - i
        if hi - lo <= order:
            out[i] = y[i]
            continue
        design = np.vander(offsets, order + 1, increasing=True)
        coef, *_ = np.linalg.lstsq(design, y[lo:hi], rcond=None)
        out[i] = coef[0]
    return out


def nearest_rank_percentile(values: np.ndarray, pct: float) -> float:
    """Nearest-rank percentile: smallest value with at least pct% at or below."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        raise ValueError("no values")
    if pct <= 0.0:
        return float(v[0])
    rank = math.ceil(pct / 100.0 * v.size)
    return float(v[min(rank, v.size) - 1])


@dataclass(frozen=True, eq=False)
class MetricSeries:
    """Per-bin aggregates of a scalar metric keyed by trajectory length."""

    bin_centers: np.ndarray
    median: np.ndarray
    p001: np.ndarray  # 0.1th percentile
    p999: np.ndarray  # 99.9th percentile
    minimum: np.ndarray
    maximum: np.ndarray
    mean: np.ndarray
    count: np.ndarray


def bin_series(
    lengths: np.ndarray, values: np.ndarray, bin_width: float = BIN_WIDTH
) -> MetricSeries:
    """Aggregate (trajectory length, value) pairs into contiguous length bins.

    Aggregation is order-independent: pairs are sorted before reduction so any
    parallel partitioning of the batch yields identical output.
    """
    lengths = np.asarray(lengths, dtype=float)
    values = np.asarray(values, dtype=float)
    if lengths.size == 0:
        empty = np.empty(0)
        return MetricSeries(empty, empty, empty, empty, empty, empty, empty, np.empty(0, int))
    order = np.lexsort((values, lengths))
    lengths = lengths[order]
    values = values[order]
    bins = np.floor(lengths / bin_width).astype(int)
    n_bins = bins.max() + 1
    centers = (np.arange(n_bins) + 0.5) * bin_width
    cols = {k: np.full(n_bins, np.nan) for k in ("med", "lo", "hi", "mn", "mx", "avg")}
    counts = np.zeros(n_bins, dtype=int)
    for b in np.unique(bins):
        chunk = values[bins == b]
        counts[b] = chunk.size
        cols["med"][b] = nearest_rank_percentile(chunk, 50.0)
        cols["lo"][b] = nearest_rank_percentile(chunk, 0.1)
        cols["hi"][b] = nearest_rank_percentile(chunk, 99.9)
        cols["mn"][b] = chunk.min()
        cols["mx"][b] = chunk.max()
        cols["avg"][b] = chunk.mean()
    return MetricSeries(
        centers, cols["med"], cols["lo"], cols["hi"], cols["mn"], cols["mx"], cols["avg"], counts
    )


@dataclass(frozen=True, eq=False)
class MotionWindowStats:
    """Sliding-window angular path lengths and mean velocities from one trace."""

    window_ms: float
    lengths_deg: np.ndarray  # sorted ascending: the length CDF support
    velocities_dps: np.ndarray  # sorted ascending
    gap_flagged: bool


def sliding_motion_stats(
    timestamps_ns: np.ndarray, quaternions, window_ms: float
) -> MotionWindowStats:
    """Angular path length and mean velocity in every sliding window of a trace.

    A window starts at each sample and ends at the last sample within the
    window length; windows truncated below 90% of the nominal length (trace
    tail) are dropped. Path length sums the rotation angles between successive
    orientations. Sampling gaps above twice the median interval set
    ``gap_flagged``.
    """
    ts = np.asarray(timestamps_ns, dtype=np.int64)
    if ts.size < 2:
        raise ValueError("trace needs at least two samples")
    if not np.all(np.diff(ts) > 0):
        raise ValueError("timestamps must be strictly increasing")
    quats = np.asarray([q.as_array() for q in quaternions])
    dots = np.abs(np.sum(quats[:-1] * quats[1:], axis=1))
    step_angles = 2.0 * np.arccos(np.clip(dots, -1.0, 1.0))
    cum_angle = np.concatenate([[0.0], np.cumsum(step_angles)])

    dt = np.diff(ts)
    gap_flagged = bool(np.any(dt > 2 * np.median(dt)))

    window_ns = int(window_ms * 1e6)
    ends = np.searchsorted(ts, ts + window_ns, side="right") - 1
    lengths = []
    velocities = []
    for i, j in enumerate(ends):
        span = ts[j] - ts[i]
        if j <= i or span < 0.9 * window_ns:
            continue
        length = cum_angle[j] - cum_angle[i]
        lengths.append(math.degrees(length))
        velocities.append(math.degrees(length) / (span * 1e-9))
    return MotionWindowStats(
        window_ms=window_ms,
        lengths_deg=np.sort(np.asarray(lengths)),
        velocities_dps=np.sort(np.asarray(velocities)),
        gap_flagged=gap_flagged,
    )
