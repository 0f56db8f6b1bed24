"""Trajectory-covering beam synthesis with virtual sub-arrays.

The pipeline converts a current and a predicted head orientation into antenna
weights: sample the apparent motion of the access point in uv space, classify
the path's orientation and slope, map sub-beams onto sub-arrays (with
transitional sub-arrays softening unwanted aperture fusion on multi-block
layouts), aim each sub-array's phases at its trajectory point, and finally
phase-align adjacent sub-beams at the stored midpoints.

Every step is a pure function over immutable inputs; plans are rebuilt with
``dataclasses.replace`` as stages fill them in.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace

import numpy as np

from .arrays import (
    REGULAR,
    ArrayPartition,
    WeightVector,
    make_transitional,
    quantize_phases,
)
from .rotations import SphericalDirection, UnitQuaternion, active_rotation

__all__ = [
    "TIGHT",
    "LOOSE",
    "NON_DIAGONAL",
    "SEMI_DIAGONAL",
    "DIAGONAL",
    "HORIZONTAL",
    "VERTICAL",
    "CoverageWarning",
    "TrajectoryPlan",
    "BeamSpec",
    "sample_trajectory",
    "place_subbeams",
    "classify_trajectory",
    "assign_tight",
    "assign_loose",
    "assign_single_block",
    "synthesize",
    "sync_subbeams",
    "covrage_beam",
    "beam_to_json",
    "DEFAULT_SAMPLE_SPACING",
]

TIGHT = "tight"
LOOSE = "loose"
NON_DIAGONAL = "non-diagonal"
SEMI_DIAGONAL = "semi-diagonal"
DIAGONAL = "diagonal"
HORIZONTAL = "horizontal"
VERTICAL = "vertical"

DEFAULT_SAMPLE_SPACING = 0.002  # target uv distance between trajectory samples
_INITIAL_PARAM_STEP = 0.01  # starting interpolation step of the adaptive walk
_SPACING_TOLERANCE = 0.2  # accepted relative deviation from the target spacing


class CoverageWarning(UserWarning):
    """Sub-beam spacing exceeds the sub-beam width; coverage has gaps."""


@dataclass(frozen=True, eq=False)
class TrajectoryPlan:
    """Sampled apparent-motion path plus the chosen sub-beam geometry.

    ``samples_uv`` holds near-equidistant uv samples from start to end;
    ``samples_vec`` the matching 3D unit vectors (z < 0 means the sample left
    the visible hemisphere). Sub-beam and midpoint fields are filled by
    placement; slope fields by classification.
    """

    samples_uv: np.ndarray
    samples_vec: np.ndarray
    total_length: float
    target_spacing: float
    subbeam_uv: np.ndarray | None = None
    subbeam_positions: np.ndarray | None = None
    midpoint_uv: np.ndarray | None = None
    midpoint_positions: np.ndarray | None = None
    slope: float | None = None
    slope_class: str | None = None
    orientation: str | None = None
    coverage_feasible: bool | None = None

    def __post_init__(self):
        for name in ("samples_uv", "samples_vec"):
            getattr(self, name).setflags(write=False)

    @property
    def n_samples(self) -> int:
        return self.samples_uv.shape[0]

    @property
    def in_front(self) -> np.ndarray:
        return self.samples_vec[:, 2] >= -1e-12

    @property
    def all_in_front(self) -> bool:
        return bool(self.in_front.all())

    @property
    def n_subbeams(self) -> int:
        return 0 if self.subbeam_uv is None else self.subbeam_uv.shape[0]

    def subbeam_dirs(self) -> tuple[SphericalDirection, ...]:
        if self.subbeam_uv is None:
            raise ValueError("sub-beams have not been placed")
        return tuple(_uv_to_dir(p) for p in self.subbeam_uv)

    def midpoint_dirs(self) -> tuple[SphericalDirection, ...]:
        if self.midpoint_uv is None:
            raise ValueError("sub-beams have not been placed")
        return tuple(_uv_to_dir(p) for p in self.midpoint_uv)


def _uv_to_dir(uv) -> SphericalDirection:
    u, v = float(uv[0]), float(uv[1])
    w = math.sqrt(max(0.0, 1.0 - u * u - v * v))
    return SphericalDirection.from_unit_vector([u, v, w])


def sample_trajectory(
    q_start: UnitQuaternion,
    q_end: UnitQuaternion,
    target_spacing: float = DEFAULT_SAMPLE_SPACING,
    ap_start: SphericalDirection = SphericalDirection(0.0, 0.0),
) -> TrajectoryPlan:
    """Sample the apparent path of the access point during a head rotation.

    ``ap_start`` is the arrival direction at the moment the rotation begins
    (broadside for a ceiling-mounted access point the beam currently faces).
    The apparent motion applies powers of the relative rotation
    ``q_start * conj(q_end)`` to that direction.

    The walk steps an interpolation parameter adaptively, rescaling the step by
    target/actual distance after every sample so the uv spacing tracks the
    target; accepted spacings stay within 20% of the target and the sample list
    is then rebalanced to equal arc increments. A zero-motion rotation yields a
    single-sample plan. Samples that leave the visible hemisphere are kept and
    flagged via ``in_front``.
    """
    if target_spacing <= 0:
        raise ValueError("target_spacing must be positive")
    rel = active_rotation(q_start, q_end)
    axis, angle = rel.axis_angle()
    d0 = ap_start.unit_vector()
    if angle < 1e-12:
        return _single_sample_plan(d0, target_spacing)

    kx, ky, kz = float(axis[0]), float(axis[1]), float(axis[2])
    x0, y0, z0 = float(d0[0]), float(d0[1]), float(d0[2])
    cx = ky * z0 - kz * y0
    cy = kz * x0 - kx * z0
    cz = kx * y0 - ky * x0
    kdv = kx * x0 + ky * y0 + kz * z0

    def point(a: float) -> tuple[float, float, float]:
        c = math.cos(a * angle)
        s = math.sin(a * angle)
        oc = (1.0 - c) * kdv
        return (
            x0 * c + cx * s + kx * oc,
            y0 * c + cy * s + ky * oc,
            z0 * c + cz * s + kz * oc,
        )

    lo = (1.0 - _SPACING_TOLERANCE) * target_spacing
    hi = (1.0 + _SPACING_TOLERANCE) * target_spacing
    pts = [point(0.0)]
    a = 0.0
    da = _INITIAL_PARAM_STEP
    max_samples = int(8.0 / target_spacing) + 64
    while a < 1.0 and len(pts) < max_samples:
        trial = 1.0
        ds = 0.0
        for _ in range(64):
            trial = min(a + da, 1.0)
            px, py, pz = point(trial)
            ds = math.hypot(px - pts[-1][0], py - pts[-1][1])
            if ds <= hi and (trial == 1.0 or ds >= lo):
                break
            da = da * (target_spacing / ds) if ds > 1e-15 else da * 8.0
            da = min(max(da, 1e-12), 1.0)
        a = trial
        pts.append((px, py, pz))
        if ds > 1e-15:
            da = min(max(da * (target_spacing / ds), 1e-12), 1.0)
    if a < 1.0:
        pts.append(point(1.0))

    return _rebalance(np.asarray(pts), target_spacing)


def _single_sample_plan(d0: np.ndarray, target_spacing: float) -> TrajectoryPlan:
    vec = np.asarray(d0, dtype=float).reshape(1, 3)
    return TrajectoryPlan(
        samples_uv=vec[:, :2].copy(),
        samples_vec=vec.copy(),
        total_length=0.0,
        target_spacing=target_spacing,
    )


def _rebalance(pts: np.ndarray, target_spacing: float) -> TrajectoryPlan:
    """Resample a walked polyline to equal uv arc increments near the target."""
    seg = np.hypot(*np.diff(pts[:, :2], axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    total = float(cum[-1])
    if total < 1e-9:
        return _single_sample_plan(pts[0], target_spacing)
    n_lo = max(1, int(math.floor(total / target_spacing)))
    n_hi = int(math.ceil(total / target_spacing))
    n = min((n_lo, n_hi), key=lambda k: abs(total / k - target_spacing))
    pos = np.linspace(0.0, total, n + 1)
    out = np.stack([np.interp(pos, cum, pts[:, i]) for i in range(3)], axis=1)
    out /= np.linalg.norm(out, axis=1, keepdims=True)
    return TrajectoryPlan(
        samples_uv=out[:, :2].copy(),
        samples_vec=out,
        total_length=total,
        target_spacing=target_spacing,
    )


def place_subbeams(
    plan: TrajectoryPlan, s: int, feasible_width: float | None = None
) -> TrajectoryPlan:
    """Aim ``s`` sub-beams at equal arc intervals along the sampled path.

    The first and last sub-beam centers coincide with the trajectory endpoints,
    so adjacent centers sit total_length/(s-1) apart. Midpoints are the sampled
    points at half arc distance between each adjacent pair. When the spacing
    exceeds ``feasible_width`` (the sub-beam width), the plan is flagged and a
    CoverageWarning is emitted; the beam is still produced.
    """
    if s < 1:
        raise ValueError("s must be >= 1")
    n = plan.n_samples
    total = plan.total_length
    if s == 1 or n == 1 or total <= 0.0:
        sub_idx = np.zeros(s, dtype=int)
        mid_idx = np.zeros(max(s - 1, 0), dtype=int)
        spacing = 0.0
    else:
        gap = total / (n - 1)
        sub_pos = np.linspace(0.0, total, s)
        sub_idx = np.clip(np.round(sub_pos / gap).astype(int), 0, n - 1)
        mid_pos = 0.5 * (sub_pos[:-1] + sub_pos[1:])
        mid_idx = np.clip(np.round(mid_pos / gap).astype(int), 0, n - 1)
        spacing = total / (s - 1)

    feasible = None
    if feasible_width is not None:
        feasible = spacing <= feasible_width
        if not feasible:
            warnings.warn(
                f"sub-beam spacing {spacing:.4f} uv exceeds sub-beam width "
                f"{feasible_width:.4f} uv; coverage will have gaps",
                CoverageWarning,
                stacklevel=2,
            )
    return replace(
        plan,
        subbeam_uv=plan.samples_uv[sub_idx].copy(),
        subbeam_positions=(sub_idx * (total / (n - 1)) if n > 1 else np.zeros(s)),
        midpoint_uv=plan.samples_uv[mid_idx].copy(),
        midpoint_positions=(mid_idx * (total / (n - 1)) if n > 1 else np.zeros(max(s - 1, 0))),
        coverage_feasible=feasible,
    )


def classify_trajectory(plan: TrajectoryPlan) -> TrajectoryPlan:
    """Tag the plan with its dominant axis and slope class.

    The path is horizontal when its u range is at least its v range; the slope
    is a least-squares line fit of the cross axis against the dominant axis.
    Slopes below 1/3 in magnitude are non-diagonal, above 2/3 diagonal,
    semi-diagonal in between. A single-sample plan is non-diagonal horizontal.
    """
    uv = plan.samples_uv
    if plan.n_samples < 2:
        return replace(plan, slope=0.0, slope_class=NON_DIAGONAL, orientation=HORIZONTAL)
    u_range = float(np.ptp(uv[:, 0]))
    v_range = float(np.ptp(uv[:, 1]))
    orientation = HORIZONTAL if u_range >= v_range else VERTICAL
    main, cross = (uv[:, 0], uv[:, 1]) if orientation == HORIZONTAL else (uv[:, 1], uv[:, 0])
    if np.ptp(main) < 1e-15:
        m = 0.0
    else:
        design = np.stack([main, np.ones_like(main)], axis=1)
        m = float(np.linalg.lstsq(design, cross, rcond=None)[0][0])
    # The diagonal threshold is inclusive: a slope of 3/2 lands exactly on 2/3
    # after the axis swap and belongs to the diagonal class.
    if abs(m) < 1.0 / 3.0:
        cls = NON_DIAGONAL
    elif abs(m) > 2.0 / 3.0 - 1e-9:
        cls = DIAGONAL
    else:
        cls = SEMI_DIAGONAL
    return replace(plan, slope=m, slope_class=cls, orientation=orientation)


@dataclass(frozen=True, eq=False)
class BeamSpec:
    """Chosen beam variant: partition after transitional construction plus the
    sub-array visit order (one sub-array per sub-beam, in trajectory order)."""

    beam_type: str
    partition: ArrayPartition
    assignment: tuple[int, ...]

    @property
    def n_subbeams(self) -> int:
        return len(self.assignment)


# Sub-array visit orders for the 2x2-block, 2x2-interleave partition, written
# for a horizontal trajectory (vertical runs on the transposed partition).
# Blocks are lettered row-major (A B / C D); a pair fuses a transitional
# sub-array from the two named donors across the given axis. The tight order
# alternates blocks vertically and crosses left-to-right once through two
# transitional sub-arrays; loose orders exhaust one block before hopping, with
# transition smoothing per slope class.
_BLOCK_POS = {"A": (0, 0), "B": (1, 0), "C": (0, 1), "D": (1, 1)}
_T = "transitional"

_TIGHT_ORDER = [
    "A0", "C0", "A1", "C1", "A2", "C2",
    (_T, "A3", "B3", "horizontal"),
    (_T, "C3", "D3", "horizontal"),
    "B0", "D0", "B1", "D1", "B2", "D2",
]
_LOOSE_ORDERS = {
    NON_DIAGONAL: [
        "A0", "A1", "A2", "A3", "B0", "B1",
        (_T, "B2", "D2", "vertical"),
        (_T, "B3", "D3", "vertical"),
        "D0", "D1", "C0", "C1", "C2", "C3",
    ],
    SEMI_DIAGONAL: [
        "A0", "A1", "A2",
        (_T, "A3", "B3", "horizontal"),
        "B0",
        (_T, "B1", "D1", "vertical"),
        (_T, "B2", "D2", "vertical"),
        "D0",
        (_T, "D3", "C3", "horizontal"),
        "C0", "C1", "C2",
    ],
    DIAGONAL: [
        "A0", "A1", "A2",
        (_T, "A3", "B3", "horizontal"),
        "B0", "B1",
        (_T, "B2", "D2", "vertical"),
        "D0", "D1",
        (_T, "D3", "C3", "horizontal"),
        "C0", "C1", "C2",
    ],
}


def _token_id(partition: ArrayPartition, token: str) -> int:
    """Sub-array id at a block position and interleave offset, by element lookup."""
    bx, by = _BLOCK_POS[token[0]]
    local = int(token[1:])
    a = partition.interleave
    ex = bx * (partition.geometry.nx // partition.blocks_x) + local % a
    ey = by * (partition.geometry.ny // partition.blocks_y) + local // a
    return int(partition.subarray_id[ex, ey])


def _require_quad_partition(partition: ArrayPartition):
    if (
        partition.blocks_x != 2
        or partition.blocks_y != 2
        or partition.interleave != 2
        or any(k != REGULAR for k in partition.subarray_kind.values())
        or len(partition.subarray_kind) != 16
    ):
        raise ValueError(
            "tight/loose assignment needs a fresh 2x2-block partition of 16 "
            "interleaved sub-arrays"
        )


def _build_order(
    partition: ArrayPartition, order_spec: list, beam_type: str
) -> BeamSpec:
    part = partition
    ids: list[int] = []
    for item in order_spec:
        if isinstance(item, str):
            ids.append(_token_id(partition, item))
        else:
            _, donor_a, donor_b, axis = item
            part, new_id = make_transitional(
                part,
                _token_id(partition, donor_a),
                _token_id(partition, donor_b),
                axis,
            )
            ids.append(new_id)
    return BeamSpec(beam_type=beam_type, partition=part, assignment=tuple(ids))


def _assign_quad(partition: ArrayPartition, plan: TrajectoryPlan, beam_type: str) -> BeamSpec:
    _require_quad_partition(partition)
    if plan.slope_class is None:
        plan = classify_trajectory(plan)
    order = _TIGHT_ORDER if beam_type == TIGHT else _LOOSE_ORDERS[plan.slope_class]
    if plan.orientation == VERTICAL:
        spec = _build_order(partition.transposed(), order, beam_type)
        return BeamSpec(beam_type, spec.partition.transposed(), spec.assignment)
    return _build_order(partition, order, beam_type)


def assign_tight(partition: ArrayPartition, plan: TrajectoryPlan) -> BeamSpec:
    """Sub-array order that exploits aperture fusion across the trajectory.

    Consecutive sub-beams alternate between vertically adjacent blocks,
    narrowing the beam perpendicular to the path; the single crossing along the
    path runs through two transitional sub-arrays. Fourteen sub-beams result.
    """
    return _assign_quad(partition, plan, TIGHT)


def assign_loose(partition: ArrayPartition, plan: TrajectoryPlan) -> BeamSpec:
    """Sub-array order that avoids aperture fusion to keep the beam wide.

    Consecutive sub-beams stay inside one block wherever possible; the three
    block transitions (two along the path, one across) are smoothed with
    transitional sub-arrays as a function of the slope class, giving 14, 12, or
    13 sub-beams for non-diagonal, semi-diagonal, and diagonal paths.
    """
    return _assign_quad(partition, plan, LOOSE)


def assign_single_block(partition: ArrayPartition, beam_type: str = LOOSE) -> BeamSpec:
    """Trivial order for a single-block partition (sub-arrays interchange freely)."""
    if partition.blocks_x != 1 or partition.blocks_y != 1:
        raise ValueError("assign_single_block needs a single-block partition")
    return BeamSpec(beam_type, partition, tuple(partition.subarray_ids()))


def synthesize(spec: BeamSpec, plan: TrajectoryPlan) -> WeightVector:
    """Per-element phases steering each sub-array at its sub-beam direction.

    Element (x, y) of the sub-array serving sub-beam i gets phase
    (2 pi d / lambda) * (x u_i + y v_i); elements outside the assignment stay
    off. The result is normalized over the active elements.
    """
    if plan.subbeam_uv is None:
        raise ValueError("place sub-beams before synthesizing")
    if plan.n_subbeams != spec.n_subbeams:
        raise ValueError(
            f"{spec.n_subbeams} sub-arrays assigned but {plan.n_subbeams} sub-beams placed"
        )
    geom = spec.partition.geometry
    kd = 2.0 * math.pi * geom.spacing / geom.wavelength
    vals = np.zeros((geom.nx, geom.ny), dtype=complex)
    for i, sub_id in enumerate(spec.assignment):
        xs, ys = spec.partition.elements(sub_id)
        u, v = plan.subbeam_uv[i]
        vals[xs, ys] = np.exp(1j * kd * (xs * u + ys * v))
    return WeightVector(geom, vals)


def sync_subbeams(w: WeightVector, spec: BeamSpec, plan: TrajectoryPlan) -> WeightVector:
    """Phase-align adjacent sub-beams at their shared midpoints.

    Walking the sub-beams in trajectory order, each sub-array's weights are
    rotated by the phase its response lags the previous sub-beam's response at
    the midpoint between them, so both responses leave equal phase there.
    Offsets must be applied sequentially: each comparison uses the already
    shifted predecessor.
    """
    if plan.midpoint_uv is None:
        raise ValueError("place sub-beams before syncing")
    geom = spec.partition.geometry
    kd = 2.0 * math.pi * geom.spacing / geom.wavelength
    vals = np.array(w.values)
    for i in range(1, len(spec.assignment)):
        u, v = plan.midpoint_uv[i - 1]
        prev_xs, prev_ys = spec.partition.elements(spec.assignment[i - 1])
        cur_xs, cur_ys = spec.partition.elements(spec.assignment[i])
        a_prev = np.exp(1j * kd * (prev_xs * u + prev_ys * v))
        a_cur = np.exp(1j * kd * (cur_xs * u + cur_ys * v))
        phi_prev = np.angle(np.sum(np.conj(vals[prev_xs, prev_ys]) * a_prev))
        phi_cur = np.angle(np.sum(np.conj(vals[cur_xs, cur_ys]) * a_cur))
        vals[cur_xs, cur_ys] *= np.exp(1j * (phi_cur - phi_prev))
    return WeightVector(geom, vals)


def covrage_beam(
    q_now: UnitQuaternion,
    q_pred: UnitQuaternion,
    partition: ArrayPartition,
    beam_type: str = LOOSE,
    target_spacing: float = DEFAULT_SAMPLE_SPACING,
    bits: int = 0,
    ap_start: SphericalDirection = SphericalDirection(0.0, 0.0),
) -> tuple[WeightVector, BeamSpec, TrajectoryPlan]:
    """Full pipeline from an orientation pair to synced (optionally quantized)
    antenna weights. ``bits`` of zero keeps continuous phases.

    Returns the weights together with the beam spec and the finished plan; the
    plan's ``coverage_feasible`` flag records whether the sub-beam spacing fit
    within the sub-beam width.
    """
    if beam_type not in (TIGHT, LOOSE):
        raise ValueError(f"unknown beam type {beam_type!r}")
    plan = sample_trajectory(q_now, q_pred, target_spacing, ap_start)
    plan = classify_trajectory(plan)
    if partition.blocks_x == 1 and partition.blocks_y == 1:
        spec = assign_single_block(partition, beam_type)
    else:
        spec = assign_tight(partition, plan) if beam_type == TIGHT else assign_loose(partition, plan)
    plan = place_subbeams(plan, spec.n_subbeams, spec.partition.subbeam_width_uv())
    w = synthesize(spec, plan)
    w = sync_subbeams(w, spec, plan)
    if bits >= 1:
        w = quantize_phases(w, bits)
    return w, spec, plan


def beam_to_json(spec: BeamSpec, plan: TrajectoryPlan, w: WeightVector) -> str:
    """Serialize a synthesized beam for golden-file comparisons."""
    dirs = plan.subbeam_dirs()
    return json.dumps(
        {
            "beam_type": spec.beam_type,
            "assignment": list(spec.assignment),
            "subbeam_dirs": [[d.azimuth, d.elevation] for d in dirs],
            "phase_rad": np.round(w.phases(), 12).tolist(),
            "active": w.active.astype(int).tolist(),
        },
        sort_keys=True,
    )
