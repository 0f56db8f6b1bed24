"""Seeded batch execution of the evaluation studies.

Each trajectory is an independent task seeded by (master seed, index), so a
batch produces identical results for any worker count; reduction happens in
index order. All numeric work runs inside pool workers, keeping the execution
environment identical whether one or many workers are used.
"""

from __future__ import annotations

import math
import multiprocessing
import time
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .arrays import ArrayPartition, build_ura, partition_multiblock, quantize_phases
from .channel import sample_channel, uv_response
from .config import ConfigError, ScenarioConfig
from .core import (
    LOOSE,
    TIGHT,
    CoverageWarning,
    TrajectoryPlan,
    assign_loose,
    assign_single_block,
    assign_tight,
    classify_trajectory,
    place_subbeams,
    sample_trajectory,
    sync_subbeams,
    synthesize,
)
from .metrics import (
    bin_series,
    concentration_from_map,
    default_deltas,
    gain_map,
    gain_variation,
    isotropic_concentration,
    nearest_rank_percentile,
    profile_points,
    shift_trajectory,
    sliding_motion_stats,
    trajectory_gain_profile,
)
from .outputs import (
    write_csv,
    write_gainmap_binary,
    write_gainmap_csv,
    write_manifest,
    write_series,
)
from .rotations import SphericalDirection, UnitQuaternion, active_rotation
from .sampling import sample_endpoints
from .traces import read_trace

__all__ = [
    "run_gainmap",
    "run_sweep",
    "run_concentration",
    "run_quantization",
    "run_multipath",
    "run_trace_stats",
]

_BOTTOM_K = 2000  # per-task count of smallest multipath deltas kept for tails

_CTX: dict = {}


def _build_partition(config: ScenarioConfig) -> ArrayPartition:
    geom = build_ura(config.n_side, config.spacing, config.wavelength)
    return partition_multiblock(geom, config.blocks_per_side, config.interleave)


def _init_worker(config: ScenarioConfig) -> None:
    _CTX["config"] = config
    _CTX["partition"] = _build_partition(config)


def _task_rng(config: ScenarioConfig, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([config.seed, index]))


def _ap_direction(config: ScenarioConfig) -> SphericalDirection:
    return SphericalDirection(
        math.radians(config.ap_azimuth_deg), math.radians(config.ap_elevation_deg)
    )


def _probe_in_front(
    q_start: UnitQuaternion, q_end: UnitQuaternion, ap: SphericalDirection, n: int = 257
) -> bool:
    """Cheap screen: does the whole apparent path stay in the front hemisphere?"""
    axis, angle = active_rotation(q_start, q_end).axis_angle()
    d0 = ap.unit_vector()
    a = np.linspace(0.0, 1.0, n) * angle
    c, s = np.cos(a), np.sin(a)
    kxv = np.cross(axis, d0)
    kdv = float(axis @ d0)
    z = d0[2] * c + kxv[2] * s + axis[2] * kdv * (1.0 - c)
    return bool((z >= -1e-9).all())


def _draw_plan(
    rng: np.random.Generator, config: ScenarioConfig, max_attempts: int = 100_000
) -> TrajectoryPlan:
    """Rejection-sample an orientation pair whose apparent path stays visible."""
    ap = _ap_direction(config)
    for _ in range(max_attempts):
        q_start, q_end = sample_endpoints(rng, config.angle_min_deg, config.angle_max_deg)
        if not _probe_in_front(q_start, q_end, ap):
            continue
        plan = sample_trajectory(q_start, q_end, config.sample_spacing, ap)
        if plan.all_in_front:
            return plan
    raise RuntimeError("no trajectory stayed inside the visible hemisphere")


def _assign(partition: ArrayPartition, plan: TrajectoryPlan, beam_type: str):
    if partition.blocks_x == 1 and partition.blocks_y == 1:
        return assign_single_block(partition, beam_type)
    return (assign_tight if beam_type == TIGHT else assign_loose)(partition, plan)


def _make_beam(partition: ArrayPartition, plan: TrajectoryPlan, beam_type: str, bits: int):
    """Synthesize one synced beam; CoverageWarnings are recorded, not raised."""
    spec = _assign(partition, plan, beam_type)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CoverageWarning)
        plan_b = place_subbeams(plan, spec.n_subbeams, spec.partition.subbeam_width_uv())
    w = sync_subbeams(synthesize(spec, plan_b), spec, plan_b)
    if bits >= 1:
        w = quantize_phases(w, bits)
    return w, spec, plan_b


def _run_tasks(task_fn, config: ScenarioConfig, n_tasks: int, threads: int) -> list:
    """Run tasks 0..n_tasks-1 in a worker pool; results ordered by index."""
    threads = max(1, threads)
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, n_tasks // (threads * 8))
    results: dict[int, dict] = {}
    with ctx.Pool(processes=threads, initializer=_init_worker, initargs=(config,)) as pool:
        for rec in pool.imap_unordered(task_fn, range(n_tasks), chunksize=chunk):
            results[rec["index"]] = rec
    return [results[i] for i in range(n_tasks)]


def _mean_linear_db(profile_db: np.ndarray) -> float:
    return float(10.0 * np.log10(np.mean(10.0 ** (profile_db / 10.0))))


# ----------------------------------------------------------------- sweep

def _sweep_task(index: int) -> dict:
    config: ScenarioConfig = _CTX["config"]
    partition: ArrayPartition = _CTX["partition"]
    rng = _task_rng(config, index)
    plan = classify_trajectory(_draw_plan(rng, config))
    shifted = {}
    if plan.n_samples >= 2:
        shifted = {s: shift_trajectory(plan, s) for s in config.shifts}
    rec = {"index": index, "length": plan.total_length, "infeasible": False, "beams": {}}
    for beam_type in config.beam_types:
        w, _, plan_b = _make_beam(partition, plan, beam_type, config.bits)
        if plan_b.coverage_feasible is False:
            rec["infeasible"] = True
        _, prof = trajectory_gain_profile(w, plan_b)
        entry = {
            "on_mean_db": _mean_linear_db(prof),
            "variation_db": gain_variation(prof),
            "shift_mean_db": {},
        }
        for s, splan in shifted.items():
            _, sprof = trajectory_gain_profile(w, splan)
            entry["shift_mean_db"][s] = _mean_linear_db(sprof)
        rec["beams"][beam_type] = entry
    return rec


def run_sweep(config: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """On/off-trajectory gain and gain-variation series over a random batch."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    records = _run_tasks(_sweep_task, config, config.count, threads)
    lengths = np.array([r["length"] for r in records])
    for beam_type in config.beam_types:
        on = np.array([r["beams"][beam_type]["on_mean_db"] for r in records])
        var = np.array([r["beams"][beam_type]["variation_db"] for r in records])
        write_series(out_dir / f"ontrajectory_gain_{beam_type}.csv", bin_series(lengths, on))
        write_series(out_dir / f"gain_variation_{beam_type}.csv", bin_series(lengths, var))
        for s in config.shifts:
            pairs = [
                (r["length"], r["beams"][beam_type]["shift_mean_db"][s])
                for r in records
                if s in r["beams"][beam_type]["shift_mean_db"]
            ]
            arr = np.array(pairs) if pairs else np.empty((0, 2))
            write_series(
                out_dir / f"offtrajectory_gain_{beam_type}_shift{s:g}.csv",
                bin_series(arr[:, 0], arr[:, 1]) if arr.size else bin_series([], []),
            )
    summary = {
        "trajectories": len(records),
        "infeasible_count": sum(r["infeasible"] for r in records),
    }
    write_manifest(out_dir, config, time.monotonic() - start, **summary)
    return summary


# --------------------------------------------------------- concentration

def _concentration_task(index: int) -> dict:
    config: ScenarioConfig = _CTX["config"]
    partition: ArrayPartition = _CTX["partition"]
    rng = _task_rng(config, index)
    plan = classify_trajectory(_draw_plan(rng, config))
    deltas = default_deltas()
    rec = {"index": index, "length": plan.total_length, "infeasible": False, "cdf": {}}
    for beam_type in config.beam_types:
        w, _, plan_b = _make_beam(partition, plan, beam_type, config.bits)
        if plan_b.coverage_feasible is False:
            rec["infeasible"] = True
        gmap = gain_map(w, config.map_resolution)
        rec["cdf"][beam_type] = concentration_from_map(gmap, plan, deltas).astype(np.float64)
    _, iso = isotropic_concentration(plan, deltas, config.map_resolution)
    rec["cdf"]["isotropic"] = iso
    return rec


def run_concentration(config: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """Mean gain-concentration CDFs (per beam type plus isotropic baseline)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    records = _run_tasks(_concentration_task, config, config.count, threads)
    deltas = default_deltas()
    for key in list(config.beam_types) + ["isotropic"]:
        mean_cdf = np.mean([r["cdf"][key] for r in records], axis=0)
        write_csv(
            out_dir / f"concentration_{key}.csv",
            ["delta_uv", "fraction"],
            zip(deltas, mean_cdf),
        )
    summary = {
        "trajectories": len(records),
        "infeasible_count": sum(r["infeasible"] for r in records),
    }
    write_manifest(out_dir, config, time.monotonic() - start, **summary)
    return summary


# ------------------------------------------------------------ quantization

def _quantize_task(index: int) -> dict:
    config: ScenarioConfig = _CTX["config"]
    partition: ArrayPartition = _CTX["partition"]
    rng = _task_rng(config, index)
    plan = classify_trajectory(_draw_plan(rng, config))
    beam_type = config.beam_types[0]
    w, _, plan_b = _make_beam(partition, plan, beam_type, 0)
    g_cont = gain_map(w, config.map_resolution)
    cont_db = 10.0 * np.log10(np.maximum(g_cont.values, 1e-300))
    rec = {"index": index, "infeasible": plan_b.coverage_feasible is False, "diffs": {}}
    for bits in config.quantize_bits:
        wq = quantize_phases(w, bits)
        g_q = gain_map(wq, config.map_resolution)
        q_db = 10.0 * np.log10(np.maximum(g_q.values, 1e-300))
        keep = g_cont.valid & (
            (cont_db >= config.gain_filter_db) | (q_db >= config.gain_filter_db)
        )
        rec["diffs"][bits] = np.abs(q_db[keep] - cont_db[keep]).astype(np.float32)
    return rec


def run_quantization(config: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """Quantized-versus-continuous gain differences on high-gain directions."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    records = _run_tasks(_quantize_task, config, config.count, threads)
    rows = []
    for bits in config.quantize_bits:
        diffs = np.concatenate([r["diffs"][bits] for r in records])
        rows.append(
            (
                bits,
                nearest_rank_percentile(diffs, 99.0),
                nearest_rank_percentile(diffs, 99.9),
                float(diffs.max()),
                diffs.size,
            )
        )
    write_csv(
        out_dir / "quantization_table.csv",
        ["bits", "p99_db", "p999_db", "worst_db", "n_samples"],
        rows,
    )
    summary = {
        "trajectories": len(records),
        "infeasible_count": sum(r["infeasible"] for r in records),
    }
    write_manifest(out_dir, config, time.monotonic() - start, **summary)
    return summary


# -------------------------------------------------------------- multipath

def _multipath_task(index: int) -> dict:
    config: ScenarioConfig = _CTX["config"]
    partition: ArrayPartition = _CTX["partition"]
    rng = _task_rng(config, index)
    plan = classify_trajectory(_draw_plan(rng, config))
    _, prof_uv = profile_points(plan)
    start_dir = SphericalDirection.from_unit_vector(plan.samples_vec[0])
    beams = {bt: _make_beam(partition, plan, bt, config.bits) for bt in config.beam_types}
    rec = {"index": index, "stats": {}}
    for k_db in config.k_factors_db:
        channels = [
            sample_channel(config.paths, k_db, rng, start_dir) for _ in range(config.draws)
        ]
        gammas = np.array(
            [[c.gamma for c in ch.components if not c.is_los] for ch in channels]
        )  # (draws, L-1)
        gamma_los = channels[0].components[0].gamma
        nlos_uv = np.array(
            [
                [
                    [
                        math.sin(c.aoa.azimuth) * math.cos(c.aoa.elevation),
                        math.sin(c.aoa.elevation),
                    ]
                    for c in ch.components
                    if not c.is_los
                ]
                for ch in channels
            ]
        )  # (draws, L-1, 2)
        for beam_type in config.beam_types:
            w = beams[beam_type][0]
            c_path = uv_response(w, prof_uv)  # (P,)
            c_nlos = uv_response(w, nlos_uv.reshape(-1, 2)).reshape(gammas.shape)
            interference = np.sum(gammas * c_nlos, axis=1)  # (draws,)
            g_base = np.abs(c_path) ** 2
            g_multi = np.abs(gamma_los * c_path[None, :] + interference[:, None]) ** 2
            delta_db = 10.0 * np.log10(np.maximum(g_multi, 1e-300)) - 10.0 * np.log10(
                np.maximum(g_base, 1e-300)
            )[None, :]
            flat = np.sort(delta_db, axis=None)
            rec["stats"][(k_db, beam_type)] = {
                "avg": delta_db.mean(axis=0).astype(np.float32),
                "bottom": flat[:_BOTTOM_K].astype(np.float32),
                "count": flat.size,
            }
    return rec


def run_multipath(config: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """Gain change when reflected paths join the line-of-sight channel."""
    if config.paths < 2:
        raise ConfigError("multipath study needs paths >= 2")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    records = _run_tasks(_multipath_task, config, config.count, threads)
    rows = []
    for k_db in config.k_factors_db:
        for beam_type in config.beam_types:
            stats = [r["stats"][(k_db, beam_type)] for r in records]
            avgs = np.concatenate([s["avg"] for s in stats])
            order = np.argsort(avgs)
            cdf_vals = avgs[order]
            write_csv(
                out_dir / f"multipath_avg_cdf_{beam_type}_k{k_db:g}.csv",
                ["delta_db", "fraction"],
                zip(cdf_vals, (np.arange(cdf_vals.size) + 1) / cdf_vals.size),
            )
            bottom = np.sort(np.concatenate([s["bottom"] for s in stats]))
            total = sum(s["count"] for s in stats)
            p9999 = bottom[min(max(math.ceil(1e-4 * total), 1), bottom.size) - 1]
            p999999 = bottom[min(max(math.ceil(1e-6 * total), 1), bottom.size) - 1]
            rows.append(
                (
                    k_db,
                    beam_type,
                    float(p9999),
                    float(p999999),
                    float(bottom[0]),
                    float(avgs.min()),
                    total,
                )
            )
    write_csv(
        out_dir / "multipath_table.csv",
        ["k_db", "beam", "p99_99_db", "p99_9999_db", "worst_db", "worst_averaged_db", "n_samples"],
        rows,
    )
    summary = {"trajectories": len(records)}
    write_manifest(out_dir, config, time.monotonic() - start, **summary)
    return summary


# ---------------------------------------------------------------- gainmap

def run_gainmap(config: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """Gain maps of the beams for one fixed trajectory, plus its polyline."""
    endpoints = config.endpoints()
    if endpoints is None:
        raise ConfigError("gainmap needs fixed endpoints (q_start / q_end)")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    partition = _build_partition(config)
    plan = classify_trajectory(
        sample_trajectory(*endpoints, config.sample_spacing, _ap_direction(config))
    )
    infeasible = 0
    for beam_type in config.beam_types:
        w, _, plan_b = _make_beam(partition, plan, beam_type, config.bits)
        if plan_b.coverage_feasible is False:
            infeasible += 1
        gmap = gain_map(w, config.map_resolution)
        write_gainmap_csv(out_dir / f"gainmap_{beam_type}.csv", gmap)
        write_gainmap_binary(out_dir / f"gainmap_{beam_type}.bin", gmap)
    write_csv(out_dir / "trajectory.csv", ["u", "v"], plan.samples_uv)
    summary = {
        "trajectories": 1,
        "infeasible_count": infeasible,
        "length_uv": round(plan.total_length, 6),
        "all_in_front": plan.all_in_front,
    }
    write_manifest(out_dir, config, time.monotonic() - start, **summary)
    return summary


# ------------------------------------------------------------ trace stats

def run_trace_stats(config: ScenarioConfig, out_dir: Path, threads: int = 1) -> dict:
    """Sliding-window length/velocity CDFs from a recorded orientation trace."""
    if not config.trace_file:
        raise ConfigError("trace-stats needs trace_file")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.monotonic()
    trace = read_trace(config.trace_file)
    if trace.renormalized_rows:
        warnings.warn(
            f"{config.trace_file}: renormalized non-unit quaternions on "
            f"{len(trace.renormalized_rows)} lines (first: {trace.renormalized_rows[0]})",
            stacklevel=2,
        )
    gap_flags = {}
    for window_ms in config.windows_ms:
        stats = sliding_motion_stats(trace.timestamps_ns, trace.quaternions, window_ms)
        gap_flags[f"{window_ms:g}ms"] = stats.gap_flagged
        for name, values in (
            ("length_deg", stats.lengths_deg),
            ("velocity_dps", stats.velocities_dps),
        ):
            n = values.size
            write_csv(
                out_dir / f"motion_{name}_cdf_{window_ms:g}ms.csv",
                [name, "cdf"],
                zip(values, (np.arange(n) + 1) / n if n else []),
            )
    summary = {
        "samples": trace.n_samples,
        "duration_s": round(trace.duration_s, 6),
        "renormalized_rows": len(trace.renormalized_rows),
        "gap_flagged": gap_flags,
    }
    write_manifest(out_dir, config, time.monotonic() - start, **summary)
    return summary
