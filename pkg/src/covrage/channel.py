"""Steering vectors, geometric mmWave channel models, and beamforming gain.

Two channel variants are provided: the full model with per-path departure and
arrival angles and explicit transmit weights, and a transmit-independent
simplified model equivalent to the full model with a single-element isotropic
transmitter. Direction enters every formula only through the direction
cosines (u, v), so gain evaluation is expressed over uv points and factorizes
per array axis.

Channel sampling takes an explicit seeded generator; nothing here keeps state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .arrays import ArrayGeometry, WeightVector
from .rotations import SphericalDirection, direction_to_uv

__all__ = [
    "SteeringVector",
    "MultipathComponent",
    "ChannelInstance",
    "steering_vector",
    "sample_channel",
    "channel_matrix",
    "gain_full",
    "gain_simplified",
    "received_signal",
    "uv_response",
    "uv_gain",
    "predicted_beamwidth",
    "predicted_beamwidth_uv",
    "BEAMWIDTH_FACTOR",
]

BEAMWIDTH_FACTOR = 0.886  # half-power width constant of a uniform aperture


@dataclass(frozen=True, eq=False)
class SteeringVector:
    """Array response to a plane wave, scaled by 1/sqrt(N); unit norm."""

    geometry: ArrayGeometry
    values: np.ndarray  # flat, x-fastest: a00, a10, ...

    def __post_init__(self):
        if self.values.shape != (self.geometry.n_elements,):
            raise ValueError("steering vector length does not match geometry")
        self.values.setflags(write=False)

    def grid(self) -> np.ndarray:
        """Entries reshaped to (nx, ny)."""
        return self.values.reshape((self.geometry.nx, self.geometry.ny), order="F")


def _phase_factor(geometry: ArrayGeometry) -> float:
    return 2.0 * math.pi * geometry.spacing / geometry.wavelength


def steering_vector(
    n_side: int, azimuth: float, elevation: float, spacing: float, wavelength: float
) -> SteeringVector:
    """Steering vector of a square URA toward (azimuth, elevation).

    Entry (x, y) is exp(j*(2 pi d / lambda)*(x sin(az) cos(el) + y sin(el)))
    divided by sqrt(N).
    """
    geom = ArrayGeometry(n_side, n_side, spacing, wavelength)
    u = math.sin(azimuth) * math.cos(elevation)
    v = math.sin(elevation)
    kd = _phase_factor(geom)
    xs = np.arange(n_side)
    ex = np.exp(1j * kd * u * xs)
    ey = np.exp(1j * kd * v * xs)
    vals = np.outer(ex, ey) / math.sqrt(geom.n_elements)
    return SteeringVector(geom, np.ravel(vals, order="F"))


@dataclass(frozen=True)
class MultipathComponent:
    """One propagation path: complex gain plus arrival (and departure) angles."""

    gamma: complex
    aoa: SphericalDirection
    aod: SphericalDirection | None = None
    is_los: bool = False


@dataclass(frozen=True)
class ChannelInstance:
    """A drawn set of multipath components with Rician normalization."""

    components: tuple[MultipathComponent, ...]
    k_factor: float | None  # linear; None for a pure line-of-sight draw
    model: str  # "full" or "simplified"

    def __post_init__(self):
        if self.model not in ("full", "simplified"):
            raise ValueError("model must be 'full' or 'simplified'")
        n_los = sum(c.is_los for c in self.components)
        if n_los != 1:
            raise ValueError(f"channel must contain exactly one LoS component, got {n_los}")

    @property
    def n_paths(self) -> int:
        return len(self.components)


def sample_channel(
    n_paths: int,
    k_factor_db: float | None,
    rng: np.random.Generator,
    los_aoa: SphericalDirection,
    model: str = "simplified",
    los_aod: SphericalDirection | None = None,
) -> ChannelInstance:
    """Draw one channel realization.

    The line-of-sight angles come from the caller (the predicted trajectory);
    reflected paths get angles drawn uniformly in [0, 2*pi) per component.
    Coefficients are scaled so that the expected total path power is one and
    the LoS power is k_factor times the expected combined reflected power.
    With a single path the K-factor is ignored and |gamma| = 1.
    """
    if n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    if model == "full" and los_aod is None:
        los_aod = SphericalDirection(0.0, 0.0)
    if n_paths == 1:
        comps = [MultipathComponent(1.0 + 0.0j, los_aoa, los_aod, True)]
        return ChannelInstance(tuple(comps), None, model)
    if k_factor_db is None:
        raise ValueError("k_factor_db required when n_paths > 1")
    k = 10.0 ** (k_factor_db / 10.0)
    gamma_los = math.sqrt(k / (k + 1.0))
    # Per-path second moment of the reflected coefficients.
    nlos_power = 1.0 / ((k + 1.0) * (n_paths - 1))
    comps = [MultipathComponent(complex(gamma_los), los_aoa, los_aod, True)]
    for _ in range(n_paths - 1):
        g = math.sqrt(nlos_power / 2.0) * complex(rng.standard_normal(), rng.standard_normal())
        aoa = _rand_angle_pair(rng)
        comps.append(MultipathComponent(g, aoa, _rand_aod(rng, model), False))
    return ChannelInstance(tuple(comps), k, model)


def _rand_angle_pair(rng: np.random.Generator) -> SphericalDirection:
    az, el = rng.uniform(0.0, 2.0 * math.pi, size=2)
    # Angles act only through sin/cos; store the canonical equivalent direction.
    return SphericalDirection.from_unit_vector(
        [math.cos(el) * math.sin(az), math.sin(el), math.cos(el) * math.cos(az)]
    )


def _rand_aod(rng: np.random.Generator, model: str) -> SphericalDirection | None:
    return _rand_angle_pair(rng) if model == "full" else None


def channel_matrix(
    channel: ChannelInstance, geom_rx: ArrayGeometry, geom_tx: ArrayGeometry
) -> np.ndarray:
    """Full-model channel matrix (N_R x N_T), scaled by sqrt(N_T * N_R)."""
    if channel.model != "full":
        raise ValueError("channel_matrix requires a full-model channel")
    mu = math.sqrt(geom_rx.n_elements * geom_tx.n_elements)
    h = np.zeros((geom_rx.n_elements, geom_tx.n_elements), dtype=complex)
    for c in channel.components:
        a_r = steering_vector(
            geom_rx.n_side, c.aoa.azimuth, c.aoa.elevation, geom_rx.spacing, geom_rx.wavelength
        ).values
        a_t = steering_vector(
            geom_tx.n_side, c.aod.azimuth, c.aod.elevation, geom_tx.spacing, geom_tx.wavelength
        ).values
        h += c.gamma * np.outer(a_r, np.conj(a_t))
    return mu * h


def gain_full(w_rx: WeightVector, h: np.ndarray, w_tx: WeightVector) -> float:
    """Beamforming gain |w_rx^H H w_tx|^2 of the full model."""
    wr = w_rx.flat()
    wt = w_tx.flat()
    if h.shape != (wr.size, wt.size):
        raise ValueError(f"channel matrix shape {h.shape} does not match weights")
    return float(np.abs(np.conj(wr) @ h @ wt) ** 2)


def uv_response(w: WeightVector, uv: np.ndarray) -> np.ndarray:
    """Complex array response sum(conj(w_xy) e^{j kd (x u + y v)}) per uv point.

    ``uv`` has shape (P, 2); the result has shape (P,). The squared magnitude is
    the line-of-sight beamforming gain (the sqrt(N) channel scale cancels the
    steering normalization).
    """
    uv = np.atleast_2d(np.asarray(uv, dtype=float))
    kd = _phase_factor(w.geometry)
    ex = np.exp(1j * kd * np.outer(np.arange(w.geometry.nx), uv[:, 0]))
    ey = np.exp(1j * kd * np.outer(np.arange(w.geometry.ny), uv[:, 1]))
    m = w.values.conj().T @ ex  # (ny, P)
    return np.einsum("yp,yp->p", ey, m)


def uv_gain(w: WeightVector, uv: np.ndarray) -> np.ndarray:
    """Line-of-sight beamforming gain at each uv point."""
    return np.abs(uv_response(w, uv)) ** 2


def gain_simplified(w_rx: WeightVector, channel: ChannelInstance) -> float:
    """Beamforming gain of the transmit-independent model.

    With a single line-of-sight path this reduces to the receive gain
    |sqrt(N_R) w^H a|^2 and is bounded by N_R.
    """
    uv = np.array([direction_to_uv(c.aoa).as_array() for c in channel.components])
    resp = uv_response(w_rx, uv)
    gammas = np.array([c.gamma for c in channel.components])
    return float(np.abs(np.sum(gammas * resp)) ** 2)


def received_signal(
    w_rx: WeightVector,
    h: np.ndarray,
    symbol: complex,
    tx_power: float,
    noise_power: float,
    rng: np.random.Generator,
    w_tx: WeightVector | None = None,
) -> complex:
    """One received sample: sqrt(P) w^H H w_T s plus combined thermal noise.

    ``h`` is a channel matrix (full model, requires ``w_tx``) or a channel
    vector (simplified model). The noise vector is circularly-symmetric complex
    Gaussian with per-element power ``noise_power``.
    """
    wr = w_rx.flat()
    if h.ndim == 2:
        if w_tx is None:
            raise ValueError("full-model received signal requires transmit weights")
        signal = np.conj(wr) @ h @ w_tx.flat()
    else:
        signal = np.conj(wr) @ h
    noise = math.sqrt(noise_power / 2.0) * (
        rng.standard_normal(wr.size) + 1j * rng.standard_normal(wr.size)
    )
    return complex(math.sqrt(tx_power) * signal * symbol + np.conj(wr) @ noise)


def predicted_beamwidth(
    n_side: int, spacing: float, wavelength: float, steer_angle: float
) -> float:
    """Half-power beamwidth in radians of an n_side-per-side square aperture.

    ``steer_angle`` is the azimuth or elevation of the beam; broadside is zero.
    Diverges toward the array plane, so |steer_angle| must stay below pi/2.
    """
    if abs(steer_angle) >= math.pi / 2:
        raise ValueError("beamwidth undefined at the array plane")
    return BEAMWIDTH_FACTOR * wavelength / (n_side * spacing * math.cos(steer_angle))


def predicted_beamwidth_uv(n_side: int, spacing: float, wavelength: float) -> float:
    """Half-power beamwidth in uv units; direction-invariant approximation."""
    return BEAMWIDTH_FACTOR * wavelength / (n_side * spacing)
