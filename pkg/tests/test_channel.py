import math

import numpy as np
import pytest

from covrage import (
    SphericalDirection,
    WeightVector,
    build_ura,
    channel_matrix,
    gain_full,
    gain_simplified,
    predicted_beamwidth,
    predicted_beamwidth_uv,
    received_signal,
    sample_channel,
    steering_vector,
    uv_gain,
)
from covrage.channel import MultipathComponent, ChannelInstance
from covrage.config import SPEED_OF_LIGHT

WL = SPEED_OF_LIGHT / 60e9


def matched_weights(n_side, spacing, wavelength, az, el):
    sv = steering_vector(n_side, az, el, spacing, wavelength)
    geom = build_ura(n_side, spacing, wavelength)
    return WeightVector(geom, sv.grid())


def test_steering_broadside_uniform():
    sv = steering_vector(8, 0.0, 0.0, WL / 2, WL)
    assert np.allclose(sv.values, 1.0 / 8.0)


def test_steering_direct_substitution():
    sv = steering_vector(2, math.radians(30), 0.0, WL / 2, WL)
    # element (1, 0): exp(j*pi*sin(30 deg)) / sqrt(4) = j/2
    assert sv.grid()[1, 0] == pytest.approx(0.5j, abs=1e-12)
    assert sv.values[1] == pytest.approx(0.5j, abs=1e-12)


def test_steering_unit_norm_random_directions():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        az = rng.uniform(-math.pi, math.pi)
        el = rng.uniform(-math.pi / 2, math.pi / 2)
        sv = steering_vector(4, az, el, WL / 2, WL)
        assert np.linalg.norm(sv.values) == pytest.approx(1.0, abs=1e-12)


def test_sample_channel_single_path():
    rng = np.random.default_rng(1)
    ch = sample_channel(1, None, rng, SphericalDirection(0.1, 0.2))
    assert ch.n_paths == 1
    assert abs(ch.components[0].gamma) == pytest.approx(1.0)
    assert ch.components[0].is_los


def test_sample_channel_rejects_bad_args():
    rng = np.random.default_rng(2)
    with pytest.raises(ValueError):
        sample_channel(0, 10.0, rng, SphericalDirection(0, 0))
    with pytest.raises(ValueError):
        sample_channel(3, None, rng, SphericalDirection(0, 0))


def test_sample_channel_k_factor_ratio():
    # Monte-Carlo oracle: LoS power over expected combined reflected power
    rng = np.random.default_rng(3)
    k_db = 25.0
    los = 0.0
    nlos = 0.0
    n = 100_000
    for _ in range(n):
        ch = sample_channel(3, k_db, rng, SphericalDirection(0, 0))
        los += abs(ch.components[0].gamma) ** 2
        nlos += sum(abs(c.gamma) ** 2 for c in ch.components[1:])
    ratio = los / nlos
    assert ratio == pytest.approx(10 ** (k_db / 10), rel=0.02)


def test_sample_channel_total_power_normalized():
    rng = np.random.default_rng(4)
    total = 0.0
    n = 100_000
    for _ in range(n):
        ch = sample_channel(3, 10.0, rng, SphericalDirection(0, 0))
        total += sum(abs(c.gamma) ** 2 for c in ch.components)
    assert total / n == pytest.approx(1.0, rel=0.01)


def test_channel_requires_exactly_one_los():
    comp = MultipathComponent(1.0, SphericalDirection(0, 0), None, False)
    with pytest.raises(ValueError):
        ChannelInstance((comp,), None, "simplified")


def test_gain_full_matched_reaches_product():
    rng = np.random.default_rng(5)
    aoa = SphericalDirection(0.35, -0.2)
    aod = SphericalDirection(-0.6, 0.1)
    ch = sample_channel(1, None, rng, aoa, model="full", los_aod=aod)
    geom = build_ura(4, WL / 2, WL)
    h = channel_matrix(ch, geom, geom)
    w_r = matched_weights(4, WL / 2, WL, aoa.azimuth, aoa.elevation)
    w_t = matched_weights(4, WL / 2, WL, aod.azimuth, aod.elevation)
    assert gain_full(w_r, h, w_t) == pytest.approx(16 * 16, rel=1e-9)


def test_gain_full_orthogonal_beam_is_null():
    # half-wavelength grid: matched beams one DFT bin apart are orthogonal
    aoa = SphericalDirection(0.0, 0.0)
    rng = np.random.default_rng(6)
    ch = sample_channel(1, None, rng, aoa, model="full", los_aod=aoa)
    geom = build_ura(4, WL / 2, WL)
    h = channel_matrix(ch, geom, geom)
    w_t = matched_weights(4, WL / 2, WL, 0.0, 0.0)
    u_next = 2.0 / 4.0  # first orthogonal spatial frequency
    w_r = matched_weights(4, WL / 2, WL, math.asin(u_next), 0.0)
    assert gain_full(w_r, h, w_t) == pytest.approx(0.0, abs=1e-18)


def test_gain_full_matches_naive_oracle():
    rng = np.random.default_rng(7)
    geom = build_ura(4, WL / 2, WL)
    for _ in range(10):
        ch = sample_channel(3, 12.0, rng, SphericalDirection(0.2, 0.1), model="full")
        h = channel_matrix(ch, geom, geom)
        w_r = WeightVector.from_phases(
            geom, rng.uniform(0, 2 * np.pi, (4, 4)), np.ones((4, 4), bool)
        )
        w_t = WeightVector.from_phases(
            geom, rng.uniform(0, 2 * np.pi, (4, 4)), np.ones((4, 4), bool)
        )
        # independent elementwise evaluation
        acc = 0.0 + 0.0j
        wr = w_r.flat()
        wt = w_t.flat()
        for i in range(16):
            for j in range(16):
                acc += np.conj(wr[i]) * h[i, j] * wt[j]
        assert gain_full(w_r, h, w_t) == pytest.approx(abs(acc) ** 2, rel=1e-12)


def test_gain_full_dimension_mismatch():
    geom = build_ura(4, WL / 2, WL)
    w = matched_weights(4, WL / 2, WL, 0, 0)
    with pytest.raises(ValueError):
        gain_full(w, np.zeros((9, 16), dtype=complex), w)


def test_gain_simplified_matched_1024():
    w = matched_weights(32, WL / 2, WL, 0.4, -0.3)
    ch = ChannelInstance(
        (MultipathComponent(1.0, SphericalDirection(0.4, -0.3), None, True),), None, "simplified"
    )
    g = gain_simplified(w, ch)
    assert g == pytest.approx(1024.0, rel=1e-9)
    assert 10 * math.log10(g) == pytest.approx(30.10, abs=0.01)


def test_gain_simplified_masked_equals_active_count():
    geom = build_ura(16, WL / 2, WL)
    rng = np.random.default_rng(8)
    active = rng.random((16, 16)) > 0.4
    aoa = SphericalDirection(-0.5, 0.25)
    sv = steering_vector(16, aoa.azimuth, aoa.elevation, WL / 2, WL)
    w = WeightVector(geom, np.where(active, sv.grid(), 0.0))
    ch = ChannelInstance((MultipathComponent(1.0, aoa, None, True),), None, "simplified")
    assert gain_simplified(w, ch) == pytest.approx(active.sum(), rel=1e-9)


def test_gain_simplified_cauchy_schwarz_bound():
    geom = build_ura(16, WL / 2, WL)
    rng = np.random.default_rng(9)
    for _ in range(200):
        w = WeightVector.from_phases(
            geom, rng.uniform(0, 2 * np.pi, (16, 16)), np.ones((16, 16), bool)
        )
        aoa = SphericalDirection(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5))
        ch = ChannelInstance((MultipathComponent(1.0, aoa, None, True),), None, "simplified")
        assert gain_simplified(w, ch) <= 256 + 1e-9


def test_simplified_equals_full_with_isotropic_transmitter():
    rng = np.random.default_rng(10)
    geom_r = build_ura(4, WL / 2, WL)
    geom_t = build_ura(1, WL / 2, WL)
    w_t = WeightVector(geom_t, np.ones((1, 1), dtype=complex))
    for _ in range(10):
        ch = sample_channel(3, 8.0, rng, SphericalDirection(0.3, -0.1), model="full")
        simplified = ChannelInstance(
            tuple(MultipathComponent(c.gamma, c.aoa, None, c.is_los) for c in ch.components),
            ch.k_factor,
            "simplified",
        )
        w_r = WeightVector.from_phases(
            geom_r, rng.uniform(0, 2 * np.pi, (4, 4)), np.ones((4, 4), bool)
        )
        h = channel_matrix(ch, geom_r, geom_t)
        assert gain_simplified(w_r, simplified) == pytest.approx(
            gain_full(w_r, h, w_t), rel=1e-9
        )


def test_matched_gain_invariant_under_global_phase():
    w = matched_weights(8, WL / 2, WL, 0.2, 0.3)
    rotated = WeightVector(w.geometry, w.values * np.exp(1j * 1.234))
    uv = np.array([[math.sin(0.2) * math.cos(0.3), math.sin(0.3)]])
    assert uv_gain(rotated, uv)[0] == pytest.approx(uv_gain(w, uv)[0], rel=1e-12)


def test_beamwidth_uv_direct_substitution():
    assert predicted_beamwidth_uv(32, WL / 2, WL) == pytest.approx(0.886 / 16)
    assert predicted_beamwidth_uv(32, WL / 2, WL) == pytest.approx(0.05538, abs=5e-6)


def test_beamwidth_broadside_matches_uv():
    assert predicted_beamwidth(32, WL / 2, WL, 0.0) == pytest.approx(
        predicted_beamwidth_uv(32, WL / 2, WL)
    )
    with pytest.raises(ValueError):
        predicted_beamwidth(32, WL / 2, WL, math.pi / 2)


def measured_halfpower_width(n_side, spacing, wavelength, u0, v0):
    """Bisection on the gain profile through (u0, v0) along u."""
    geom = build_ura(n_side, spacing, wavelength)
    sv = steering_vector(n_side, math.asin(u0 / math.cos(math.asin(v0))), math.asin(v0),
                         spacing, wavelength)
    w = WeightVector(geom, sv.grid())
    peak = uv_gain(w, np.array([[u0, v0]]))[0]

    def crossing(sign):
        lo, hi = 0.0, 1.5 * predicted_beamwidth_uv(n_side, spacing, wavelength)
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            g = uv_gain(w, np.array([[u0 + sign * mid, v0]]))[0]
            if g > peak / 2:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    return crossing(+1.0) + crossing(-1.0)


def test_measured_width_matches_prediction():
    rng = np.random.default_rng(11)
    predicted = predicted_beamwidth_uv(16, WL, WL)
    for _ in range(25):
        while True:
            u0, v0 = rng.uniform(-0.8, 0.8, size=2)
            if u0 * u0 + v0 * v0 <= 0.8**2:
                break
        width = measured_halfpower_width(16, WL, WL, u0, v0)
        assert width == pytest.approx(predicted, rel=0.02)


def test_received_signal_noise_power():
    geom = build_ura(4, WL / 2, WL)
    w = matched_weights(4, WL / 2, WL, 0.0, 0.0)
    rng = np.random.default_rng(12)
    ch = sample_channel(1, None, rng, SphericalDirection(0, 0), model="full")
    h = channel_matrix(ch, geom, geom)
    # noiseless signal is exact
    y0 = received_signal(w, h, 1.0, 4.0, 0.0, rng, w_tx=w)
    assert abs(y0) ** 2 == pytest.approx(4.0 * gain_full(w, h, w), rel=1e-12)
    # combined noise power equals the per-element noise power
    samples = [
        received_signal(w, np.zeros(16, dtype=complex), 1.0, 1.0, 0.5, rng)
        for _ in range(20_000)
    ]
    assert np.mean(np.abs(samples) ** 2) == pytest.approx(0.5, rel=0.05)
