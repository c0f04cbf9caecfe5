"""
Unit tests for the continuous-time pixel bandwidth model.
"""

import math
from dataclasses import replace

import numpy as np
import pytest

from src.errors import InvalidArgumentError
from src.pixel_model import (
    PixelBandwidthParams,
    bandwidth_hz,
    continuous_matrices,
    cutoff_frequency_hz,
    damping_ratio,
    dominant_bandwidth_hz,
    dominant_cutoff,
    dominant_pole_matrices,
    effective_log_radiance,
    format_params,
    frequency_response,
    lux_to_illuminance_scale,
    natural_frequency,
    omega_c_dom_min,
    pole_summary,
    tau_in,
    tau_mil,
)


def unit_params(**overrides):
    """A_amp = A_loop = τ_out = c_in = c_mil = 1."""
    base = dict(amp_gain=1.0, loop_gain=1.0, tau_out=1.0, c_in=1.0, c_mil=1.0,
                omega_c_sf=10.0, omega_c_diff=20.0, black_level=1.0)
    base.update(overrides)
    return PixelBandwidthParams(**base)


def random_params(rng):
    return PixelBandwidthParams(
        amp_gain=rng.uniform(10, 200),
        loop_gain=rng.uniform(1, 10),
        tau_out=rng.uniform(1e-5, 1e-3),
        c_in=rng.uniform(0.1, 5),
        c_mil=rng.uniform(0.01, 0.5),
        omega_c_sf=rng.uniform(1e4, 1e5),
        omega_c_diff=rng.uniform(1.1e5, 5e5),
        black_level=rng.uniform(1, 100),
    )


class TestParams:
    """Test parameter validation and serialization."""

    def test_defaults_valid(self):
        p = PixelBandwidthParams.default()
        assert p.omega_c_diff > p.omega_c_sf
        assert p.black_level > 0

    def test_rejects_non_positive(self):
        with pytest.raises(InvalidArgumentError):
            unit_params(tau_out=0.0)
        with pytest.raises(InvalidArgumentError):
            unit_params(black_level=-1.0)

    def test_rejects_cutoff_order(self):
        """Differencing amplifier must be faster than the source follower."""
        with pytest.raises(InvalidArgumentError):
            unit_params(omega_c_sf=20.0, omega_c_diff=10.0)

    def test_rejects_c_in_below_floor(self):
        with pytest.raises(InvalidArgumentError):
            unit_params(c_in=1e-4)

    def test_dict_round_trip(self):
        p = unit_params(amp_gain=3.5)
        assert PixelBandwidthParams.from_dict(p.to_dict()) == p

    def test_unknown_key(self):
        with pytest.raises(InvalidArgumentError):
            PixelBandwidthParams.from_dict({'gain': 1.0})


class TestCoefficientFunctions:
    """Test the radiance-dependent coefficients."""

    def test_tau_in(self):
        p = unit_params(c_in=2.0)
        assert abs(tau_in(p, 0.0) - 2.0) < 1e-15
        assert abs(tau_in(p, math.log(10)) - 0.2) < 1e-15

    def test_tau_mil(self):
        p = unit_params(c_mil=1.0)
        assert abs(tau_mil(p, 0.0) - 1.0) < 1e-15
        assert abs(tau_mil(p, math.log(4)) - 0.25) < 1e-15

    def test_time_constants_match_formula(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            p = random_params(rng)
            u = rng.uniform(-3, 12)
            assert tau_in(p, u) == pytest.approx(p.c_in * math.exp(-u), rel=1e-14)
            assert tau_mil(p, u) == pytest.approx(p.c_mil * math.exp(-u), rel=1e-14)

    def test_damping_ratio_unit_params(self):
        """ζ = 4 / (2·√4) = 1."""
        assert abs(damping_ratio(unit_params(), 0.0) - 1.0) < 1e-14

    def test_damping_ratio_grows_with_radiance(self):
        p = unit_params()
        assert damping_ratio(p, math.log(1e6)) > damping_ratio(p, 0.0)

    def test_damping_ratio_scale_invariance(self):
        """Scaling every time constant leaves ζ unchanged."""
        p = PixelBandwidthParams.default()
        s = 3.0
        scaled = replace(p, tau_out=p.tau_out * s, c_in=p.c_in * s, c_mil=p.c_mil * s)
        for u in (0.0, 3.0, 8.0):
            assert damping_ratio(scaled, u) == pytest.approx(damping_ratio(p, u), rel=1e-12)

    def test_natural_frequency_unit_params(self):
        assert abs(natural_frequency(unit_params(), 0.0) - 1.0) < 1e-14

    def test_natural_frequency_identity(self):
        """ωₙ²·τ_out·(τ_in + τ_mil) = A_loop + 1."""
        rng = np.random.default_rng(2)
        for _ in range(20):
            p = random_params(rng)
            u = rng.uniform(0, 12)
            wn = natural_frequency(p, u)
            lhs = wn * wn * p.tau_out * (tau_in(p, u) + tau_mil(p, u))
            assert abs(lhs - (p.loop_gain + 1)) < 1e-12 * (p.loop_gain + 1)

    def test_natural_frequency_doubling(self):
        """Doubling L scales ωₙ by √2."""
        p = PixelBandwidthParams.default()
        u = 5.0
        ratio = natural_frequency(p, u + math.log(2)) / natural_frequency(p, u)
        assert abs(ratio - math.sqrt(2)) < 1e-12

    def test_dominant_cutoff_unit_params(self):
        """2 / (1 + 2·1) = 2/3."""
        assert abs(dominant_cutoff(unit_params(), 0.0) - 2.0 / 3.0) < 1e-14

    def test_dominant_cutoff_proportional(self):
        p = PixelBandwidthParams.default()
        for u in (-1.0, 2.0, 7.5):
            assert dominant_cutoff(p, u + math.log(2)) == pytest.approx(
                2 * dominant_cutoff(p, u), rel=1e-12)

    def test_dominant_cutoff_vectorized(self):
        p = PixelBandwidthParams.default()
        us = np.array([1.0, 4.0, 9.0])
        assert np.allclose(dominant_cutoff(p, us), [dominant_cutoff(p, u) for u in us], rtol=1e-14)

    def test_omega_min_definition(self):
        p = PixelBandwidthParams.default()
        assert omega_c_dom_min(p) == dominant_cutoff(p, math.log(p.black_level))

    def test_omega_min_monotone_in_black_level(self):
        p = PixelBandwidthParams.default()
        assert omega_c_dom_min(replace(p, black_level=80.0)) > omega_c_dom_min(p)

    def test_dominant_pole_far_below_fixed_stages(self):
        """In the dark the photoreceptor is much slower than sf/diff."""
        p = PixelBandwidthParams.default()
        assert omega_c_dom_min(p) < 0.01 * min(p.omega_c_sf, p.omega_c_diff)


class TestStateSpace:
    """Test the 4th-order state-space matrices."""

    def test_equilibrium(self):
        """A(u)·(0, u, u, u) + B(u)·u = 0."""
        p = PixelBandwidthParams.default()
        for u in (-2.0, 0.0, 3.7, 10.0):
            A, B, _ = continuous_matrices(p, u)
            x = np.array([0.0, u, u, u])
            assert np.allclose(A @ x + B[:, 0] * u, 0.0, atol=1e-9 * max(1.0, abs(B[0, 0] * u)))

    def test_structure(self):
        """Sparsity pattern and output selection."""
        A, B, C = continuous_matrices(PixelBandwidthParams.default(), 4.0)
        expected_nonzero = {(0, 0), (0, 1), (1, 0), (2, 1), (2, 2), (3, 2), (3, 3)}
        nonzero = {(i, j) for i in range(4) for j in range(4) if A[i, j] != 0}
        assert nonzero == expected_nonzero
        assert B.shape == (4, 1)
        assert np.count_nonzero(B) == 1 and B[0, 0] > 0
        assert np.array_equal(C, [[0, 0, 1, 0], [0, 0, 0, 1]])

    def test_entries_from_coefficients(self):
        rng = np.random.default_rng(4)
        p = random_params(rng)
        u = 5.3
        zeta, wn = damping_ratio(p, u), natural_frequency(p, u)
        A, B, _ = continuous_matrices(p, u)
        assert A[0, 0] == pytest.approx(-2 * zeta * wn, rel=1e-14)
        assert A[0, 1] == pytest.approx(-wn * wn, rel=1e-14)
        assert A[1, 0] == 1.0
        assert A[2, 1] == p.omega_c_sf and A[2, 2] == -p.omega_c_sf
        assert A[3, 2] == p.omega_c_diff and A[3, 3] == -p.omega_c_diff
        assert B[0, 0] == pytest.approx(wn * wn, rel=1e-14)

    def test_output_matrix_is_a_copy(self):
        _, _, C = continuous_matrices(PixelBandwidthParams.default(), 1.0)
        C[0, 0] = 5.0
        _, _, C2 = continuous_matrices(PixelBandwidthParams.default(), 1.0)
        assert C2[0, 0] == 0.0


class TestBandwidth:
    """Test -3 dB bandwidth analysis."""

    def test_first_order_cutoff(self):
        """A pure 1st-order stage has its -3 dB point at ω/2π."""
        p = PixelBandwidthParams.default()
        u = math.log(500.0)
        A, B, C = dominant_pole_matrices(p, u)
        f = cutoff_frequency_hz(A, B, C[0])
        expected = dominant_cutoff(p, u) / (2 * math.pi)
        assert abs(f / expected - 1) < 1e-5

    def test_dc_gain_is_unity(self):
        h = frequency_response(PixelBandwidthParams.default(), 1000.0, [1e-6])
        assert abs(abs(h[0]) - 1.0) < 1e-9

    def test_low_light_proportionality(self):
        """Doubling L doubles the bandwidth when the photoreceptor dominates."""
        p = replace(PixelBandwidthParams.default(), black_level=1.0)
        ratio = bandwidth_hz(p, 400.0) / bandwidth_hz(p, 200.0)
        assert 1.9 <= ratio <= 2.1

        slope = math.log(ratio) / math.log(401.0 / 201.0)
        assert 0.95 <= slope <= 1.05

    def test_saturation_slope(self):
        p = PixelBandwidthParams.default()
        slope = math.log(bandwidth_hz(p, 2e6) / bandwidth_hz(p, 1e6)) / math.log(2)
        assert slope < 0.2

    def test_monotone(self):
        p = PixelBandwidthParams.default()
        values = [bandwidth_hz(p, L) for L in np.logspace(0, 6, 25)]
        assert all(b >= a for a, b in zip(values, values[1:]))

    def test_span_at_1000_lux(self):
        """1%-100% intensity at 1 000 lux brackets roughly 50-2500 Hz."""
        p = PixelBandwidthParams.default()
        scale = lux_to_illuminance_scale(1000.0)
        low = bandwidth_hz(p, 0.01 * scale)
        high = bandwidth_hz(p, scale)
        assert 25.0 <= low <= 100.0
        assert 1250.0 <= high <= 5000.0

    def test_dominant_pole_agrees_in_low_light(self):
        p = PixelBandwidthParams.default()
        assert bandwidth_hz(p, 100.0) == pytest.approx(dominant_bandwidth_hz(p, 100.0), rel=0.02)

    def test_negative_radiance(self):
        with pytest.raises(InvalidArgumentError):
            bandwidth_hz(PixelBandwidthParams.default(), -1.0)


class TestRadiance:
    """Test effective radiance helpers."""

    def test_effective_log_radiance(self):
        assert effective_log_radiance(60.0, 40.0) == pytest.approx(math.log(100.0))

    def test_floor(self):
        assert effective_log_radiance(-5.0, 1.0) == pytest.approx(math.log(1e-3))

    def test_array_input(self):
        u = effective_log_radiance(np.array([0.0, 10.0]), 10.0)
        assert np.allclose(u, np.log([10.0, 20.0]))

    def test_format_params(self):
        text = format_params(PixelBandwidthParams.default(), radiance=1000.0)
        assert "L_dark" in text
        assert "@ L=1000:" in text
        assert "bandwidth:" in text

    def test_pole_summary_matches_coefficients(self):
        params = PixelBandwidthParams.default()
        u = math.log(1000.0 + params.black_level)
        poles = pole_summary(params, u)
        assert poles["u"] == u
        assert poles["tau_in"] == pytest.approx(tau_in(params, u))
        assert poles["tau_mil"] == pytest.approx(tau_mil(params, u))
        assert poles["zeta"] == pytest.approx(damping_ratio(params, u))
        assert poles["omega_n"] == pytest.approx(natural_frequency(params, u))
        assert poles["omega_dom"] == pytest.approx(dominant_cutoff(params, u))
        text = format_params(params, radiance=1000.0)
        assert f"{poles['zeta']:.3f}" in text
        assert f"{poles['omega_dom']:.1f} rad/s" in text
