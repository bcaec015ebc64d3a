"""Window statistics, grid-locked period, spectral extraction, harmonics."""
from __future__ import annotations

import math

import numpy as np
import pytest

from graphemc.analysis import (
    HarmonicFit,
    SteadyWindow,
    extract_period,
    grid_period,
    harmonic_fit,
    mean_shift_z,
    subtract_harmonics,
    window_stats,
)

DT = 0.0025
T_FULL = np.arange(2001) * DT
OSC = SteadyWindow(2.5, 5.0)

# Grid-locked periods for the 0.15 eV cases: (E_x kV/cm, N_k, T_grid ps).
GRID_PERIOD_TABLE = [
    (1.0, 120, 0.41687),
    (2.0, 120, 0.20843),
    (3.0, 120, 0.13896),
    (4.0, 120, 0.10422),
    (5.0, 120, 0.08337),
    (6.0, 120, 0.06948),
    (8.0, 120, 0.05211),
    (3.0, 60, 0.27791),
    (3.0, 120, 0.13896),
    (3.0, 240, 0.06948),
]


class TestSteadyWindow:
    def test_requires_order(self):
        with pytest.raises(ValueError):
            SteadyWindow(5.0, 3.0)

    def test_empty_window_raises(self):
        w = SteadyWindow(10.0, 12.0)
        with pytest.raises(ValueError):
            w.mask(T_FULL)

    def test_inclusive_bounds(self):
        w = SteadyWindow(3.0, 5.0)
        sel = w.mask(T_FULL)
        assert sel.sum() == 801
        w2 = SteadyWindow(2.5, 5.0)
        assert w2.mask(T_FULL).sum() == 1001


class TestWindowStats:
    def test_constant_series(self):
        y = np.full_like(T_FULL, 3.25)
        s = window_stats(T_FULL, y, SteadyWindow(3.0, 5.0))
        assert s.mean == 3.25
        assert s.rms == 0.0
        assert s.se == 0.0

    def test_pure_sine_integer_periods(self):
        # 0.25 ps period: exactly 8 periods in [3, 5] ps
        amp = 0.7
        y = amp * np.sin(2 * math.pi * T_FULL / 0.25)
        s = window_stats(T_FULL, y, SteadyWindow(3.0, 5.0))
        assert abs(s.mean) < amp * 2e-3
        assert s.rms == pytest.approx(amp / math.sqrt(2.0), rel=2e-3)

    def test_batch_means_se_reasonable_for_iid(self):
        rng = np.random.default_rng(0)
        y = rng.normal(0.0, 2.0, len(T_FULL))
        s = window_stats(T_FULL, y, SteadyWindow(3.0, 5.0))
        naive = 2.0 / math.sqrt(s.n_samples)
        assert 0.4 * naive < s.se < 2.5 * naive

    def test_needs_two_samples(self):
        with pytest.raises(ValueError):
            window_stats(np.array([1.0]), np.array([2.0]), SteadyWindow(0.0, 2.0))


class TestGridPeriod:
    @pytest.mark.parametrize("field,n_k,expected", GRID_PERIOD_TABLE)
    def test_reference_values_to_5_digits(self, field, n_k, expected):
        dk = 7.6 / n_k
        t = grid_period(dk, field)
        assert abs(t - expected) / expected < 1e-4

    def test_inverse_proportional_to_field(self):
        dk = 7.6 / 120
        base = grid_period(dk, 1.0)
        for field in (0.5, 2.0, 3.7, 9.0):
            assert grid_period(dk, field) == pytest.approx(base / field, rel=1e-12)

    def test_proportional_to_spacing(self):
        assert grid_period(2 * 7.6 / 120, 3.0) == pytest.approx(
            2 * grid_period(7.6 / 120, 3.0), rel=1e-12
        )

    def test_zero_field_undefined(self):
        with pytest.raises(ValueError):
            grid_period(0.06, 0.0)

    def test_sign_of_field_irrelevant(self):
        assert grid_period(0.06, -3.0) == grid_period(0.06, 3.0)


class TestExtractPeriod:
    def test_clean_synthetic_baseline_period(self):
        y = np.sin(2 * math.pi * T_FULL / 0.139)
        t_obs = extract_period(T_FULL, y, OSC)
        assert t_obs == pytest.approx(0.139, abs=5e-4)

    def test_noisy_synthetic_within_half_percent(self):
        rng = np.random.default_rng(1)
        for period in (0.139, 0.145, 0.0695):
            y = np.sin(2 * math.pi * T_FULL / period + 0.3)
            y = y + rng.normal(0.0, 0.2, len(y))   # SNR 5
            t_obs = extract_period(T_FULL, y, OSC)
            assert t_obs == pytest.approx(period, rel=5e-3)

    def test_white_noise_has_no_dominant_period(self):
        rng = np.random.default_rng(2)
        assert extract_period(T_FULL, rng.normal(0, 1, len(T_FULL)), OSC) is None

    def test_needs_enough_samples(self):
        t = np.arange(8) * DT
        with pytest.raises(ValueError):
            extract_period(t, np.sin(t), SteadyWindow(0.0, 1.0))

    def test_mean_offset_ignored(self):
        y = 5.0 + np.sin(2 * math.pi * T_FULL / 0.2)
        t_obs = extract_period(T_FULL, y, OSC)
        assert t_obs == pytest.approx(0.2, rel=2e-3)


class TestHarmonicFit:
    OMEGA = 2 * math.pi / 0.13896

    def test_exact_model_recovery(self):
        y = 4.2 + 0.8 * np.sin(self.OMEGA * T_FULL)
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 1)
        assert fit.a0 == pytest.approx(4.2, rel=1e-10)
        assert fit.b[0] == pytest.approx(0.8, rel=1e-10)
        assert abs(fit.c[0]) < 1e-10
        assert fit.residual_rms < 1e-10

    def test_underfit_leaves_second_harmonic(self):
        amp2 = 0.31
        y = (
            1.0
            + 0.9 * np.sin(self.OMEGA * T_FULL)
            + amp2 * np.cos(2 * self.OMEGA * T_FULL)
        )
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 1)
        assert fit.residual_rms == pytest.approx(amp2 / math.sqrt(2.0), rel=0.05)

    def test_noisy_coefficients_within_3se(self):
        rng = np.random.default_rng(3)
        b1, c2 = 0.6, 0.25
        sigma = 0.5
        y = (
            2.0
            + b1 * np.sin(self.OMEGA * T_FULL)
            + c2 * np.cos(2 * self.OMEGA * T_FULL)
            + rng.normal(0.0, sigma, len(T_FULL))
        )
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 2)
        n_w = OSC.mask(T_FULL).sum()
        se = sigma * math.sqrt(2.0 / n_w)   # OLS sine/cosine coefficient SE
        assert abs(fit.b[0] - b1) < 3 * se
        assert abs(fit.c[1] - c2) < 3 * se

    def test_residual_rms_non_increasing_in_order(self):
        rng = np.random.default_rng(4)
        y = (
            0.9 * np.sin(self.OMEGA * T_FULL)
            + 0.2 * np.sin(2 * self.OMEGA * T_FULL + 0.4)
            + rng.normal(0.0, 0.3, len(T_FULL))
        )
        rms = [
            harmonic_fit(T_FULL, y, OSC, self.OMEGA, h).residual_rms
            for h in (1, 2, 3, 4)
        ]
        assert all(rms[i + 1] <= rms[i] + 1e-12 for i in range(3))

    def test_window_shorter_than_period_rejected(self):
        # ~0.05 ps window against a 0.42 ps period: rank-deficient design
        t = np.arange(21) * DT
        y = np.sin(t)
        with pytest.raises(ValueError):
            harmonic_fit(t, y, SteadyWindow(0.0, 0.05), 2 * math.pi / 0.41687, 3)

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            harmonic_fit(T_FULL, T_FULL, OSC, -1.0, 1)
        with pytest.raises(ValueError):
            harmonic_fit(T_FULL, T_FULL, OSC, 1.0, 0)


class TestSubtractHarmonics:
    OMEGA = 2 * math.pi / 0.13896

    def test_pure_fitted_sine_leaves_level(self):
        a0, amp = 2.5, 0.9
        y = a0 + amp * np.sin(self.OMEGA * T_FULL)
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 1)
        corrected = subtract_harmonics(T_FULL, y, fit)
        assert np.max(np.abs(corrected - a0)) < 1e-9 * amp

    def test_constant_series_unchanged_by_zero_fit(self):
        fit = HarmonicFit(
            omega=self.OMEGA, order=1, a0=7.0, b=(0.0,), c=(0.0,), residual_rms=0.0
        )
        y = np.full_like(T_FULL, 7.0)
        assert np.array_equal(subtract_harmonics(T_FULL, y, fit), y)

    def test_subtraction_spans_full_record_not_just_window(self):
        y = 1.0 + 0.5 * np.sin(self.OMEGA * T_FULL)
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 1)
        corrected = subtract_harmonics(T_FULL, y, fit)
        early = T_FULL < 1.0
        assert np.max(np.abs(corrected[early] - 1.0)) < 1e-8

    def test_window_mean_preserved_on_noiseless_integer_periods(self):
        # Period 0.125 ps phase-locked to the window start: [3, 5] ps holds
        # exactly 16 periods and the oscillation's window mean vanishes.
        omega = 2 * math.pi / 0.125
        w = SteadyWindow(3.0, 5.0)
        y = 3.0 + 0.4 * np.sin(omega * (T_FULL - 3.0))
        fit = harmonic_fit(T_FULL, y, w, omega, 2)
        corrected = subtract_harmonics(T_FULL, y, fit)
        m_raw = window_stats(T_FULL, y, w).mean
        m_corr = window_stats(T_FULL, corrected, w).mean
        assert abs(m_corr - m_raw) < 1e-10 * abs(m_raw)

    def test_window_mean_shift_bounded_by_edge_effect(self):
        # Generic (non-integer-period) window: the shift equals the window
        # mean of the fitted oscillation, an O(amplitude/N) edge effect.
        y = 3.0 + 0.4 * np.sin(self.OMEGA * T_FULL + 0.2)
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 2)
        corrected = subtract_harmonics(T_FULL, y, fit)
        m_raw = window_stats(T_FULL, y, OSC).mean
        m_corr = window_stats(T_FULL, corrected, OSC).mean
        n_w = OSC.mask(T_FULL).sum()
        assert abs(m_corr - m_raw) < 2.0 * 0.4 / n_w

    def test_corrected_rms_reduced(self):
        rng = np.random.default_rng(5)
        y = 0.4 * np.sin(self.OMEGA * T_FULL) + rng.normal(0, 0.1, len(T_FULL))
        fit = harmonic_fit(T_FULL, y, OSC, self.OMEGA, 1)
        corrected = subtract_harmonics(T_FULL, y, fit)
        assert (
            window_stats(T_FULL, corrected, OSC).rms
            < window_stats(T_FULL, y, OSC).rms
        )


class TestMeanShiftZ:
    def test_identical_series(self):
        y = np.sin(T_FULL)
        delta, z = mean_shift_z(T_FULL, y, y, OSC)
        assert delta == 0.0
        assert z == 0.0

    def test_shift_in_se_units(self):
        rng = np.random.default_rng(6)
        y = rng.normal(0.0, 1.0, len(T_FULL))
        stats = window_stats(T_FULL, y, OSC)
        shifted = y + 2.0 * stats.se
        delta, z = mean_shift_z(T_FULL, y, shifted, OSC)
        assert delta == pytest.approx(2.0 * stats.se, rel=1e-9)
        assert z == pytest.approx(2.0, rel=1e-9)
