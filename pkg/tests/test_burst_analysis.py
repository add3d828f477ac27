#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
脉冲分析测试：特征提取、标度律拟合、平台检测、Dicke 梯子参考
"""

import math

import numpy as np
import pytest

from src.algorithms.burst_analysis import (BurstFeatures, SizeRun, detect_plateau, extract_burst,
                                           fit_burst_scalings, fit_scaling, half_max_right_edge,
                                           steady_state_summary)
from src.algorithms.dicke_ladder import (default_ladder_horizon, dicke_delay_estimate, dicke_ladder_reference,
                                         ladder_rates)
from src.algorithms.lindblad_solver import EvolutionConfig, evolve_master
from src.algorithms.quantum_trajectories import QuantumJumpSimulator, TrajectoryConfig, run_ensemble
from src.algorithms.states import make_initial_state
from src.verification import check_dicke_scaling

GAUSSIAN_FWHM = 2 * math.sqrt(math.log(2))


class TestExtractBurst:

    def test_gaussian(self):
        t = np.linspace(0.0, 4.0, 401)
        features = extract_burst(t, np.exp(-(t - 2) ** 2))
        assert features.t_peak == pytest.approx(2.0, abs=0.01)
        assert features.t_delay == features.t_peak
        assert features.i_max == pytest.approx(1.0, abs=1e-4)
        assert features.width == pytest.approx(GAUSSIAN_FWHM, abs=0.01)
        assert features.flags == ()

    def test_parabolic_refinement(self):
        # 峰值落在两个采样点之间
        t = np.linspace(0.0, 4.0, 41)
        features = extract_burst(t, np.exp(-(t - 2.03) ** 2))
        assert features.t_peak == pytest.approx(2.03, abs=0.005)

    def test_monotone_decay(self):
        t = np.linspace(0.0, 5.0, 101)
        features = extract_burst(t, np.exp(-t))
        assert not features.has_peak
        assert features.flags == ('no_interior_peak',)
        assert features.i_max == 1.0
        assert features.t_peak == 0.0
        assert math.isnan(features.width)

    def test_left_edge_above_half(self):
        t = np.linspace(0.0, 4.0, 401)
        features = extract_burst(t, np.exp(-(t - 0.3) ** 2))
        assert features.flags == ('left_edge_above_half',)
        assert features.width == pytest.approx(GAUSSIAN_FWHM, abs=0.02)

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            extract_burst(np.arange(9.0), np.ones(9))

    def test_non_increasing_times(self):
        t = np.linspace(0.0, 1.0, 20)
        t[5] = t[4]
        with pytest.raises(ValueError):
            extract_burst(t, np.ones(20))

    def test_half_max_right_edge(self):
        t = np.linspace(0.0, 4.0, 401)
        assert half_max_right_edge(t, np.exp(-(t - 2) ** 2)) == pytest.approx(2 + GAUSSIAN_FWHM / 2, abs=1e-3)


class TestFitScaling:

    def test_exact_power_law(self):
        fit = fit_scaling([(N, 3.0 * N ** 2) for N in (4, 6, 8, 10)])
        assert fit.exponent == pytest.approx(2.0, abs=1e-10)
        assert fit.prefactor == pytest.approx(3.0, rel=1e-10)
        assert fit.r_squared == pytest.approx(1.0)
        assert np.allclose(fit.residuals, 0.0, atol=1e-12)

    def test_log_over_n(self):
        fit = fit_scaling([(N, 5.0 * math.log(N) / N) for N in (4, 6, 8)], 'log_over_n')
        assert fit.prefactor == pytest.approx(5.0, rel=1e-12)
        assert fit.exponent is None
        assert fit.predict(6) == pytest.approx(5.0 * math.log(6) / 6)

    def test_inverse_n(self):
        fit = fit_scaling([(N, 2.0 / N) for N in (3, 5, 7, 9)], 'inverse_n')
        assert fit.prefactor == pytest.approx(2.0, rel=1e-12)

    def test_quadratic_in_n(self):
        fit = fit_scaling([(N, N * (N + 2) / 4.0) for N in range(4, 13)], 'quadratic')
        assert np.allclose(fit.params, (0.0, 0.5, 0.25), atol=1e-9)
        assert fit.r_squared == pytest.approx(1.0)
        assert fit.exponent is None
        assert fit.predict(20) == pytest.approx(110.0)

    def test_quadratic_in_inverse_n(self):
        fit = fit_scaling([(N, 1.0 + 2.0 / N + 3.0 / N ** 2) for N in (4, 6, 8, 10, 12)], 'quadratic_inverse')
        assert np.allclose(fit.params, (1.0, 2.0, 3.0), atol=1e-9)
        assert fit.predict(5) == pytest.approx(1.0 + 0.4 + 0.12)

    def test_noisy_power_law(self, rng):
        sizes = np.arange(4, 20)
        values = 0.5 * sizes ** 1.5 * np.exp(0.01 * rng.normal(size=len(sizes)))
        fit = fit_scaling(zip(sizes, values))
        assert fit.exponent == pytest.approx(1.5, abs=0.05)
        assert 0.99 < fit.r_squared <= 1.0

    def test_too_few_points(self):
        with pytest.raises(ValueError):
            fit_scaling([(4, 1.0), (6, 2.0)])

    def test_nonpositive_values(self):
        with pytest.raises(ValueError):
            fit_scaling([(4, 1.0), (6, 0.0), (8, 2.0)])

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            fit_scaling([(4, 1.0), (6, 2.0), (8, 3.0)], 'exponential')


class TestFitBurstScalings:

    def test_skips_sparse_series(self):
        by_size = {}
        for N in (4, 6, 8):
            by_size[N] = {
                'I_total': BurstFeatures(N ** 2, math.log(N) / N, 1.0 / N, math.log(N) / N),
                'I_0': BurstFeatures(1.0, 0.0, float('nan'), 0.0, ('no_interior_peak',)),
            }
        fits = fit_burst_scalings(by_size)
        assert fits['I_total']['i_max']['params'][1] == pytest.approx(2.0)
        assert fits['I_total']['width']['params'][1] == pytest.approx(-1.0)
        assert fits['I_total']['t_delay']['params'][0] == pytest.approx(1.0)
        assert fits['I_total']['delay_fit_excluded'] is True
        assert np.allclose(fits['I_total']['i_max_quadratic']['params'], (0.0, 0.0, 1.0), atol=1e-9)
        assert np.allclose(fits['I_total']['width_quadratic_inverse']['params'], (0.0, 1.0, 0.0), atol=1e-9)
        assert fits['I_0']['i_max'] is None
        assert fits['I_0']['delay_fit_excluded'] is False


def plateau_signal(t):
    burst = np.exp(-(t - 1.0) ** 2 / 0.05)
    shelf = 0.15 * (1.0 - np.tanh((t - 6.0) / 0.2))
    return burst + shelf


class TestPlateau:

    def test_detects_shelf(self):
        t = np.linspace(0.0, 10.0, 2001)
        y = plateau_signal(t)
        after = half_max_right_edge(t, y)
        window = detect_plateau(t, y, gamma_0=1.0, gamma_1=1.0, after_time=after)
        assert window is not None
        assert 1.4 < window.t_start < 2.0
        assert 5.3 < window.t_end < 5.9
        assert window.level == pytest.approx(0.3, abs=0.01)
        assert window.duration >= 1.0

    def test_too_short(self):
        t = np.linspace(0.0, 10.0, 2001)
        assert detect_plateau(t, plateau_signal(t), gamma_0=1.0, gamma_1=0.1, after_time=1.2) is None

    def test_plain_burst(self):
        t = np.linspace(0.0, 10.0, 2001)
        y = np.exp(-(t - 2.0) ** 2)
        assert detect_plateau(t, y, 1.0, 1.0, after_time=half_max_right_edge(t, y)) is None

    def test_zero_signal(self):
        t = np.linspace(0.0, 1.0, 11)
        assert detect_plateau(t, np.zeros(11), 1.0, 1.0) is None


class TestDickeLadder:

    def test_single_emitter(self):
        t = np.linspace(0.0, 5.0, 51)
        series = dicke_ladder_reference(1, 0.7, times=t)
        assert np.allclose(series.intensity, 0.7 * np.exp(-0.7 * t), atol=1e-9)
        assert series.N == 1

    def test_rates(self):
        rates = ladder_rates(10, 1.0)
        assert rates.max() == 30.0
        assert rates[0] == 10.0 and rates[-1] == 0.0

    def test_probability_conserved(self):
        series = dicke_ladder_reference(12, 1.0, n_samples=301)
        assert np.allclose(series.populations.sum(axis=1), 1.0, atol=1e-9)
        assert series.n_total[0] == 12.0
        assert series.n_total[-1] < 1e-3

    def test_default_horizon(self):
        series = dicke_ladder_reference(8, 2.0)
        assert len(series.times) == 2001
        assert series.times[-1] == pytest.approx(default_ladder_horizon(8, 2.0))

    def test_burst_delay_near_estimate(self):
        series = dicke_ladder_reference(64, 1.0)
        features = extract_burst(series.times, series.intensity)
        assert features.has_peak
        assert features.t_delay == pytest.approx(dicke_delay_estimate(64, 1.0), rel=0.3)

    def test_invalid_arguments(self):
        with pytest.raises(ValueError):
            dicke_ladder_reference(0, 1.0)
        with pytest.raises(ValueError):
            dicke_ladder_reference(4, 1.0, times=np.array([0.0, 1.0, 0.5]))

    def test_collective_scaling(self):
        result = check_dicke_scaling()
        assert result.passed, result.detail


class TestSteadyStateSummary:

    def test_master_vacuum(self, kc_model_4):
        rho0 = make_initial_state('vacuum', 4).to_density()
        evolution = evolve_master(rho0, kc_model_4.hamiltonian, kc_model_4.channels,
                                  EvolutionConfig(t_max=0.5), model=kc_model_4)
        (summary,) = steady_state_summary([SizeRun(N=4, evolution=evolution)])
        assert summary.excitation_density == 0.0
        assert summary.trivial_fraction == pytest.approx(1.0)
        assert summary.steady_reached and summary.steady_time == 0.0
        assert math.isnan(summary.entropy_mean)

    def test_ensemble_only(self, kc_model_4):
        config = TrajectoryConfig(t_max=0.2, dt=1e-3, n_traj=3, record_cadence=0.05)
        ensemble = run_ensemble(QuantumJumpSimulator(kc_model_4), make_initial_state('inverted', 4), config)
        (summary,) = steady_state_summary([SizeRun(N=4, ensemble=ensemble)])
        assert summary.excitation_density == pytest.approx(ensemble.mean('n')[-1] / 4)
        assert summary.entropy_mean == ensemble.mean_final_entropy
        assert not summary.steady_reached

    def test_sorted_and_validated(self):
        with pytest.raises(ValueError):
            steady_state_summary([SizeRun(N=5)])
