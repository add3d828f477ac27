#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
量子跳跃轨迹测试：单步格式、种子可复现性、系综统计
"""

import numpy as np
import pytest

from src.algorithms.chain_operators import ChainModel, ChainParams
from src.algorithms.quantum_trajectories import (QuantumJumpSimulator, TrajectoryConfig, aggregate_records,
                                                 effective_hamiltonian, run_ensemble, trajectory_seed)
from src.algorithms.states import basis_state, make_initial_state
from src.errors import NumericalError
from src.verification import check_trajectory_equivalence


class ZeroRandom:
    """random() 恒为 0：第一个速率非零的通道必然跳跃"""

    def random(self):
        return 0.0


class OneRandom:
    def random(self):
        return 0.999999


class TestSingleStep:

    def test_forced_jump(self, kc_model_3):
        simulator = QuantumJumpSimulator(kc_model_3)
        state, event = simulator.step_trajectory(make_initial_state('inverted', 3), 1e-3, ZeroRandom())
        assert event is not None
        assert event.channel == 2
        assert event.pre_norm == pytest.approx(3.0)
        assert state.norm() == pytest.approx(1.0)
        # 对称的两激发态
        expected = np.zeros(8, dtype=complex)
        expected[[0b110, 0b101, 0b011]] = 1 / np.sqrt(3)
        assert np.allclose(state.amplitudes, expected)

    def test_no_jump_keeps_norm(self, kc_model_4, rng):
        simulator = QuantumJumpSimulator(kc_model_4)
        psi = rng.normal(size=16) + 1j * rng.normal(size=16)
        state = basis_state(0, 4)
        state.amplitudes = psi / np.linalg.norm(psi)
        new_state, event = simulator.step_trajectory(state, 1e-3, OneRandom())
        assert event is None
        assert new_state.norm() == pytest.approx(1.0, abs=1e-12)
        assert new_state.time == pytest.approx(1e-3)

    def test_dt_too_large(self, kc_model_3):
        simulator = QuantumJumpSimulator(kc_model_3)
        with pytest.raises(NumericalError, match='dt too large'):
            simulator.step_trajectory(make_initial_state('inverted', 3), 1.0, ZeroRandom())

    def test_vacuum_never_jumps(self, kc_model_4, rng):
        simulator = QuantumJumpSimulator(kc_model_4)
        state = make_initial_state('vacuum', 4)
        for _ in range(50):
            state, event = simulator.step_trajectory(state, 1e-2, rng)
            assert event is None
        assert abs(state.amplitudes[0]) == pytest.approx(1.0)

    def test_effective_hamiltonian(self, kc_model_4):
        h_eff = effective_hamiltonian(kc_model_4.hamiltonian, kc_model_4.channels).matrix.toarray()
        anti = (h_eff - h_eff.conj().T) / 2j
        decay = sum(c.rate * c.number_op.toarray() for c in kc_model_4.channels)
        assert np.allclose(anti, -0.5 * decay, atol=1e-14)
        assert np.allclose((h_eff + h_eff.conj().T) / 2, kc_model_4.hamiltonian.matrix.toarray(), atol=1e-14)


class TestSeeds:

    def test_matches_spawned_children(self):
        children = np.random.SeedSequence(777).spawn(5)
        expected = int(children[3].generate_state(1, dtype=np.uint64)[0])
        assert trajectory_seed(777, 3) == expected

    def test_distinct_indices(self):
        assert len({trajectory_seed(1, k) for k in range(100)}) == 100

    def test_bad_master_seed(self):
        with pytest.raises(ValueError):
            TrajectoryConfig(master_seed=-1)


def short_config(**overrides):
    values = dict(t_max=0.5, dt=1e-3, master_seed=99, n_traj=8, record_cadence=0.05)
    values.update(overrides)
    return TrajectoryConfig(**values)


class TestTrajectory:

    def test_reproducible(self, kc_model_4):
        simulator = QuantumJumpSimulator(kc_model_4)
        psi0 = make_initial_state('inverted', 4)
        first = simulator.run_trajectory(psi0, short_config(), 5)
        second = simulator.run_trajectory(psi0, short_config(), 5)
        assert first.seed == second.seed
        assert [(e.time, e.channel) for e in first.events] == [(e.time, e.channel) for e in second.events]
        assert np.array_equal(first.n_total, second.n_total)
        assert np.array_equal(first.final_state.amplitudes, second.final_state.amplitudes)

    def test_record_layout(self, kc_model_4):
        config = short_config()
        record = QuantumJumpSimulator(kc_model_4).run_trajectory(make_initial_state('inverted', 4), config, 0)
        assert np.allclose(record.times, np.linspace(0.0, 0.5, 11))
        assert record.intensities.shape == (11, 3)
        assert record.momentum_occ.shape == (11, 4)
        assert record.n_total[0] == 4.0
        # 每次跳跃恰好带走一个激发
        assert record.n_total[-1] == pytest.approx(4 - len(record.events), abs=1e-9)

    def test_exact_cadence(self, kc_model_4):
        # 0.05 不是 0.00073 的整数倍，子步长缩短以保证记录时刻正好是 0.05 的整数倍
        config = short_config(t_max=0.52, dt=7.3e-4, record_cadence=0.05)
        record = QuantumJumpSimulator(kc_model_4).run_trajectory(make_initial_state('inverted', 4), config, 1)
        assert np.array_equal(record.times, config.sample_times())
        assert np.allclose(record.times[:-1], 0.05 * np.arange(11), rtol=0, atol=1e-15)
        assert record.times[-1] == 0.52
        assert all(h <= 7.3e-4 for _, h in config.segment_steps())
        assert sum(count * h for count, h in config.segment_steps()) == pytest.approx(0.52, abs=1e-12)

    def test_unnormalized_initial_state(self, kc_model_3):
        psi0 = make_initial_state('inverted', 3)
        psi0.amplitudes = 2 * psi0.amplitudes
        with pytest.raises(ValueError):
            QuantumJumpSimulator(kc_model_3).run_trajectory(psi0, short_config(), 0)


class TestEnsemble:

    def test_first_jump_statistics(self, kc_model_3):
        # 全激发态只能经 ξ=2 通道发射，总速率 3γ_2
        gamma_2 = kc_model_3.rates[2]
        t_max = 0.2 / gamma_2
        config = TrajectoryConfig(t_max=t_max, dt=t_max / 100, master_seed=2024, n_traj=1000, record_cadence=t_max)
        result = run_ensemble(QuantumJumpSimulator(kc_model_3), make_initial_state('inverted', 3), config)
        jumped = np.mean([len(r.events) > 0 for r in result.records])
        expected = 1.0 - np.exp(-0.6)
        standard_error = np.sqrt(expected * (1 - expected) / 1000)
        assert abs(jumped - expected) < 4 * standard_error

    def test_photon_bookkeeping(self, kc_model_4):
        # 每次跳跃记一个光子；累计光子数与条件强度的时间积分之差是鞅，方差等于期望光子数
        config = TrajectoryConfig(t_max=1.5, dt=1e-3, master_seed=31, n_traj=100, record_cadence=0.01)
        result = run_ensemble(QuantumJumpSimulator(kc_model_4), make_initial_state('inverted', 4), config)
        spacing = np.diff(result.times)
        total_photons = 0
        for column in result.channel_columns:
            counted = np.cumsum(result.photon_counts[column]) / result.n_traj
            intensity = result.mean(column)
            expected = np.cumsum(0.5 * (intensity[:-1] + intensity[1:]) * spacing)
            tolerance = 4.0 * np.sqrt(np.maximum(expected, 1e-3) / result.n_traj) + 1e-2
            assert np.all(np.abs(counted - expected) <= tolerance), column
            assert np.allclose(result.emission_rates[column] * result.n_traj * spacing, result.photon_counts[column])
            total_photons += int(result.photon_counts[column].sum())
        assert total_photons == sum(len(r.events) for r in result.records)
        assert total_photons == pytest.approx(result.n_traj * (4 - result.mean('n')[-1]), abs=1e-6)

    def test_order_independent(self, kc_model_4):
        config = short_config()
        simulator = QuantumJumpSimulator(kc_model_4)
        psi0 = make_initial_state('inverted', 4)
        records = [simulator.run_trajectory(psi0, config, k) for k in range(config.n_traj)]
        forward = aggregate_records(records, kc_model_4, config)
        backward = aggregate_records(list(reversed(records)), kc_model_4, config)
        for name in forward.stats:
            assert np.array_equal(forward.mean(name), backward.mean(name))
        assert np.array_equal(forward.entropy_hist[0], backward.entropy_hist[0])

    def test_parallel_matches_serial(self, kc_model_4):
        simulator = QuantumJumpSimulator(kc_model_4)
        psi0 = make_initial_state('inverted', 4)
        serial = run_ensemble(simulator, psi0, short_config(workers=1))
        parallel = run_ensemble(simulator, psi0, short_config(workers=2))
        assert [r.traj_index for r in parallel.records] == list(range(8))
        assert np.array_equal(serial.mean('n'), parallel.mean('n'))
        assert np.array_equal(serial.mean('entropy'), parallel.mean('entropy'))

    def test_vacuum_ensemble(self, kc_model_4):
        config = short_config(n_traj=5, hist_bins=10)
        result = run_ensemble(QuantumJumpSimulator(kc_model_4), make_initial_state('vacuum', 4), config)
        assert result.trivial_fraction == 1.0
        assert result.mean_final_entropy == 0.0
        counts, edges = result.entropy_hist
        assert counts.sum() == 5 and counts[0] == 5
        assert edges[-1] == pytest.approx(2 * np.log(2))
        assert np.all(result.sem('n') == 0.0)

    def test_dicke_mode_channel(self):
        model = ChainModel(ChainParams(N=4), mode='dicke')
        config = short_config(n_traj=3)
        result = run_ensemble(QuantumJumpSimulator(model), make_initial_state('inverted', 4), config)
        assert result.channel_columns == ['I_dicke']
        assert all(e.channel is None for r in result.records for e in r.events)
        assert list(result.photon_counts) == ['I_dicke']
        assert result.photon_counts['I_dicke'].sum() == sum(len(r.events) for r in result.records)


def test_vacuum_ensemble_matches_master_equation():
    result = check_trajectory_equivalence(seed=5, N=4, n_traj=20, t_max=0.4, initial='vacuum')
    assert result.passed, result.detail


@pytest.mark.slow
def test_ensemble_matches_master_equation():
    # N = 6，500 条轨迹，n、I_ξ 与 ⟨ñ_k⟩ 都在 3 个标准误以内
    result = check_trajectory_equivalence(seed=20240601, N=6, n_traj=500, workers=4)
    assert result.passed, result.detail
