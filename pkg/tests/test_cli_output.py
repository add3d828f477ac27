#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行与输出文件测试：列顺序、可复现性、退出码、JSON/CSV 格式与 SVG
"""

import json
import math
import os

import numpy as np
import pandas as pd
import pytest

from src.cli import main
from src.output.tables import write_csv, write_json
from src.simulation_engine import SimulationEngine
from src.config import parse_config

TIMESERIES_HEADER = ('t,t_gamma_0,t_gamma_1,t_gamma_2,n,I_0,I_1,I_2,I_total,energy,emitted_power,'
                     'nk_m0,nk_m1,nk_m2,nk_ratio_m0,nk_ratio_m1,nk_ratio_m2')


@pytest.fixture(autouse=True)
def no_output_env(monkeypatch):
    monkeypatch.delenv('KCSR_OUTPUT_DIR', raising=False)


def read_bytes(path):
    with open(path, 'rb') as f:
        return f.read()


def cli(subcommand, output_dir, *args):
    return main([subcommand, '--log-level', 'WARNING', '--output-dir', str(output_dir), *args])


class TestEvolve:

    def test_initial_row(self, tmp_path):
        assert cli('evolve', tmp_path, '--N', '3', '--t-max', '0') == 0
        with open(tmp_path / 'timeseries.csv', encoding='utf-8') as f:
            header = f.readline().rstrip('\n')
        assert header == TIMESERIES_HEADER
        frame = pd.read_csv(tmp_path / 'timeseries.csv')
        assert len(frame) == 1
        row = frame.iloc[0]
        gamma_2 = 1.4 ** 3
        assert row['n'] == 3.0
        assert row['I_0'] == 0.0 and row['I_1'] == 0.0
        assert row['I_2'] == pytest.approx(3 * gamma_2, rel=1e-14)
        assert row['emitted_power'] == pytest.approx(1.4 * 3 * gamma_2, rel=1e-14)
        assert os.path.exists(tmp_path / 'resolved_config.json')

    def test_summary_nan_is_null(self, tmp_path):
        assert cli('evolve', tmp_path, '--N', '3', '--t-max', '0') == 0
        with open(tmp_path / 'summary.json', encoding='utf-8') as f:
            summary = json.load(f)
        assert summary['steady_reached'] is False
        assert summary['steady_time'] is None
        assert summary['n_final'] == 3.0

    def test_burst_written(self, tmp_path):
        assert cli('evolve', tmp_path, '--N', '4', '--t-max', '4') == 0
        burst = pd.read_csv(tmp_path / 'burst.csv')
        assert set(burst['series']) == {'I_0', 'I_1', 'I_2', 'I_total'}
        momentum = pd.read_csv(tmp_path / 'momentum.csv')
        assert list(momentum.columns) == ['m', 'k', 'nk_final', 'nk_ratio_final']
        assert len(momentum) == 4

    def test_dicke_mode_columns(self, tmp_path):
        assert cli('evolve', tmp_path, '--N', '3', '--t-max', '1', '--mode', 'dicke') == 0
        frame = pd.read_csv(tmp_path / 'timeseries.csv')
        assert frame['I_0'].isna().all()
        assert frame['I_total'].iloc[0] == pytest.approx(3.0)


class TestExitCodes:

    def test_too_few_sites(self, tmp_path, capsys):
        assert cli('evolve', tmp_path, '--N', '2') == 2
        assert 'N ≥ 3 required (got N=2)' in capsys.readouterr().err
        assert not os.path.exists(tmp_path / 'timeseries.csv')

    def test_unknown_key_in_file(self, tmp_path, capsys):
        path = tmp_path / 'config.json'
        path.write_text('{\n  "N": 4,\n  "colour": "red"\n}\n', encoding='utf-8')
        assert cli('evolve', tmp_path, '--config', str(path)) == 2
        assert 'line=3' in capsys.readouterr().err

    def test_dt_too_large(self, tmp_path):
        assert cli('trajectories', tmp_path, '--N', '3', '--t-max', '1', '--traj-dt', '0.5',
                   '--n-traj', '1', '--record-cadence', '0.5') == 3


class TestTrajectories:

    ARGS = ('--N', '3', '--t-max', '0.5', '--n-traj', '4', '--master-seed', '7', '--hist-bins', '5')

    def test_byte_identical_reruns(self, tmp_path):
        first, second = tmp_path / 'a', tmp_path / 'b'
        assert cli('trajectories', first, *self.ARGS) == 0
        assert cli('trajectories', second, *self.ARGS) == 0
        for name in ('timeseries.csv', 'jumps.csv', 'trajectory_entropy.csv', 'entropy_hist.csv',
                     'momentum.csv', 'summary.json'):
            assert read_bytes(first / name) == read_bytes(second / name), name

    def test_outputs(self, tmp_path):
        assert cli('trajectories', tmp_path, *self.ARGS) == 0
        frame = pd.read_csv(tmp_path / 'timeseries.csv')
        assert list(frame.columns[-4:]) == ['n_sem', 'I_total_sem', 'S_half', 'S_half_sem']
        hist = pd.read_csv(tmp_path / 'entropy_hist.csv')
        assert hist['count'].sum() == 4
        entropy = pd.read_csv(tmp_path / 'trajectory_entropy.csv')
        assert list(entropy.columns) == ['t', 'S_traj0', 'S_traj1', 'S_traj2', 'S_traj3']
        emission = pd.read_csv(tmp_path / 'emission.csv')
        assert list(emission.columns) == ['t_start', 't_end'] + [
            f'{kind}_I_{xi}' for xi in range(3) for kind in ('photons', 'rate', 'mean')]
        assert len(emission) == len(frame) - 1
        jumps = pd.read_csv(tmp_path / 'jumps.csv')
        assert sum(emission[f'photons_I_{xi}'].sum() for xi in range(3)) == len(jumps)

    def test_compare_modes(self, tmp_path):
        assert cli('trajectories', tmp_path, *self.ARGS, '--compare') == 0
        assert os.path.exists(tmp_path / 'compare_dicke_timeseries.csv')
        with open(tmp_path / 'summary.json', encoding='utf-8') as f:
            summary = json.load(f)
        assert summary['compare']['mode'] == 'dicke'
        assert summary['compare']['n_traj'] == 4

    def test_engine_switch(self, tmp_path):
        assert cli('evolve', tmp_path, *self.ARGS, '--engine', 'trajectories') == 0
        assert os.path.exists(tmp_path / 'jumps.csv')


class TestDickeAndScaling:

    def test_ladder_table(self, tmp_path):
        assert cli('dicke', tmp_path, '--N', '4') == 0
        frame = pd.read_csv(tmp_path / 'dicke_ladder.csv')
        assert list(frame.columns) == ['t', 'I', 'n', 'p_s0', 'p_s1', 'p_s2', 'p_s3', 'p_s4']
        assert np.allclose(frame[[f'p_s{s}' for s in range(5)]].sum(axis=1), 1.0, atol=1e-9)

    def test_dicke_sweep_fits(self, tmp_path):
        assert cli('scaling', tmp_path, '--N', '4', '--mode', 'dicke') == 0
        with open(tmp_path / 'fits.json', encoding='utf-8') as f:
            payload = json.load(f)
        assert payload['sizes'] == list(range(4, 11))
        exponent = payload['fits']['I_total']['i_max']['params'][1]
        assert 1.5 < exponent < 2.1
        assert payload['fits']['I_total']['i_max_quadratic']['r_squared'] > 0.99
        assert 'width_quadratic_inverse' in payload['fits']['I_total']
        assert payload['fits']['I_total']['delay_fit_excluded'] is True
        assert set(payload['estimates']) == {str(N) for N in range(4, 11)}

    def test_master_sweep(self, tmp_path):
        assert cli('scaling', tmp_path, '--N', '3', '--sweep', '3,4,5', '--t-max', '5') == 0
        finite = pd.read_csv(tmp_path / 'finite_size.csv')
        assert finite['N'].tolist() == [3, 4, 5]
        assert finite['excitation_density'].between(-1e-9, 1.0).all()
        burst = pd.read_csv(tmp_path / 'burst.csv')
        assert set(burst['N']) == {3, 4, 5}


class TestPlot:

    def test_svg_from_csv(self, tmp_path):
        assert cli('evolve', tmp_path, '--N', '3', '--t-max', '2') == 0
        assert cli('plot', tmp_path) == 0
        svg = read_bytes(tmp_path / 'timeseries.svg')
        assert svg.lstrip().startswith(b'<?xml')
        assert os.path.exists(tmp_path / 'momentum.svg')
        assert cli('plot', tmp_path) == 0
        assert read_bytes(tmp_path / 'timeseries.svg') == svg

    def test_svg_artifact(self, tmp_path):
        config = parse_config('{"N": 3, "t_max": 1.0, "artifacts": ["timeseries", "svg_plots"]}',
                              overrides={'output_dir': str(tmp_path)}, environ={})
        result = SimulationEngine(config).run('evolve')
        assert result['exit_code'] == 0
        assert str(tmp_path / 'timeseries.svg') in result['artifacts']

    def test_compare_files_rendered(self, tmp_path):
        assert cli('trajectories', tmp_path, *TestTrajectories.ARGS, '--compare') == 0
        assert cli('plot', tmp_path) == 0
        assert os.path.exists(tmp_path / 'timeseries.svg')
        assert os.path.exists(tmp_path / 'compare_dicke_timeseries.svg')

    def test_missing_directory(self, tmp_path):
        assert cli('plot', tmp_path / 'absent') == 2


class TestWriters:

    def test_csv_format(self, tmp_path):
        path = write_csv(pd.DataFrame({'a': [0.1, 1.0], 'b': [float('nan'), 2.5]}), str(tmp_path / 'x.csv'))
        assert read_bytes(path) == b'a,b\n0.10000000000000001,nan\n1,2.5\n'

    def test_json_format(self, tmp_path):
        path = write_json({'b': float('nan'), 'a': np.float64(1.5), 'c': np.arange(2)}, str(tmp_path / 'x.json'))
        text = read_bytes(path).decode('utf-8')
        assert json.loads(text) == {'a': 1.5, 'b': None, 'c': [0, 1]}
        assert text.index('"a"') < text.index('"b"')
        assert text.endswith('}\n')


@pytest.mark.slow
def test_verify_fast_tier(tmp_path):
    assert cli('verify', tmp_path) == 0
    assert 'PASS' in (tmp_path / 'verify_report.txt').read_text(encoding='utf-8')


def test_dicke_unit_rate_intensity():
    # Dicke 模式默认速率 ΓΔ³
    assert math.isclose(parse_config('{"N": 3, "mode": "dicke"}', environ={}).dicke_rate, 1.0)


@pytest.mark.slow
def test_evolve_eight_sites(tmp_path):
    assert cli('evolve', tmp_path, '--N', '8', '--t-max', '10') == 0
    frame = pd.read_csv(tmp_path / 'timeseries.csv')
    assert frame['n'].iloc[-1] < frame['n'].iloc[0]
