#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置解析测试：默认值、优先级、报错行号与往返一致性
"""

import json
import logging

import pytest

from src.config import Config, dump_config, parse_config, write_resolved_config
from src.errors import ConfigError

NO_ENV = {}


def parse(data, overrides=None, environ=NO_ENV):
    text = json.dumps(data, indent=2)
    return parse_config(text, overrides=overrides, environ=environ)


class TestDefaults:

    def test_minimal(self):
        config = parse({'N': 6})
        assert config.N == 6
        assert config.params.delta == Config.DELTA
        assert config.params.j_int == Config.J_INT
        assert config.mode == 'kc'
        assert config.engine == 'master'
        assert config.evolution.t_max == Config.T_MAX
        assert config.trajectory.master_seed == Config.MASTER_SEED
        assert config.output_dir == Config.OUTPUT_DIR
        assert config.wants('timeseries') and not config.wants('svg_plots')

    def test_trajectory_step_from_fastest_rate(self):
        config = parse({'N': 6})
        gamma_2 = config.params.rate(2)
        assert config.trajectory.dt == pytest.approx(1e-3 / gamma_2)

    def test_dicke_rate_default(self, caplog):
        with caplog.at_level(logging.INFO, logger='src.config'):
            config = parse({'N': 4, 'mode': 'dicke', 'delta': 2.0, 'gamma': 0.5})
        assert config.dicke_rate == pytest.approx(0.5 * 8.0)
        assert 'dicke_rate' in caplog.text

    def test_explicit_dicke_rate(self):
        assert parse({'N': 4, 'mode': 'dicke', 'dicke_rate': 3.0}).dicke_rate == 3.0


class TestErrors:

    def test_too_few_sites(self):
        with pytest.raises(ConfigError) as info:
            parse({'t_max': 1.0, 'N': 2})
        assert 'N ≥ 3 required (got N=2)' in str(info.value)
        assert info.value.line == 3
        assert info.value.exit_code == 2

    @pytest.mark.parametrize('mode', ['kc', 'dicke'])
    def test_nonpositive_dicke_rate(self, mode):
        with pytest.raises(ConfigError) as info:
            parse({'N': 4, 'mode': mode, 'dicke_rate': -1.0})
        assert info.value.key == 'dicke_rate'

    def test_missing_n(self):
        with pytest.raises(ConfigError):
            parse({'delta': 1.0})

    def test_unknown_key_line(self):
        text = '{\n  "N": 4,\n  "gama": 1.0\n}\n'
        with pytest.raises(ConfigError) as info:
            parse_config(text, environ=NO_ENV)
        assert info.value.line == 3
        assert info.value.key == 'gama'

    def test_syntax_error_line(self):
        text = '{\n  "N": 4,\n  "delta": ,\n}\n'
        with pytest.raises(ConfigError) as info:
            parse_config(text, environ=NO_ENV)
        assert info.value.line == 3

    def test_wrong_type(self):
        with pytest.raises(ConfigError) as info:
            parse({'N': 4.5})
        assert info.value.key == 'N'

    def test_master_size_limit(self):
        with pytest.raises(ConfigError):
            parse({'N': 14})
        assert parse({'N': 14, 'engine': 'trajectories'}).N == 14

    def test_negative_interaction(self):
        with pytest.raises(ConfigError) as info:
            parse({'N': 4, 'j_int': -0.1})
        assert info.value.key == 'j_int'

    def test_bad_entropy_cut(self):
        with pytest.raises(ConfigError):
            parse({'N': 4, 'entropy_cut': [0, 4]})

    def test_sweep_lower_bound(self):
        with pytest.raises(ConfigError):
            parse({'N': 4, 'sweep': [2, 4]})
        assert parse({'N': 4, 'mode': 'dicke', 'sweep': [1, 2, 4]}).sweep == (1, 2, 4)

    def test_unknown_artifact(self):
        with pytest.raises(ConfigError):
            parse({'N': 4, 'artifacts': ['timeseries', 'movie']})

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            Config.load_from_json(str(tmp_path / 'absent.json'))


class TestPrecedence:

    def test_overrides_beat_file(self):
        config = parse({'N': 4, 't_max': 5.0}, overrides={'t_max': 2.0})
        assert config.evolution.t_max == 2.0

    def test_environment_sets_output_dir(self):
        config = parse({'N': 4, 'output_dir': 'a'}, overrides={'output_dir': 'b'},
                       environ={'KCSR_OUTPUT_DIR': 'c'})
        assert config.output_dir == 'c'

    def test_base_below_file(self):
        config = parse_config('{"N": 5}', base={'N': 6}, environ=NO_ENV)
        assert config.N == 5
        assert parse_config(None, base={'N': 6}, environ=NO_ENV).N == 6


class TestRoundTrip:

    @pytest.mark.parametrize('data', [
        {'N': 6},
        {'N': 5, 'mode': 'dicke', 'engine': 'trajectories', 'entropy_cut': [1, 2], 'sweep': [3, 5]},
    ])
    def test_dump_then_parse(self, data):
        config = parse(data)
        assert parse_config(dump_config(config), environ=NO_ENV) == config

    def test_resolved_file(self, tmp_path, monkeypatch):
        monkeypatch.delenv('KCSR_OUTPUT_DIR', raising=False)
        config = parse({'N': 4, 'output_dir': str(tmp_path)})
        path = write_resolved_config(config)
        assert Config.load_from_json(path, base=None) == config
        with open(path, encoding='utf-8') as f:
            resolved = json.load(f)
        assert resolved['traj_dt'] == config.trajectory.dt
        assert list(resolved) == sorted(resolved)
