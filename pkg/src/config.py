#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
模拟配置
默认参数、配置文件的键表，以及 JSON 配置与 RunConfig 之间的转换
"""

import json
import logging
import os
import re
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Tuple

from .algorithms.chain_operators import ChainParams
from .algorithms.lindblad_solver import MAX_MASTER_SITES, EvolutionConfig
from .algorithms.quantum_trajectories import TrajectoryConfig
from .algorithms.states import INITIAL_STATES
from .errors import ConfigError

logger = logging.getLogger(__name__)

OUTPUT_DIR_ENV = 'KCSR_OUTPUT_DIR'


class Config:
    """
    模拟配置类，所有默认值集中在这里
    """

    @classmethod
    def load_from_json(cls, json_file_path: str, overrides: Optional[Mapping[str, Any]] = None,
                       base: Optional[Mapping[str, Any]] = None) -> 'RunConfig':
        """
        从JSON文件加载配置

        Args:
            json_file_path (str): JSON配置文件路径
            overrides: 命令行覆盖项，优先级高于文件

        JSON格式示例:
        {
            "N": 6,
            "delta": 1.0,
            "j_int": 0.2,
            "gamma": 1.0,
            "engine": "master"
        }
        """
        if not os.path.exists(json_file_path):
            raise ConfigError(f'配置文件不存在: {json_file_path}')
        with open(json_file_path, 'r', encoding='utf-8') as f:
            text = f.read()
        return parse_config(text, overrides=overrides, base=base)

    @classmethod
    def save_to_json(cls, config: 'RunConfig', json_file_path: str):
        """
        将解析后的完整配置保存到JSON文件

        Args:
            config: 运行配置
            json_file_path (str): 保存路径
        """
        with open(json_file_path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(dump_config(config))
        logger.info('配置已保存到 %s', json_file_path)

    # 物理参数
    DELTA = 1.0
    J_INT = 0.2
    GAMMA = 1.0
    MODE = 'kc'
    ENGINE = 'master'
    INITIAL_STATE = 'inverted'

    # 积分参数
    T_MAX = 20.0
    DT_INITIAL = 1e-3
    REL_TOL = 1e-8
    ABS_TOL = 1e-10
    SAMPLE_INTERVAL = 0.05
    STEADY_TOL = 1e-6
    STEADY_WINDOW = 5

    # 轨迹参数
    TRAJ_DT_FACTOR = 1e-3  # dt = TRAJ_DT_FACTOR / γ_max
    MASTER_SEED = 20240601
    N_TRAJ = 500
    RECORD_CADENCE = 0.05
    WORKERS = 1

    # 输出参数
    HIST_BINS = 40
    CSV_DIGITS = 17
    OUTPUT_DIR = 'output'
    ARTIFACTS = ('timeseries', 'momentum', 'entropy_hist', 'burst', 'scaling_sweep')
    ALL_ARTIFACTS = ('timeseries', 'momentum', 'entropy_hist', 'burst', 'scaling_sweep', 'svg_plots')
    RESOLVED_CONFIG_NAME = 'resolved_config.json'

    MODES = ('kc', 'dicke')
    ENGINES = ('master', 'trajectories')

    # timeseries.csv 的固定列（动量列按 N 追加）
    TIMESERIES_COLUMNS = ('t', 't_gamma_0', 't_gamma_1', 't_gamma_2', 'n', 'I_0', 'I_1', 'I_2',
                          'I_total', 'energy', 'emitted_power')


# 配置键: (类型, 说明)；类型 'float?' 表示可以为 null
CONFIG_KEYS: Dict[str, Tuple[str, str]] = {
    'N': ('int', '格点数，N ≥ 3'),
    'delta': ('float', '裸跃迁频率 Δ'),
    'j_int': ('float', '近邻相互作用 J'),
    'gamma': ('float', '衰减率前因子 Γ'),
    'mode': ('str', 'kc 或 dicke'),
    'engine': ('str', 'master 或 trajectories'),
    'dicke_rate': ('float?', 'Dicke 模式的集体速率，缺省为 ΓΔ³'),
    'initial_state': ('str', 'inverted / vacuum / neel / single'),
    't_max': ('float', '演化终止时间'),
    'dt_initial': ('float', '主方程初始步长'),
    'rel_tol': ('float', '主方程相对误差'),
    'abs_tol': ('float', '主方程绝对误差'),
    'sample_interval': ('float', '主方程采样间隔'),
    'steady_tol': ('float', '稳态阈值'),
    'steady_window': ('int', '稳态窗口（采样点数）'),
    'traj_dt': ('float?', '轨迹步长，缺省为 1e-3/γ_max'),
    'master_seed': ('int', '系综主种子'),
    'n_traj': ('int', '轨迹数'),
    'record_cadence': ('float', '轨迹记录间隔'),
    'entropy_cut': ('ints?', '纠缠熵子系统格点，缺省为前 N/2 个'),
    'hist_bins': ('int', '末态熵直方图分箱数'),
    'workers': ('int', '并行进程数'),
    'output_dir': ('str', '输出目录'),
    'artifacts': ('strs', '需要输出的产物'),
    'sweep': ('ints?', 'scaling 子命令扫描的 N'),
}


@dataclass
class RunConfig:
    """
    一次运行的完整配置
    """
    params: ChainParams
    mode: str = Config.MODE
    engine: str = Config.ENGINE
    dicke_rate: Optional[float] = None
    initial_state: str = Config.INITIAL_STATE
    evolution: EvolutionConfig = field(default_factory=EvolutionConfig)
    trajectory: TrajectoryConfig = field(default_factory=TrajectoryConfig)
    output_dir: str = Config.OUTPUT_DIR
    artifacts: Tuple[str, ...] = Config.ARTIFACTS
    sweep: Optional[Tuple[int, ...]] = None

    @property
    def N(self) -> int:
        return self.params.N

    def wants(self, artifact: str) -> bool:
        return artifact in self.artifacts


def _key_line(text: str, key: str) -> Optional[int]:
    """配置文本中某个键第一次出现的行号（从 1 开始）"""
    pattern = re.compile(r'"' + re.escape(key) + r'"\s*:')
    for number, line in enumerate(text.splitlines(), start=1):
        if pattern.search(line):
            return number
    return None


def _coerce(key: str, value: Any, kind: str, line: Optional[int]):
    def fail(expected):
        raise ConfigError(f'{key} 应为{expected}，实际为 {value!r}', line=line, key=key)

    if value is None:
        if kind.endswith('?'):
            return None
        fail('非空值')
    base = kind.rstrip('?')
    if base == 'int':
        if isinstance(value, bool) or not isinstance(value, int):
            fail('整数')
        return int(value)
    if base == 'float':
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            fail('数值')
        return float(value)
    if base == 'str':
        if not isinstance(value, str):
            fail('字符串')
        return value
    if base == 'ints':
        if not isinstance(value, list) or any(isinstance(v, bool) or not isinstance(v, int) for v in value):
            fail('整数列表')
        return tuple(int(v) for v in value)
    if base == 'strs':
        if not isinstance(value, list) or any(not isinstance(v, str) for v in value):
            fail('字符串列表')
        return tuple(value)
    raise AssertionError(kind)


def default_values() -> Dict[str, Any]:
    return {
        'N': None,
        'delta': Config.DELTA,
        'j_int': Config.J_INT,
        'gamma': Config.GAMMA,
        'mode': Config.MODE,
        'engine': Config.ENGINE,
        'dicke_rate': None,
        'initial_state': Config.INITIAL_STATE,
        't_max': Config.T_MAX,
        'dt_initial': Config.DT_INITIAL,
        'rel_tol': Config.REL_TOL,
        'abs_tol': Config.ABS_TOL,
        'sample_interval': Config.SAMPLE_INTERVAL,
        'steady_tol': Config.STEADY_TOL,
        'steady_window': Config.STEADY_WINDOW,
        'traj_dt': None,
        'master_seed': Config.MASTER_SEED,
        'n_traj': Config.N_TRAJ,
        'record_cadence': Config.RECORD_CADENCE,
        'entropy_cut': None,
        'hist_bins': Config.HIST_BINS,
        'workers': Config.WORKERS,
        'output_dir': Config.OUTPUT_DIR,
        'artifacts': Config.ARTIFACTS,
        'sweep': None,
    }


def build_run_config(values: Mapping[str, Any], lines: Optional[Mapping[str, int]] = None) -> RunConfig:
    """
    由已合并的扁平键值构造并校验 RunConfig

    Args:
        values: 完整键值（缺省项已填入）
        lines: 每个键在配置文件中的行号，用于报错

    Returns:
        RunConfig: 校验后的配置
    """
    lines = lines or {}

    def fail(key, message):
        raise ConfigError(message, line=lines.get(key), key=key)

    N = values['N']
    if N is None:
        fail('N', '缺少必填项 N')
    if N < 3:
        fail('N', f'N ≥ 3 required (got N={N})')
    if values['mode'] not in Config.MODES:
        fail('mode', f'mode 必须是 {Config.MODES} 之一: {values["mode"]}')
    if values['engine'] not in Config.ENGINES:
        fail('engine', f'engine 必须是 {Config.ENGINES} 之一: {values["engine"]}')
    if values['engine'] == 'master' and N > MAX_MASTER_SITES:
        fail('N', f'主方程只支持 N ≤ {MAX_MASTER_SITES}，更大的体系请用 trajectories')
    if values['initial_state'] not in INITIAL_STATES:
        fail('initial_state', f'initial_state 必须是 {INITIAL_STATES} 之一')
    unknown = [a for a in values['artifacts'] if a not in Config.ALL_ARTIFACTS]
    if unknown:
        fail('artifacts', f'未知产物: {unknown}，可选 {Config.ALL_ARTIFACTS}')
    if values['sweep'] is not None:
        lowest = 1 if values['mode'] == 'dicke' else 3
        if len(values['sweep']) == 0 or min(values['sweep']) < lowest:
            fail('sweep', f'sweep 需要非空且每个 N ≥ {lowest}')
    if values['entropy_cut'] is not None:
        cut = values['entropy_cut']
        if len(cut) == 0 or len(set(cut)) != len(cut) or min(cut) < 0 or max(cut) >= N:
            fail('entropy_cut', f'entropy_cut 必须是 0..{N - 1} 中互不相同的格点')

    try:
        params = ChainParams(N=N, delta=values['delta'], j_int=values['j_int'],
                             gamma_prefactor=values['gamma'])
    except ValueError as e:
        fail(_guess_key(str(e), ('delta', 'j_int'), default='gamma'), str(e))

    dicke_rate = values['dicke_rate']
    if dicke_rate is not None and not dicke_rate > 0:
        fail('dicke_rate', f'dicke_rate 必须大于 0: {dicke_rate}')
    if values['mode'] == 'dicke':
        if dicke_rate is None:
            dicke_rate = params.gamma_prefactor * params.delta ** 3
            logger.info('mode=dicke 未给出 dicke_rate，使用 Γ·Δ³ = %.6g', dicke_rate)
        gamma_max = dicke_rate
    else:
        gamma_max = params.rate(2) if params.j_int > 0 else params.rate(0)

    traj_dt = values['traj_dt']
    if traj_dt is None:
        traj_dt = Config.TRAJ_DT_FACTOR / gamma_max

    try:
        evolution = EvolutionConfig(
            t_max=values['t_max'], dt_initial=values['dt_initial'], rel_tol=values['rel_tol'],
            abs_tol=values['abs_tol'], sample_interval=values['sample_interval'],
            steady_tol=values['steady_tol'], steady_window=values['steady_window'])
    except ValueError as e:
        fail(_guess_key(str(e), ('t_max', 'dt_initial', 'rel_tol', 'abs_tol', 'sample_interval',
                                 'steady_tol', 'steady_window')), str(e))
    try:
        trajectory = TrajectoryConfig(
            t_max=values['t_max'], dt=traj_dt, master_seed=values['master_seed'], n_traj=values['n_traj'],
            record_cadence=values['record_cadence'], entropy_cut=values['entropy_cut'],
            steady_tol=values['steady_tol'], steady_window=values['steady_window'],
            hist_bins=values['hist_bins'], workers=values['workers'])
    except ValueError as e:
        fail(_guess_key(str(e), ('master_seed', 'n_traj', 'record_cadence', 'hist_bins', 'workers', 't_max'),
                        default='traj_dt'), str(e))

    return RunConfig(
        params=params,
        mode=values['mode'],
        engine=values['engine'],
        dicke_rate=dicke_rate if values['mode'] == 'dicke' else values['dicke_rate'],
        initial_state=values['initial_state'],
        evolution=evolution,
        trajectory=trajectory,
        output_dir=values['output_dir'],
        artifacts=tuple(values['artifacts']),
        sweep=None if values['sweep'] is None else tuple(values['sweep']),
    )


def _guess_key(message: str, keys, default: Optional[str] = None) -> Optional[str]:
    for key in keys:
        if message.startswith(key):
            return key
    return default


def parse_config(text: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None,
                 environ: Optional[Mapping[str, str]] = None, base: Optional[Mapping[str, Any]] = None) -> RunConfig:
    """
    解析配置：默认值 < 配置文件 < 命令行覆盖 < 环境变量（仅输出目录）

    Args:
        text: JSON 配置文本，None 表示只用默认值和覆盖项
        overrides: 命令行给出的键值
        environ: 环境变量，默认为 os.environ

    Returns:
        RunConfig: 校验后的配置

    Raises:
        ConfigError: 语法错误、未知键、类型或取值非法，消息带行号
    """
    values = default_values()
    values.update(base or {})
    lines: Dict[str, int] = {}

    if text is not None:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f'JSON 格式错误: {e.msg}', line=e.lineno)
        if not isinstance(data, dict):
            raise ConfigError('配置文件的顶层必须是对象', line=1)
        for key, value in data.items():
            line = _key_line(text, key)
            if key not in CONFIG_KEYS:
                raise ConfigError(f'未知配置项: {key}', line=line, key=key)
            values[key] = _coerce(key, value, CONFIG_KEYS[key][0], line)
            if line is not None:
                lines[key] = line

    for key, value in (overrides or {}).items():
        if key not in CONFIG_KEYS:
            raise ConfigError(f'未知配置项: {key}', key=key)
        if value is not None:
            values[key] = _coerce(key, value, CONFIG_KEYS[key][0], None)
            lines.pop(key, None)

    environ = os.environ if environ is None else environ
    if environ.get(OUTPUT_DIR_ENV):
        values['output_dir'] = environ[OUTPUT_DIR_ENV]
        lines.pop('output_dir', None)

    return build_run_config(values, lines)


def emit_config(config: RunConfig) -> Dict[str, Any]:
    """
    RunConfig 转回扁平键值，所有缺省项都已解析成具体数值

    parse_config(dump_config(c)) == c
    """
    return {
        'N': config.params.N,
        'delta': config.params.delta,
        'j_int': config.params.j_int,
        'gamma': config.params.gamma_prefactor,
        'mode': config.mode,
        'engine': config.engine,
        'dicke_rate': config.dicke_rate,
        'initial_state': config.initial_state,
        't_max': config.evolution.t_max,
        'dt_initial': config.evolution.dt_initial,
        'rel_tol': config.evolution.rel_tol,
        'abs_tol': config.evolution.abs_tol,
        'sample_interval': config.evolution.sample_interval,
        'steady_tol': config.evolution.steady_tol,
        'steady_window': config.evolution.steady_window,
        'traj_dt': config.trajectory.dt,
        'master_seed': config.trajectory.master_seed,
        'n_traj': config.trajectory.n_traj,
        'record_cadence': config.trajectory.record_cadence,
        'entropy_cut': None if config.trajectory.entropy_cut is None else list(config.trajectory.entropy_cut),
        'hist_bins': config.trajectory.hist_bins,
        'workers': config.trajectory.workers,
        'output_dir': config.output_dir,
        'artifacts': list(config.artifacts),
        'sweep': None if config.sweep is None else list(config.sweep),
    }


def dump_config(config: RunConfig) -> str:
    return json.dumps(emit_config(config), ensure_ascii=False, indent=2, sort_keys=True) + '\n'


def write_resolved_config(config: RunConfig, output_dir: Optional[str] = None) -> str:
    """把解析后的配置写入输出目录，返回文件路径"""
    directory = output_dir or config.output_dir
    os.makedirs(directory, exist_ok=True)
    path = os.path.join(directory, Config.RESOLVED_CONFIG_NAME)
    Config.save_to_json(config, path)
    return path
