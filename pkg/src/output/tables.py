#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
表格输出
时间序列、跳跃记录、熵直方图、脉冲特征等写成 CSV（17 位有效数字，'\n' 换行），
汇总写成按键排序的 JSON
"""

import json
import logging
import math
import os
from typing import Any, Dict, List, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

from ..algorithms.burst_analysis import BurstFeatures, SizeSummary
from ..algorithms.chain_operators import CHANNEL_INDICES, ChainModel
from ..algorithms.lindblad_solver import MasterEvolution
from ..algorithms.observables import RATIO_FLOOR
from ..algorithms.quantum_trajectories import EnsembleResult
from ..config import Config

logger = logging.getLogger(__name__)

FLOAT_FORMAT = f'%.{Config.CSV_DIGITS}g'


def momentum_columns(N: int) -> List[str]:
    return [f'nk_m{m}' for m in range(N)] + [f'nk_ratio_m{m}' for m in range(N)]


def timeseries_columns(N: int) -> List[str]:
    """timeseries.csv 的列顺序，固定不变"""
    return list(Config.TIMESERIES_COLUMNS) + momentum_columns(N)


def _ratios(momentum: np.ndarray, n: np.ndarray) -> np.ndarray:
    ratios = np.full_like(momentum, np.nan, dtype=float)
    ok = n >= RATIO_FLOOR
    ratios[ok] = momentum[ok] / n[ok, np.newaxis]
    return ratios


def build_timeseries_frame(model: ChainModel, times: np.ndarray, n: np.ndarray,
                           channel_series: Mapping[str, np.ndarray], i_total: np.ndarray,
                           energy: np.ndarray, power: np.ndarray, momentum: np.ndarray) -> pd.DataFrame:
    """
    按固定列顺序组装时间序列表

    Args:
        model: 链模型，用于时间单位换算和动量列数
        times: 采样时间
        n: 激发数
        channel_series: {通道列名: 强度}
        i_total: 总强度
        energy: ⟨H_A⟩
        power: 辐射功率 Σ ω_ξ I_ξ
        momentum: (采样点, N) 动量占据

    Returns:
        pd.DataFrame: Dicke 模式下 I_0..I_2 为 NaN
    """
    times = np.asarray(times, dtype=float)
    data: Dict[str, np.ndarray] = {'t': times}
    for xi in CHANNEL_INDICES:
        data[f't_gamma_{xi}'] = times * model.rates[xi]
    data['n'] = np.asarray(n, dtype=float)
    for xi in CHANNEL_INDICES:
        data[f'I_{xi}'] = np.asarray(channel_series.get(f'I_{xi}', np.full(len(times), np.nan)), dtype=float)
    data['I_total'] = np.asarray(i_total, dtype=float)
    data['energy'] = np.asarray(energy, dtype=float)
    data['emitted_power'] = np.asarray(power, dtype=float)
    momentum = np.asarray(momentum, dtype=float).reshape(len(times), model.N)
    ratios = _ratios(momentum, data['n'])
    for m in range(model.N):
        data[f'nk_m{m}'] = momentum[:, m]
    for m in range(model.N):
        data[f'nk_ratio_m{m}'] = ratios[:, m]
    return pd.DataFrame(data, columns=timeseries_columns(model.N))


def master_timeseries(model: ChainModel, evolution: MasterEvolution) -> pd.DataFrame:
    momentum = np.array([r.momentum_occ for r in evolution.records])
    channels = {column: evolution.series(column) for column in model.channel_columns()}
    return build_timeseries_frame(model, evolution.times, evolution.series('n'), channels,
                                  evolution.series('I_total'), evolution.series('energy'),
                                  evolution.series('emitted_power'), momentum)


def ensemble_timeseries(model: ChainModel, ensemble: EnsembleResult) -> pd.DataFrame:
    """系综平均的时间序列，末尾追加标准误和半链熵列"""
    channels = {column: ensemble.mean(column) for column in ensemble.channel_columns}
    power = sum(channel.omega * ensemble.mean(channel.column) for channel in model.channels)
    momentum = np.stack([ensemble.mean(f'nk_{m}') for m in range(model.N)], axis=1)
    frame = build_timeseries_frame(model, ensemble.times, ensemble.mean('n'), channels,
                                   ensemble.mean('I_total'), ensemble.mean('energy'), power, momentum)
    frame['n_sem'] = ensemble.sem('n')
    frame['I_total_sem'] = ensemble.sem('I_total')
    frame['S_half'] = ensemble.mean('entropy')
    frame['S_half_sem'] = ensemble.sem('entropy')
    return frame


def momentum_frame(model: ChainModel, momentum: np.ndarray, n_final: float) -> pd.DataFrame:
    """末时刻每个动量模的占据"""
    momentum = np.asarray(momentum, dtype=float)
    ratio = momentum / n_final if n_final >= RATIO_FLOOR else np.full(model.N, np.nan)
    return pd.DataFrame({
        'm': np.arange(model.N),
        'k': model.momenta,
        'nk_final': momentum,
        'nk_ratio_final': ratio,
    })


def jump_log_frame(ensemble: EnsembleResult) -> pd.DataFrame:
    rows = []
    for record in ensemble.records:
        for event in record.events:
            rows.append((record.traj_index, record.seed, event.time,
                         'dicke' if event.channel is None else str(event.channel), event.pre_norm))
    return pd.DataFrame(rows, columns=['traj_index', 'seed', 't', 'channel', 'pre_norm'])


def emission_frame(ensemble: EnsembleResult) -> pd.DataFrame:
    """
    每个记录区间的光子计数与计数率，并给出同一区间内系综平均强度的梯形平均作对照

    列为 t_start, t_end，然后每个通道 photons_<列>, rate_<列>, mean_<列>
    """
    times = ensemble.times
    data: Dict[str, np.ndarray] = {'t_start': times[:-1], 't_end': times[1:]}
    for column in ensemble.channel_columns:
        intensity = ensemble.mean(column)
        data[f'photons_{column}'] = ensemble.photon_counts[column].astype(int)
        data[f'rate_{column}'] = ensemble.emission_rates[column]
        data[f'mean_{column}'] = 0.5 * (intensity[:-1] + intensity[1:])
    return pd.DataFrame(data)


def trajectory_entropy_frame(ensemble: EnsembleResult) -> pd.DataFrame:
    """每条轨迹的半链熵，一列一条轨迹"""
    width = len(str(max(ensemble.n_traj - 1, 0)))
    data = {'t': ensemble.times}
    for record in ensemble.records:
        data[f'S_traj{record.traj_index:0{width}d}'] = record.entropy
    return pd.DataFrame(data)


def entropy_hist_frame(ensemble: EnsembleResult) -> pd.DataFrame:
    counts, edges = ensemble.entropy_hist
    return pd.DataFrame({
        'bin_left': edges[:-1],
        'bin_right': edges[1:],
        'count': counts.astype(int),
        'fraction': counts / max(1, ensemble.n_traj),
    })


def burst_frame(features: Mapping[str, BurstFeatures], N: Optional[int] = None) -> pd.DataFrame:
    rows = []
    for name in sorted(features):
        f = features[name]
        row = {'series': name, 'i_max': f.i_max, 't_peak': f.t_peak, 'width': f.width,
               't_delay': f.t_delay, 'flags': ';'.join(f.flags)}
        if N is not None:
            row = {'N': N, **row}
        rows.append(row)
    return pd.DataFrame(rows)


def finite_size_frame(summaries: Sequence[SizeSummary]) -> pd.DataFrame:
    return pd.DataFrame([s.to_dict() for s in summaries],
                        columns=['N', 'excitation_density', 'entropy_mean', 'trivial_fraction',
                                 'steady_reached', 'steady_time'])


# ==================== 写文件 ====================

def write_csv(frame: pd.DataFrame, path: str) -> str:
    """固定格式写 CSV，相同数据得到逐字节相同的文件"""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT, lineterminator='\n', na_rep='nan')
    logger.info('已写出 %s（%d 行）', path, len(frame))
    return path


def to_jsonable(value: Any) -> Any:
    """numpy 类型转成 Python 类型，NaN/inf 转成 null"""
    if isinstance(value, Mapping):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_json(payload: Mapping[str, Any], path: str) -> str:
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as f:
        json.dump(to_jsonable(payload), f, ensure_ascii=False, indent=2, sort_keys=True, allow_nan=False)
        f.write('\n')
    logger.info('已写出 %s', path)
    return path

