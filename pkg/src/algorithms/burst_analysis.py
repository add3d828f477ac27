#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
辐射脉冲分析
脉冲特征提取（峰值、半高宽、延迟）、标度律拟合、亚稳平台检测与有限尺寸汇总
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P
from scipy.stats import linregress

from .lindblad_solver import first_quiet_index

logger = logging.getLogger(__name__)

MIN_BURST_SAMPLES = 10
# quadratic 为 N 的二次多项式，quadratic_inverse 为 1/N 的二次多项式，用来描述小 N 的有限尺寸修正
POLYNOMIAL_MODELS = ('quadratic', 'quadratic_inverse')
POLYNOMIAL_DEGREE = 2
SCALING_MODELS = ('power_law', 'log_over_n', 'inverse_n') + POLYNOMIAL_MODELS

# 平台判据：|dI/dt| < PLATEAU_SLOPE·I_peak·γ_0，且 I ≥ PLATEAU_FLOOR·I_peak
PLATEAU_SLOPE = 0.05
PLATEAU_FLOOR = 1e-3

# 不参与 t_D 拟合的序列
DELAY_FIT_EXCLUDED = ('I_2', 'I_total')

# (输出键, 脉冲特征, 拟合模型)；多项式拟合与幂律并列给出，小 N 时幂律指数偏离渐近值
FIT_PLAN = (
    ('i_max', 'i_max', 'power_law'),
    ('width', 'width', 'power_law'),
    ('t_delay', 't_delay', 'log_over_n'),
    ('i_max_quadratic', 'i_max', 'quadratic'),
    ('width_quadratic_inverse', 'width', 'quadratic_inverse'),
)


@dataclass
class BurstFeatures:
    """
    一个辐射脉冲的特征

    Attributes:
        i_max: 峰值强度
        t_peak: 峰值时间（抛物线细化）
        width: 半高宽 FWHM，无法确定时为 NaN
        t_delay: 延迟时间，定义为 t_peak
        flags: 异常标记，no_interior_peak / left_edge_above_half / right_edge_above_half
    """
    i_max: float
    t_peak: float
    width: float
    t_delay: float
    flags: Tuple[str, ...] = ()

    @property
    def has_peak(self) -> bool:
        return 'no_interior_peak' not in self.flags

    def to_dict(self) -> dict:
        return {
            'i_max': self.i_max,
            't_peak': self.t_peak,
            'width': self.width,
            't_delay': self.t_delay,
            'flags': list(self.flags),
        }


def _parabolic_peak(t: np.ndarray, y: np.ndarray) -> Tuple[float, float]:
    """过三点的抛物线顶点，允许非均匀间距"""
    coeffs = np.polyfit(t - t[1], y, 2)
    a, b, c = coeffs
    if a >= 0:
        return float(t[1]), float(y[1])
    shift = -b / (2 * a)
    # 顶点落在三点区间外说明数据有噪声，退回采样点
    if not t[0] - t[1] <= shift <= t[2] - t[1]:
        return float(t[1]), float(y[1])
    return float(t[1] + shift), float(c - b * b / (4 * a))


def _crossing(t0: float, y0: float, t1: float, y1: float, level: float) -> float:
    if y1 == y0:
        return 0.5 * (t0 + t1)
    return t0 + (level - y0) * (t1 - t0) / (y1 - y0)


def extract_burst(times: Sequence[float], intensity: Sequence[float]) -> BurstFeatures:
    """
    提取峰值、半高宽和延迟

    Args:
        times: 严格递增的采样时间
        intensity: 强度 I(t)

    Returns:
        BurstFeatures: 单调序列返回 no_interior_peak 标记，i_max 取最大采样值
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise ValueError('时间和强度序列长度不一致')
    if len(t) < MIN_BURST_SAMPLES:
        raise ValueError(f'脉冲分析至少需要 {MIN_BURST_SAMPLES} 个采样点，实际 {len(t)}')
    if np.any(np.diff(t) <= 0):
        raise ValueError('采样时间必须严格递增')
    if not np.all(np.isfinite(y)):
        raise ValueError('强度序列含有非有限值')

    peak = int(np.argmax(y))
    if peak == 0 or peak == len(y) - 1:
        return BurstFeatures(float(y[peak]), float(t[peak]), float('nan'), float(t[peak]),
                             ('no_interior_peak',))

    t_peak, i_max = _parabolic_peak(t[peak - 1:peak + 2], y[peak - 1:peak + 2])
    if i_max <= 0:
        return BurstFeatures(float(y[peak]), float(t[peak]), float('nan'), float(t[peak]),
                             ('no_interior_peak',))

    half = 0.5 * i_max
    flags = []
    below_left = np.nonzero(y[:peak] < half)[0]
    if len(below_left) > 0:
        i = below_left[-1]
        left = _crossing(t[i], y[i], t[i + 1], y[i + 1], half)
    else:
        left = None
        flags.append('left_edge_above_half')
    below_right = np.nonzero(y[peak:] < half)[0]
    if len(below_right) > 0:
        i = peak + below_right[0]
        right = _crossing(t[i - 1], y[i - 1], t[i], y[i], half)
    else:
        right = None
        flags.append('right_edge_above_half')

    # 只有一侧穿越半高时按对称脉冲估计
    if left is not None and right is not None:
        width = right - left
    elif right is not None:
        width = 2.0 * (right - t_peak)
    elif left is not None:
        width = 2.0 * (t_peak - left)
    else:
        width = float('nan')
    return BurstFeatures(i_max, t_peak, float(width), t_peak, tuple(flags))


def half_max_right_edge(times: Sequence[float], intensity: Sequence[float]) -> float:
    """峰值右侧第一次降到半高的时间，没有穿越时返回最后的采样时间"""
    t = np.asarray(times, dtype=float)
    y = np.asarray(intensity, dtype=float)
    peak = int(np.argmax(y))
    half = 0.5 * y[peak]
    below = np.nonzero(y[peak:] < half)[0]
    if len(below) == 0:
        return float(t[-1])
    i = peak + below[0]
    return _crossing(t[i - 1], y[i - 1], t[i], y[i], half)


# ==================== 标度律拟合 ====================

@dataclass
class ScalingFit:
    """
    标度律拟合结果

    Attributes:
        model: power_law (a·N^b)、log_over_n (a·lnN/N)、inverse_n (a/N)、quadratic 或 quadratic_inverse
        params: power_law 为 (a, b)，多项式为升幂系数 (c0, c1, c2)，其余为 (a,)
        r_squared: 决定系数，power_law 在对数空间计算
        residuals: 每个点的残差（power_law 为 ln v 的残差）
        sizes: 参与拟合的 N
    """
    model: str
    params: Tuple[float, ...]
    r_squared: float
    residuals: np.ndarray
    sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def prefactor(self) -> float:
        return self.params[0]

    @property
    def exponent(self) -> Optional[float]:
        return self.params[1] if self.model == 'power_law' else None

    def predict(self, N) -> np.ndarray:
        N = np.asarray(N, dtype=float)
        if self.model == 'power_law':
            return self.params[0] * N ** self.params[1]
        if self.model in POLYNOMIAL_MODELS:
            x = N if self.model == 'quadratic' else 1.0 / N
            return P.polyval(x, np.asarray(self.params))
        return self.params[0] * _regressor(N, self.model)

    def to_dict(self) -> dict:
        return {
            'model': self.model,
            'params': list(self.params),
            'r_squared': self.r_squared,
            'residuals': [float(r) for r in self.residuals],
            'sizes': [int(n) for n in self.sizes],
        }


def _regressor(N: np.ndarray, model: str) -> np.ndarray:
    if model == 'log_over_n':
        return np.log(N) / N
    return 1.0 / N


def _r_squared(observed: np.ndarray, residuals: np.ndarray) -> float:
    total = float(np.sum((observed - observed.mean()) ** 2))
    if total == 0:
        return 1.0 if np.allclose(residuals, 0) else 0.0
    return 1.0 - float(np.sum(residuals ** 2)) / total


def fit_scaling(points: Iterable[Tuple[float, float]], model: str = 'power_law') -> ScalingFit:
    """
    最小二乘拟合标度律

    power_law 在 ln v = ln a + b ln N 上做线性回归；log_over_n 与 inverse_n
    在变换后的自变量上做过原点的线性最小二乘；quadratic / quadratic_inverse
    对 N 或 1/N 做二次多项式最小二乘

    Args:
        points: (N, value) 列表，至少 3 个点
        model: 拟合模型

    Returns:
        ScalingFit: 参数、r² 与残差
    """
    if model not in SCALING_MODELS:
        raise ValueError(f'未知拟合模型: {model}，可选 {SCALING_MODELS}')
    data = np.array([(float(n), float(v)) for n, v in points], dtype=float).reshape(-1, 2)
    if len(data) < 3:
        raise ValueError(f'拟合至少需要 3 个点，实际 {len(data)}')
    sizes, values = data[:, 0], data[:, 1]
    if np.any(sizes <= 0) or not np.all(np.isfinite(data)):
        raise ValueError('N 必须为正且所有值必须有限')

    if model == 'power_law':
        if np.any(values <= 0):
            raise ValueError('power_law 拟合要求所有值为正')
        log_n, log_v = np.log(sizes), np.log(values)
        result = linregress(log_n, log_v)
        residuals = log_v - (result.intercept + result.slope * log_n)
        params = (float(math.exp(result.intercept)), float(result.slope))
        r2 = _r_squared(log_v, residuals)
    elif model in POLYNOMIAL_MODELS:
        x = sizes if model == 'quadratic' else 1.0 / sizes
        coeff = P.polyfit(x, values, POLYNOMIAL_DEGREE)
        residuals = values - P.polyval(x, coeff)
        params = tuple(float(c) for c in coeff)
        r2 = _r_squared(values, residuals)
    else:
        x = _regressor(sizes, model)
        coeff, _, _, _ = np.linalg.lstsq(x[:, np.newaxis], values, rcond=None)
        residuals = values - coeff[0] * x
        params = (float(coeff[0]),)
        r2 = _r_squared(values, residuals)

    logger.debug('拟合 %s: params=%s r²=%.6f', model, params, r2)
    return ScalingFit(model=model, params=params, r_squared=r2, residuals=residuals,
                      sizes=sizes.astype(int))


def fit_burst_scalings(features_by_size: Mapping[int, Mapping[str, BurstFeatures]]) -> Dict[str, dict]:
    """
    对每条强度序列拟合 I_max ∝ N^b、w ∝ N^b 与 t_D = a·lnN/N，
    另给出 I_max 对 N、w 对 1/N 的二次多项式拟合（i_max_quadratic、width_quadratic_inverse）

    只用有内部峰的点；有效点少于 3 个的量跳过。I_2 与总强度的 t_D 拟合照常给出，
    但标记为 excluded

    Args:
        features_by_size: {N: {序列名: BurstFeatures}}

    Returns:
        Dict[str, dict]: {序列名: {'i_max': ..., 'width': ..., 't_delay': ..., 'delay_fit_excluded': bool}}
    """
    names = sorted({name for per_size in features_by_size.values() for name in per_size})
    fits = {}
    for name in names:
        entry = {'delay_fit_excluded': name in DELAY_FIT_EXCLUDED}
        for key, quantity, model in FIT_PLAN:
            points = []
            for N in sorted(features_by_size):
                features = features_by_size[N].get(name)
                if features is None or not features.has_peak:
                    continue
                value = getattr(features, quantity)
                if np.isfinite(value) and value > 0:
                    points.append((N, value))
            if len(points) < 3:
                logger.warning('%s 的 %s 只有 %d 个有效点，跳过拟合', name, key, len(points))
                entry[key] = None
                continue
            entry[key] = fit_scaling(points, model).to_dict()
        fits[name] = entry
    return fits


# ==================== 亚稳平台 ====================

@dataclass
class PlateauWindow:
    t_start: float
    t_end: float
    level: float

    @property
    def duration(self) -> float:
        return self.t_end - self.t_start


def detect_plateau(times: Sequence[float], intensity: Sequence[float], gamma_0: float, gamma_1: float,
                   after_time: float = 0.0) -> Optional[PlateauWindow]:
    """
    寻找 |dI/dt| < 0.05·I_peak·γ_0 且持续至少 1/γ_1 的最长窗口

    窗口必须在 after_time 之后（通常取 ξ=2 脉冲右侧半高处），并且强度不低于
    1e-3·I_peak，以排除末态衰减后的零强度尾部

    Args:
        times: 采样时间
        intensity: 总强度
        gamma_0: ξ=0 通道速率
        gamma_1: ξ=1 通道速率
        after_time: 窗口起点下限

    Returns:
        Optional[PlateauWindow]: 找到的窗口，没有时为 None
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(intensity, dtype=float)
    if len(t) < 3:
        return None
    peak = float(np.max(y))
    if peak <= 0:
        return None
    slope = np.gradient(y, t)
    flat = (np.abs(slope) < PLATEAU_SLOPE * peak * gamma_0) & (y >= PLATEAU_FLOOR * peak) & (t >= after_time)

    best = None
    start = None
    for i, ok in enumerate(np.append(flat, False)):
        if ok and start is None:
            start = i
        elif not ok and start is not None:
            end = i - 1
            duration = t[end] - t[start]
            if best is None or duration > best[1] - best[0]:
                best = (t[start], t[end], float(np.mean(y[start:end + 1])))
            start = None
    if best is None or best[1] - best[0] < 1.0 / gamma_1:
        return None
    return PlateauWindow(float(best[0]), float(best[1]), best[2])


# ==================== 有限尺寸汇总 ====================

@dataclass
class SizeSummary:
    """
    一个系统尺寸的稳态汇总

    Attributes:
        N: 格点数
        excitation_density: ⟨n_total⟩/N
        entropy_mean: 轨迹平均的末态纠缠熵（没有轨迹时为 NaN）
        trivial_fraction: 回到真空的轨迹比例；只有主方程时取 ρ 在真空上的布居
        steady_reached: 是否在 t_max 之前到达稳态
        steady_time: 到达稳态的时间
    """
    N: int
    excitation_density: float
    entropy_mean: float
    trivial_fraction: float
    steady_reached: bool
    steady_time: float

    def to_dict(self) -> dict:
        return {
            'N': self.N,
            'excitation_density': self.excitation_density,
            'entropy_mean': self.entropy_mean,
            'trivial_fraction': self.trivial_fraction,
            'steady_reached': self.steady_reached,
            'steady_time': self.steady_time,
        }


@dataclass
class SizeRun:
    """一个尺寸的运行结果，主方程与轨迹至少给出一个"""
    N: int
    evolution: Optional[object] = None
    ensemble: Optional[object] = None


def steady_state_summary(runs: Iterable[SizeRun], steady_tol: float = 1e-6,
                         window: int = 5) -> List[SizeSummary]:
    """
    汇总每个尺寸的稳态激发密度、平均熵与平凡轨迹比例

    激发密度优先用主方程末态，没有主方程时用轨迹平均

    Args:
        runs: 各尺寸的运行结果
        steady_tol: 稳态阈值
        window: 稳态窗口

    Returns:
        List[SizeSummary]: 按 N 排序
    """
    summaries = []
    for run in sorted(runs, key=lambda r: r.N):
        if run.evolution is None and run.ensemble is None:
            raise ValueError(f'N={run.N} 没有任何运行结果')
        if run.evolution is not None:
            evolution = run.evolution
            n_final = evolution.records[-1].n_total
            index = first_quiet_index(evolution.series('I_total'), steady_tol, window,
                                      evolution.derivative_norms)
            times = evolution.times
            trivial = float(np.real(evolution.final_state.data[0, 0]))
        else:
            ensemble = run.ensemble
            n_final = float(ensemble.mean('n')[-1])
            index = first_quiet_index(ensemble.mean('I_total'), steady_tol, window)
            times = ensemble.times
            trivial = ensemble.trivial_fraction
        entropy = float('nan')
        if run.ensemble is not None:
            entropy = run.ensemble.mean_final_entropy
            trivial = run.ensemble.trivial_fraction
        if index is None:
            logger.warning('N=%d 在 t_max=%.4g 内未到达稳态，使用末时刻的值', run.N, times[-1])
        summaries.append(SizeSummary(
            N=int(run.N),
            excitation_density=float(n_final) / run.N,
            entropy_mean=entropy,
            trivial_fraction=float(trivial),
            steady_reached=index is not None,
            steady_time=float('nan') if index is None else float(times[index]),
        ))
    return summaries
