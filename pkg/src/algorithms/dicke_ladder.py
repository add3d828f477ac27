#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Dicke 梯子解析参考
全激发初态在无约束集体衰减下始终对 |J,M⟩ 对角，主方程化为 N+1 能级的级联速率方程
"""

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from ..errors import NumericalError

logger = logging.getLogger(__name__)


@dataclass
class DickeLadderSeries:
    """
    级联解

    Attributes:
        times: 采样时间
        populations: (采样点, N+1)，第 s 列为已发射 s 个光子（M = N/2 - s）的占据
        intensity: I(t) = Σ_s r_s p_s
        n_total: 激发数 Σ_s (N-s) p_s
        gamma: 单体速率
    """
    times: np.ndarray
    populations: np.ndarray
    intensity: np.ndarray
    n_total: np.ndarray
    gamma: float

    @property
    def N(self) -> int:
        return self.populations.shape[1] - 1


def ladder_rates(N: int, gamma: float) -> np.ndarray:
    """r_s = γ(J+M)(J-M+1) = γ(N-s)(s+1)，s = 0..N"""
    s = np.arange(N + 1, dtype=float)
    return gamma * (N - s) * (s + 1)


def dicke_delay_estimate(N: int, gamma: float) -> float:
    """线性化级联的等待时间和 Σ_{s=1}^{N} 1/(γNs) ≈ (ln N + 0.577)/(γN)"""
    s = np.arange(1, N + 1, dtype=float)
    return float(np.sum(1.0 / (gamma * N * s)))


def dicke_width_estimate(N: int, gamma: float) -> float:
    return 1.0 / (gamma * N)


def default_ladder_horizon(N: int, gamma: float) -> float:
    """覆盖延迟和完整衰减尾部的时间窗口"""
    return 4.0 * dicke_delay_estimate(N, gamma) + 20.0 / (gamma * N)


def dicke_ladder_reference(N: int, gamma: float, times: Optional[np.ndarray] = None,
                           n_samples: int = 2001) -> DickeLadderSeries:
    """
    求解级联速率方程 dp_s/dt = r_{s-1} p_{s-1} - r_s p_s，p_0(0) = 1

    Args:
        N: 格点数（N ≥ 1）
        gamma: 单体衰减率
        times: 采样时间，缺省时在 default_ladder_horizon 内均匀取 n_samples 个点
        n_samples: 缺省网格的点数

    Returns:
        DickeLadderSeries: 占据、强度、激发数的时间序列
    """
    if int(N) != N or N < 1:
        raise ValueError(f'N 必须是正整数: {N}')
    if not gamma > 0:
        raise ValueError(f'gamma 必须大于 0: {gamma}')
    N = int(N)
    if times is None:
        times = np.linspace(0.0, default_ladder_horizon(N, gamma), int(n_samples))
    times = np.asarray(times, dtype=float)
    if len(times) == 0 or times[0] < 0 or np.any(np.diff(times) <= 0):
        raise ValueError('采样时间必须非负且严格递增')

    rates = ladder_rates(N, gamma)

    def cascade(t, p):
        flow = rates * p
        dp = -flow
        dp[1:] += flow[:-1]
        return dp

    p0 = np.zeros(N + 1)
    p0[0] = 1.0
    if times[-1] == 0.0:
        populations = p0[np.newaxis, :].repeat(len(times), axis=0)
    else:
        solution = solve_ivp(cascade, (0.0, float(times[-1])), p0, method='DOP853',
                             t_eval=times, rtol=1e-10, atol=1e-12)
        if not solution.success:
            raise NumericalError(f'Dicke 级联积分失败: {solution.message}',
                                 time=float(solution.t[-1]) if len(solution.t) else 0.0)
        populations = solution.y.T

    excitations = N - np.arange(N + 1, dtype=float)
    logger.debug('Dicke 级联 N=%d 完成，%d 个采样点', N, len(times))
    return DickeLadderSeries(
        times=times,
        populations=populations,
        intensity=populations @ rates,
        n_total=populations @ excitations,
        gamma=float(gamma),
    )
