#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
物理观测量
对纯态和密度矩阵统一计算激发数、分频辐射强度、动量占据、能量和半链纠缠熵
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .chain_operators import (ChannelSpec, SparseComplexOperator, _momentum_lowering,
                              build_collective_lowering, ChainParams, momentum_index, popcount)
from .states import as_array, basis_state

logger = logging.getLogger(__name__)

# 负本征值截断阈值
EIGENVALUE_CLAMP = 1e-10
# n_k/n 在 n 小于该值时记为 NaN
RATIO_FLOOR = 1e-9


@dataclass
class ObservableRecord:
    """
    一个采样时刻的全部观测量，也是 CSV 输出的一行

    intensity 依次为 (I_0, I_1, I_2, I_total)；Dicke 模式下前三项为 NaN，
    I_total 为集体通道的强度
    """
    time: float
    n_total: float
    intensity: Tuple[float, float, float, float]
    momentum_occ: np.ndarray
    entropy_halfchain: Optional[float] = None
    energy: float = float('nan')
    emitted_power: float = float('nan')
    channel_intensities: Dict[str, float] = field(default_factory=dict)

    @property
    def i_total(self) -> float:
        return self.intensity[3]

    def momentum_ratio(self) -> np.ndarray:
        """n_k / n，n 过小时为 NaN"""
        if self.n_total < RATIO_FLOOR:
            return np.full(len(self.momentum_occ), np.nan)
        return np.asarray(self.momentum_occ) / self.n_total


def site_count(dim: int) -> int:
    N = int(dim).bit_length() - 1
    if N < 1 or (1 << N) != dim:
        raise ValueError(f'维数 {dim} 不是 2 的幂')
    return N


def _check_dim(arr: np.ndarray, dim: int):
    if arr.shape[0] != dim:
        raise ValueError(f'维数不一致: 态为 {arr.shape[0]}，算符为 {dim}')


def lowering_expectation(state, lowering) -> float:
    """⟨L^+ L⟩，纯态为 ‖Lψ‖²，密度矩阵为 Tr(L ρ L^+)"""
    L = lowering.matrix if isinstance(lowering, SparseComplexOperator) else lowering
    arr = as_array(state)
    _check_dim(arr, L.shape[0])
    if arr.ndim == 1:
        image = L @ arr
        return float(np.vdot(image, image).real)
    product = L @ arr
    return float(L.conj().multiply(product).sum().real)


def channel_intensity(state, channel: ChannelSpec) -> float:
    """
    I_ξ = γ_ξ ⟨S_ξ^+ S_ξ^-⟩

    Args:
        state: 归一化纯态或单位迹密度矩阵
        channel: 通道

    Returns:
        float: 光子发射速率
    """
    return channel.rate * lowering_expectation(state, channel.op)


def excitation_number(state) -> float:
    """总激发数期望 ⟨Σ_j n_j⟩"""
    arr = as_array(state)
    weights = popcount(np.arange(arr.shape[0])).astype(float)
    if arr.ndim == 1:
        return float(np.sum(weights * np.abs(arr) ** 2))
    return float(np.sum(weights * np.real(np.diagonal(arr))))


def energy(state, hamiltonian: SparseComplexOperator) -> float:
    """⟨H_A⟩"""
    arr = as_array(state)
    _check_dim(arr, hamiltonian.dim)
    if hamiltonian.is_diagonal:
        weights = np.real(hamiltonian.diagonal())
        if arr.ndim == 1:
            return float(np.sum(weights * np.abs(arr) ** 2))
        return float(np.sum(weights * np.real(np.diagonal(arr))))
    if arr.ndim == 1:
        return float(np.vdot(arr, hamiltonian.matrix @ arr).real)
    return float(np.real(np.trace(hamiltonian.matrix @ arr)))


def momentum_occupation(state, k: float) -> float:
    """⟨ñ_k⟩ = ⟨S̃_k^+ S̃_k^-⟩，k 必须在动量格上"""
    arr = as_array(state)
    N = site_count(arr.shape[0])
    return lowering_expectation(arr, _momentum_lowering(N, momentum_index(k, N)))


def momentum_occupations(state, operators: Optional[Sequence] = None) -> np.ndarray:
    """全部动量模的占据，按 m = 0..N-1 排列"""
    arr = as_array(state)
    if operators is None:
        N = site_count(arr.shape[0])
        operators = [_momentum_lowering(N, m) for m in range(N)]
    return np.array([lowering_expectation(arr, op) for op in operators])


# ==================== 约化密度矩阵与纠缠熵 ====================

def _normalize_sites(keep_sites: Iterable[int], N: int) -> List[int]:
    sites = sorted(set(int(s) for s in keep_sites))
    if len(sites) == 0:
        raise ValueError('保留格点集合为空')
    if sites[0] < 0 or sites[-1] >= N:
        raise ValueError(f'保留格点越界: {sites}')
    return sites


def _site_axes(sites: Sequence[int], N: int) -> List[int]:
    # reshape 成 [2]*N 后第 a 轴对应格点 N-1-a；约化矩阵中格点 sites[i] 对应第 i 位
    return [N - 1 - s for s in reversed(sites)]


def partial_trace(state, keep_sites: Iterable[int]) -> np.ndarray:
    """
    对 keep_sites 以外的格点求偏迹

    Args:
        state: 纯态或密度矩阵
        keep_sites: 保留的格点，约化矩阵中第 i 个保留格点对应第 i 位

    Returns:
        np.ndarray: 2^|keep| 维约化密度矩阵
    """
    arr = as_array(state)
    N = site_count(arr.shape[0])
    sites = _normalize_sites(keep_sites, N)
    traced = [s for s in range(N) if s not in sites]
    keep_axes = _site_axes(sites, N)
    trace_axes = _site_axes(traced, N)
    d_keep = 1 << len(sites)
    d_trace = 1 << len(traced)

    if arr.ndim == 1:
        tensor = arr.reshape([2] * N).transpose(keep_axes + trace_axes).reshape(d_keep, d_trace)
        return tensor @ tensor.conj().T

    tensor = arr.reshape([2] * (2 * N))
    order = keep_axes + trace_axes + [N + a for a in keep_axes] + [N + a for a in trace_axes]
    tensor = tensor.transpose(order).reshape(d_keep, d_trace, d_keep, d_trace)
    return np.einsum('ajbj->ab', tensor)


def _entropy_from_probabilities(probabilities: np.ndarray) -> float:
    p = np.asarray(probabilities, dtype=float)
    if np.any(p < -EIGENVALUE_CLAMP):
        logger.warning('约化密度矩阵出现负本征值 %.3e，已截断为 0', float(p.min()))
    p = p[p > 0]
    return float(-np.sum(p * np.log(p)))


def von_neumann_entropy(rho_reduced: np.ndarray) -> float:
    """
    S = -Σ λ ln λ（自然对数），0·ln0 记为 0

    Args:
        rho_reduced: 厄米半正定单位迹矩阵

    Returns:
        float: 熵，单位 nats
    """
    rho = np.asarray(rho_reduced)
    trace = np.trace(rho).real
    if abs(trace - 1.0) > 1e-6:
        raise ValueError(f'约化密度矩阵的迹偏离 1: {trace}')
    eigenvalues = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    return _entropy_from_probabilities(eigenvalues)


def schmidt_entropy(psi: np.ndarray, keep_sites: Iterable[int]) -> float:
    """纯态的二分纠缠熵，用 Schmidt 分解（SVD）代替对角化"""
    arr = as_array(psi)
    N = site_count(arr.shape[0])
    sites = _normalize_sites(keep_sites, N)
    if len(sites) == N:
        return 0.0
    traced = [s for s in range(N) if s not in sites]
    tensor = arr.reshape([2] * N).transpose(_site_axes(sites, N) + _site_axes(traced, N))
    matrix = tensor.reshape(1 << len(sites), 1 << len(traced))
    singular = np.linalg.svd(matrix, compute_uv=False)
    norm = np.sum(singular ** 2)
    return _entropy_from_probabilities(singular ** 2 / norm)


def default_entropy_cut(N: int) -> Tuple[int, ...]:
    """前 floor(N/2) 个连续格点"""
    return tuple(range(max(1, N // 2)))


def entropy_bound(keep: int, N: int) -> float:
    return min(keep, N - keep) * math.log(2.0)


# ==================== 汇总 ====================

def measure(state, model, time: float = 0.0, entropy_cut: Optional[Sequence[int]] = None) -> ObservableRecord:
    """
    计算一个时刻的全部观测量

    Args:
        state: 纯态或密度矩阵
        model: ChainModel
        time: 采样时间
        entropy_cut: 给出时计算该格点集合的纠缠熵（只对纯态有意义）

    Returns:
        ObservableRecord: 观测量记录
    """
    arr = as_array(state)
    per_channel = {channel.column: channel_intensity(arr, channel) for channel in model.channels}
    total = float(sum(per_channel.values()))
    if model.mode == 'kc':
        intensity = (per_channel['I_0'], per_channel['I_1'], per_channel['I_2'], total)
    else:
        intensity = (float('nan'), float('nan'), float('nan'), total)
    power = float(sum(channel.omega * per_channel[channel.column] for channel in model.channels))

    entropy = None
    if entropy_cut is not None:
        if arr.ndim == 1:
            entropy = schmidt_entropy(arr, entropy_cut)
        else:
            entropy = von_neumann_entropy(partial_trace(arr, entropy_cut))

    return ObservableRecord(
        time=float(time),
        n_total=excitation_number(arr),
        intensity=intensity,
        momentum_occ=momentum_occupations(arr, model.momentum_ops),
        entropy_halfchain=entropy,
        energy=energy(arr, model.hamiltonian),
        emitted_power=power,
        channel_intensities=per_channel,
    )


def dicke_ladder_state(N: int, M: float) -> np.ndarray:
    """
    |J=N/2, M⟩，由全激发态反复施加对称降算符并归一化得到

    Args:
        N: 格点数
        M: 磁量子数，取 N/2, N/2-1, ..., -N/2

    Returns:
        np.ndarray: 归一化振幅
    """
    J = N / 2.0
    steps = J - M
    if abs(steps - round(steps)) > 1e-12 or not 0 <= round(steps) <= N:
        raise ValueError(f'M={M} 不在 J={J} 的 Dicke 梯子上')
    lowering = build_collective_lowering(ChainParams(N=N)).matrix
    psi = basis_state((1 << N) - 1, N).amplitudes
    for _ in range(int(round(steps))):
        psi = lowering @ psi
        psi = psi / np.linalg.norm(psi)
    return psi
