#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
一维周期自旋链的算符构造
在 2^N 维计算基上构造哈密顿量、受约束跃迁算符、集体降算符和动量模降算符，
并提供本征算符恒等式的校验
"""

import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sp

logger = logging.getLogger(__name__)

# 约束通道编号 ξ = 激发近邻数
CHANNEL_INDICES = (0, 1, 2)


@dataclass(frozen=True)
class ChainParams:
    """
    链的物理与格点参数

    Attributes:
        N: 格点数
        delta: 裸跃迁频率 Δ
        j_int: 近邻相互作用 J
        gamma_prefactor: 衰减率前因子 Γ，γ_ξ = Γ(Δ+ξJ)^3
    """
    N: int
    delta: float = 1.0
    j_int: float = 0.2
    gamma_prefactor: float = 1.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f'格点数必须是正整数: N={self.N}')
        if not self.delta > 0:
            raise ValueError(f'delta 必须大于 0: {self.delta}')
        if not self.j_int >= 0:
            raise ValueError(f'j_int 不能为负: {self.j_int}')
        if not self.gamma_prefactor > 0:
            raise ValueError(f'gamma_prefactor 必须大于 0: {self.gamma_prefactor}')

    @property
    def dim(self) -> int:
        return 1 << self.N

    def require_chain(self):
        """ξ=2 投影需要两个不同的近邻，周期链至少 3 个格点"""
        if self.N < 3:
            raise ValueError(f'N ≥ 3 required (got N={self.N})')

    def omega(self, xi: int) -> float:
        return self.delta + xi * self.j_int

    def rate(self, xi: int) -> float:
        return self.gamma_prefactor * self.omega(xi) ** 3


# ==================== 计算基编码 ====================

def encode_config(excited_sites, N: int) -> int:
    """
    把激发格点集合编码成整数，第 j 位为 1 表示格点 j 处于 ↑

    Args:
        excited_sites: 激发格点下标
        N: 格点数

    Returns:
        int: 基矢编号
    """
    bits = 0
    for site in excited_sites:
        if not 0 <= site < N:
            raise ValueError(f'格点下标越界: {site}')
        bits |= 1 << site
    return bits


def decode_config(bits: int, N: int) -> Tuple[int, ...]:
    """把基矢编号解码成每个格点的占据数 (n_0, ..., n_{N-1})"""
    if not 0 <= bits < (1 << N):
        raise ValueError(f'基矢编号越界: {bits}')
    return tuple((bits >> site) & 1 for site in range(N))


def config_from_string(pattern: str) -> int:
    """'↑↓↑' 或 'udu' / '101' 形式的字符串，第一个字符对应格点 0"""
    up = {'↑', 'u', 'U', '1'}
    return encode_config([i for i, ch in enumerate(pattern) if ch in up], len(pattern))


def popcount(bits) -> np.ndarray:
    """逐元素统计置位数（总激发数）"""
    bits = np.asarray(bits, dtype=np.int64)
    count = np.zeros_like(bits)
    value = bits.copy()
    while np.any(value):
        count += value & 1
        value >>= 1
    return count


def neighbor_count(config: int, site: int, N: int) -> int:
    """
    返回 n_{site-1} + n_{site+1}（周期边界）

    Args:
        config: 基矢编号
        site: 格点下标
        N: 格点数
    """
    if not 0 <= site < N:
        raise ValueError(f'格点下标越界: {site}')
    left = (config >> ((site - 1) % N)) & 1
    right = (config >> ((site + 1) % N)) & 1
    return int(left + right)


def _all_configs(N: int) -> np.ndarray:
    return np.arange(1 << N, dtype=np.int64)


def _bit(configs: np.ndarray, site: int) -> np.ndarray:
    return (configs >> site) & 1


# ==================== 稀疏算符 ====================

@dataclass(frozen=True, eq=False)
class SparseComplexOperator:
    """
    2^N 维计算基上的稀疏复矩阵
    组装后不再修改，可以在并行轨迹之间只读共享
    """
    matrix: sp.csr_matrix
    is_diagonal: bool = False
    label: str = ''

    @classmethod
    def assemble(cls, rows, cols, values, dim: int, is_diagonal: bool = False, label: str = ''):
        """由 (行, 列, 值) 三元组组装，合并重复项并删除精确零"""
        matrix = sp.coo_matrix(
            (np.asarray(values, dtype=np.complex128),
             (np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))),
            shape=(dim, dim),
        ).tocsr()
        matrix.sum_duplicates()
        matrix.eliminate_zeros()
        matrix.sort_indices()
        return cls(matrix=matrix, is_diagonal=is_diagonal, label=label)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def dot(self, vector: np.ndarray) -> np.ndarray:
        return self.matrix @ vector

    def dagger(self) -> 'SparseComplexOperator':
        return SparseComplexOperator(self.matrix.conj().T.tocsr(), self.is_diagonal, f'{self.label}†')

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def entries(self) -> List[Tuple[int, int, complex]]:
        coo = self.matrix.tocoo()
        return list(zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))

    def __add__(self, other: 'SparseComplexOperator') -> 'SparseComplexOperator':
        if self.dim != other.dim:
            raise ValueError(f'维数不一致: {self.dim} != {other.dim}')
        matrix = (self.matrix + other.matrix).tocsr()
        matrix.eliminate_zeros()
        return SparseComplexOperator(matrix, self.is_diagonal and other.is_diagonal)


@dataclass(frozen=True, eq=False)
class ChannelSpec:
    """
    一个耗散通道：频率 ω、速率 γ 与跃迁算符

    xi 为 None 表示 Dicke 参考模式的集体通道
    """
    xi: Optional[int]
    omega: float
    rate: float
    op: SparseComplexOperator
    # S^+ S^-，构造时一并算好
    number_op: sp.csr_matrix = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.number_op is None:
            lowering = self.op.matrix
            object.__setattr__(self, 'number_op', (lowering.conj().T @ lowering).tocsr())

    @property
    def label(self) -> str:
        return 'dicke' if self.xi is None else f'xi={self.xi}'

    @property
    def column(self) -> str:
        return 'I_dicke' if self.xi is None else f'I_{self.xi}'


def build_hamiltonian(params: ChainParams) -> SparseComplexOperator:
    """
    H_A = Δ Σ n_j + J Σ n_j n_{j+1}（周期边界），在计算基上是对角的

    Args:
        params: 链参数

    Returns:
        SparseComplexOperator: 对角哈密顿量
    """
    params.require_chain()
    N = params.N
    configs = _all_configs(N)
    # rotated 的第 j 位等于 n_{j+1}
    rotated = (configs >> 1) | ((configs & 1) << (N - 1))
    energies = params.delta * popcount(configs) + params.j_int * popcount(configs & rotated)
    return SparseComplexOperator.assemble(configs, configs, energies, params.dim,
                                          is_diagonal=True, label='H_A')


def build_number_operator(N: int) -> SparseComplexOperator:
    """总激发数 n = Σ_j n_j"""
    configs = _all_configs(N)
    return SparseComplexOperator.assemble(configs, configs, popcount(configs), 1 << N,
                                          is_diagonal=True, label='n')


def build_constrained_jump(params: ChainParams, xi: int) -> ChannelSpec:
    """
    S_ξ^- = Σ_j P_j^ξ σ_j^-，只有恰好 ξ 个激发近邻的格点可以退激发

    Args:
        params: 链参数
        xi: 通道编号 0/1/2

    Returns:
        ChannelSpec: 通道描述
    """
    if xi not in CHANNEL_INDICES:
        raise ValueError(f'非法的通道编号 ξ={xi}，只允许 0、1、2')
    params.require_chain()
    N = params.N
    configs = _all_configs(N)
    rows, cols = [], []
    for site in range(N):
        neighbours = _bit(configs, (site - 1) % N) + _bit(configs, (site + 1) % N)
        active = (_bit(configs, site) == 1) & (neighbours == xi)
        sources = configs[active]
        cols.append(sources)
        rows.append(sources ^ (1 << site))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    op = SparseComplexOperator.assemble(rows, cols, np.ones(len(rows)), params.dim, label=f'S_{xi}^-')
    return ChannelSpec(xi=xi, omega=params.omega(xi), rate=params.rate(xi), op=op)


def build_collective_lowering(params: ChainParams) -> SparseComplexOperator:
    """无约束的集体降算符 S^- = Σ_j σ_j^-（Dicke 参考模式使用）"""
    N = params.N
    configs = _all_configs(N)
    rows, cols = [], []
    for site in range(N):
        sources = configs[_bit(configs, site) == 1]
        cols.append(sources)
        rows.append(sources ^ (1 << site))
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    return SparseComplexOperator.assemble(rows, cols, np.ones(len(rows)), params.dim, label='S^-')


def momentum_grid(N: int) -> np.ndarray:
    """k = 2πm/N，m = 0..N-1"""
    return 2.0 * np.pi * np.arange(N) / N


def momentum_index(k: float, N: int) -> int:
    """把动量 k 换算成格点编号 m，k 不在动量格上时报错"""
    m = k * N / (2.0 * np.pi)
    m_int = int(round(m))
    if abs(m - m_int) > 1e-9 or not 0 <= m_int < N:
        raise ValueError(f'k={k} 不在动量格 2πm/{N} (m=0..{N - 1}) 上')
    return m_int


def build_momentum_lowering(params: ChainParams, k: float) -> SparseComplexOperator:
    """
    傅里叶变换的降算符 S̃_k^- = (1/√N) Σ_j e^{-ikj} σ_j^-

    Args:
        params: 链参数
        k: 动量，必须在 2πm/N 格上

    Returns:
        SparseComplexOperator: 复系数稀疏算符
    """
    m = momentum_index(k, params.N)
    return _momentum_lowering(params.N, m)


@lru_cache(maxsize=64)
def _momentum_lowering(N: int, m: int) -> SparseComplexOperator:
    configs = _all_configs(N)
    k = 2.0 * np.pi * m / N
    rows, cols, values = [], [], []
    for site in range(N):
        sources = configs[_bit(configs, site) == 1]
        cols.append(sources)
        rows.append(sources ^ (1 << site))
        values.append(np.full(len(sources), np.exp(-1j * k * site) / np.sqrt(N)))
    return SparseComplexOperator.assemble(np.concatenate(rows), np.concatenate(cols),
                                          np.concatenate(values), 1 << N, label=f'S_k{m}^-')


def momentum_operators(N: int) -> List[sp.csr_matrix]:
    """所有动量模的 S̃_k^-，按 m 排列"""
    return [_momentum_lowering(N, m).matrix for m in range(N)]


def verify_eigenoperator(H: SparseComplexOperator, channel: ChannelSpec,
                         omega: Optional[float] = None) -> float:
    """
    计算 ‖[H, S_ξ^-] + ω_ξ S_ξ^-‖_max

    Args:
        H: 哈密顿量
        channel: 通道
        omega: 用于检验的频率，默认取通道自身的 ω_ξ

    Returns:
        float: 残差的最大模
    """
    A = channel.op.matrix
    if H.dim != A.shape[0]:
        raise ValueError(f'维数不一致: H 为 {H.dim}，跃迁算符为 {A.shape[0]}')
    w = channel.omega if omega is None else omega
    residual = (H.matrix @ A - A @ H.matrix + w * A).tocoo()
    if residual.nnz == 0:
        return 0.0
    return float(np.max(np.abs(residual.data)))


class ChainModel:
    """
    一次运行用到的全部算符，构造一次后只读

    mode='kc' 时有三个受约束通道；mode='dicke' 时只有一个集体通道，
    速率默认为 ΓΔ³，哈密顿量保持原配置
    """

    def __init__(self, params: ChainParams, mode: str = 'kc', dicke_rate: Optional[float] = None):
        if mode not in ('kc', 'dicke'):
            raise ValueError(f'未知模式: {mode}')
        self.params = params
        self.mode = mode
        self.N = params.N
        self.dim = params.dim

        if params.N >= 3:
            self.hamiltonian = build_hamiltonian(params)
        else:
            # N<3 只出现在 Dicke 参考模式，近邻相互作用没有定义
            number = build_number_operator(params.N)
            self.hamiltonian = SparseComplexOperator(params.delta * number.matrix, True, 'H_A')

        self.collective = build_collective_lowering(params)
        if mode == 'kc':
            self.channels = [build_constrained_jump(params, xi) for xi in CHANNEL_INDICES]
            self.dicke_rate = None
        else:
            if dicke_rate is None:
                dicke_rate = params.gamma_prefactor * params.delta ** 3
                logger.info('Dicke 模式未指定速率，使用 ΓΔ³ = %.6g', dicke_rate)
            self.dicke_rate = float(dicke_rate)
            self.channels = [build_dicke_channel(params, self.dicke_rate, self.collective)]

        self.momenta = momentum_grid(params.N)
        self.momentum_ops = momentum_operators(params.N)
        self.excitation_diag = popcount(_all_configs(params.N)).astype(float)

    @property
    def rates(self) -> Dict[int, float]:
        """KC 通道速率 γ_0, γ_1, γ_2（Dicke 模式也给出，用于时间单位换算）"""
        return {xi: self.params.rate(xi) for xi in CHANNEL_INDICES}

    def channel_columns(self) -> List[str]:
        return [channel.column for channel in self.channels]

    def max_rate(self) -> float:
        return max(channel.rate for channel in self.channels)


def build_dicke_channel(params: ChainParams, rate: float,
                        collective: Optional[SparseComplexOperator] = None) -> ChannelSpec:
    """Dicke 参考模式的单一集体通道，频率取 Δ"""
    if not rate > 0:
        raise ValueError(f'Dicke 速率必须大于 0: {rate}')
    op = collective if collective is not None else build_collective_lowering(params)
    return ChannelSpec(xi=None, omega=params.delta, rate=float(rate), op=op)
