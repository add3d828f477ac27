#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
Lindblad 主方程积分器
对完整密度矩阵做自适应嵌入式 Runge-Kutta 演化，按固定间隔采样观测量，
并判断是否到达稳态；另提供向量化 Liouvillian 作为小体系的精确对照
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.integrate import DOP853
from scipy.linalg import expm
from scipy.sparse.linalg import expm_multiply

from ..errors import InvariantViolation, NumericalError
from .chain_operators import ChannelSpec, SparseComplexOperator
from .observables import ObservableRecord, channel_intensity, excitation_number, measure
from .states import DensityMatrix, as_array

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-9
HERMITICITY_TOL = 1e-10
POSITIVITY_WARN = 1e-8
POSITIVITY_ABORT = 1e-6
# 主方程模式的体系上限
MAX_MASTER_SITES = 12
POSITIVITY_CHECK_SITES = 8


@dataclass
class EvolutionConfig:
    """
    主方程积分参数

    Attributes:
        t_max: 终止时间，0 表示只返回初态
        dt_initial: 初始步长
        rel_tol, abs_tol: 单步误差控制
        sample_interval: 观测量采样间隔
        steady_tol: 稳态判据阈值
        steady_window: 稳态判据需要连续满足的采样点数
    """
    t_max: float = 20.0
    dt_initial: float = 1e-3
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    sample_interval: float = 0.05
    steady_tol: float = 1e-6
    steady_window: int = 5

    def __post_init__(self):
        if self.t_max < 0:
            raise ValueError(f't_max 不能为负: {self.t_max}')
        for name in ('dt_initial', 'rel_tol', 'abs_tol', 'sample_interval', 'steady_tol'):
            if not getattr(self, name) > 0:
                raise ValueError(f'{name} 必须大于 0: {getattr(self, name)}')
        if self.t_max > 0 and self.sample_interval > self.t_max:
            raise ValueError(f'sample_interval={self.sample_interval} 大于 t_max={self.t_max}')
        if int(self.steady_window) < 1:
            raise ValueError(f'steady_window 至少为 1: {self.steady_window}')

    def sample_times(self) -> np.ndarray:
        """0, Δt, 2Δt, ...，最后补上 t_max"""
        if self.t_max == 0:
            return np.array([0.0])
        count = int(np.floor(self.t_max / self.sample_interval + 1e-9))
        times = self.sample_interval * np.arange(count + 1)
        if self.t_max - times[-1] > 1e-12 * max(1.0, self.t_max):
            times = np.append(times, self.t_max)
        else:
            times[-1] = self.t_max
        return times


@dataclass
class MasterEvolution:
    """主方程演化结果：采样时刻的观测量和诊断量"""
    times: np.ndarray
    records: List[ObservableRecord]
    derivative_norms: np.ndarray
    final_state: DensityMatrix
    snapshots: List[DensityMatrix] = field(default_factory=list)
    steps: int = 0
    max_trace_drift: float = 0.0
    max_hermiticity_error: float = 0.0
    min_eigenvalue: Optional[float] = None

    def series(self, name: str) -> np.ndarray:
        """按列名取时间序列：n, I_0, I_1, I_2, I_total, energy, emitted_power"""
        if name == 'n':
            return np.array([r.n_total for r in self.records])
        if name == 'I_total':
            return np.array([r.i_total for r in self.records])
        if name in ('energy', 'emitted_power'):
            return np.array([getattr(r, name) for r in self.records])
        if name.startswith('nk_'):
            m = int(name.split('_', 1)[1])
            return np.array([r.momentum_occ[m] for r in self.records])
        return np.array([r.channel_intensities.get(name, np.nan) for r in self.records])


# ==================== 方程右端 ====================

def _check_operands(rho: np.ndarray, H: SparseComplexOperator, channels: Sequence[ChannelSpec]):
    dim = H.dim
    if rho.shape != (dim, dim):
        raise ValueError(f'维数不一致: ρ 为 {rho.shape}，H 为 {dim}')
    for channel in channels:
        if channel.op.dim != dim:
            raise ValueError(f'维数不一致: 通道 {channel.label} 为 {channel.op.dim}，H 为 {dim}')


def lindblad_rhs(rho, H: SparseComplexOperator, channels: Sequence[ChannelSpec]) -> np.ndarray:
    """
    dρ/dt = -i[H,ρ] + Σ_ξ γ_ξ (S_ξ^- ρ S_ξ^+ - ½{S_ξ^+ S_ξ^-, ρ})

    Args:
        rho: 密度矩阵
        H: 哈密顿量
        channels: 耗散通道

    Returns:
        np.ndarray: 时间导数（厄米、无迹）
    """
    rho = as_array(rho)
    _check_operands(rho, H, channels)
    Hm = H.matrix
    derivative = -1j * (Hm @ rho - (Hm.T @ rho.T).T)
    for channel in channels:
        L = channel.op.matrix
        Ld = L.conj().T.tocsr()
        LdL = channel.number_op
        jump = L @ (Ld.T @ rho.T).T
        anticommutator = LdL @ rho + (LdL.T @ rho.T).T
        derivative = derivative + channel.rate * (jump - 0.5 * anticommutator)
    return derivative


class LindbladSolver:
    """
    主方程积分器

    右端写成 -i(H_eff ρ - ρ H_eff^+) + Σ γ L ρ L^+，H_eff = H - (i/2) Σ γ L^+L，
    算符在构造时预先组装
    """

    def __init__(self, hamiltonian: SparseComplexOperator, channels: Sequence[ChannelSpec], model=None):
        """
        Args:
            hamiltonian: 哈密顿量
            channels: 耗散通道
            model: ChainModel，用于采样观测量；缺省时只记录 n 和强度
        """
        self.hamiltonian = hamiltonian
        self.channels = list(channels)
        self.model = model
        self.dim = hamiltonian.dim
        for channel in self.channels:
            if channel.op.dim != self.dim:
                raise ValueError(f'维数不一致: 通道 {channel.label} 为 {channel.op.dim}，H 为 {self.dim}')

        decay = sp.csr_matrix((self.dim, self.dim), dtype=np.complex128)
        for channel in self.channels:
            decay = decay + channel.rate * channel.number_op
        self.h_eff = (hamiltonian.matrix - 0.5j * decay).tocsr()
        self._jumps = [(channel.rate, channel.op.matrix) for channel in self.channels]

    def rhs(self, rho: np.ndarray) -> np.ndarray:
        """ρ 为厄米矩阵时与 lindblad_rhs 相同，结果严格厄米"""
        product = self.h_eff @ rho
        derivative = -1j * (product - product.conj().T)
        for rate, L in self._jumps:
            left = L @ rho
            derivative += rate * (L @ left.conj().T)
        return derivative

    def _vector_rhs(self, t, y):
        return self.rhs(y.reshape(self.dim, self.dim)).ravel()

    def _measure(self, rho: np.ndarray, time: float) -> ObservableRecord:
        if self.model is not None:
            return measure(rho, self.model, time)
        per_channel = {c.column: channel_intensity(rho, c) for c in self.channels}
        total = float(sum(per_channel.values()))
        return ObservableRecord(time=time, n_total=excitation_number(rho),
                                intensity=(np.nan, np.nan, np.nan, total),
                                momentum_occ=np.array([]), channel_intensities=per_channel)

    def _hermitize(self, solver: DOP853):
        """
        每个接受步之后把状态投影回厄米矩阵

        右端只读取 ρ 的厄米部分，反厄米的舍入误差不会被耗散掉，只会累积
        """
        rho = solver.y.reshape(self.dim, self.dim)
        solver.y = (0.5 * (rho + rho.conj().T)).ravel()
        solver.f = self._vector_rhs(solver.t, solver.y)

    def _check_sample(self, rho: np.ndarray, time: float, evolution_stats: dict, check_positivity: bool):
        drift = abs(np.trace(rho) - 1.0)
        herm = float(np.max(np.abs(rho - rho.conj().T)))
        evolution_stats['trace'] = max(evolution_stats['trace'], float(drift))
        evolution_stats['herm'] = max(evolution_stats['herm'], herm)
        if drift > TRACE_TOL:
            raise InvariantViolation('密度矩阵的迹偏离 1', {'time': time, 'drift': float(drift)})
        if herm > HERMITICITY_TOL:
            raise InvariantViolation('密度矩阵失去厄米性', {'time': time, 'error': herm})
        if check_positivity:
            lowest = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0])
            previous = evolution_stats['min_eig']
            evolution_stats['min_eig'] = lowest if previous is None else min(previous, lowest)
            if lowest < -POSITIVITY_ABORT:
                raise NumericalError('密度矩阵失去正定性', time=time, min_eigenvalue=lowest)
            if lowest < -POSITIVITY_WARN:
                logger.warning('t=%.6g 时最小本征值 %.3e 低于 -1e-8', time, lowest)

    def evolve(self, rho0: DensityMatrix, config: EvolutionConfig,
               keep_states: bool = False) -> MasterEvolution:
        """
        自适应步长演化到 t_max，并在采样时刻记录观测量

        Args:
            rho0: 初始密度矩阵
            config: 积分参数
            keep_states: 是否保留每个采样时刻的密度矩阵

        Returns:
            MasterEvolution: 演化结果
        """
        data0 = np.array(as_array(rho0), dtype=np.complex128)
        if data0.shape != (self.dim, self.dim):
            raise ValueError(f'维数不一致: ρ0 为 {data0.shape}，H 为 {self.dim}')
        N = self.dim.bit_length() - 1
        if N > MAX_MASTER_SITES:
            raise ValueError(f'主方程模式最多 {MAX_MASTER_SITES} 个格点，当前 N={N}')
        check_positivity = N <= POSITIVITY_CHECK_SITES

        times = config.sample_times()
        stats = {'trace': 0.0, 'herm': 0.0, 'min_eig': None}
        records, norms, snapshots = [], [], []

        def record(rho: np.ndarray, t: float):
            self._check_sample(rho, t, stats, check_positivity)
            records.append(self._measure(rho, t))
            norms.append(float(np.max(np.abs(self.rhs(rho)))))
            if keep_states:
                snapshots.append(DensityMatrix(rho.copy(), t))

        record(data0, 0.0)
        if config.t_max == 0:
            return MasterEvolution(times=times, records=records, derivative_norms=np.array(norms),
                                   final_state=DensityMatrix(data0, 0.0), snapshots=snapshots,
                                   max_trace_drift=stats['trace'], max_hermiticity_error=stats['herm'],
                                   min_eigenvalue=stats['min_eig'])

        solver = DOP853(self._vector_rhs, 0.0, data0.ravel(), config.t_max,
                        rtol=config.rel_tol, atol=config.abs_tol,
                        first_step=min(config.dt_initial, config.t_max))
        next_index = 1
        steps = 0
        last = data0
        report_every = max(1, (len(times) - 1) // 10)
        while solver.status == 'running':
            message = solver.step()
            steps += 1
            if solver.status == 'failed':
                raise NumericalError(f'积分失败: {message}', time=float(solver.t), steps=steps)
            interpolant = None
            while next_index < len(times) and times[next_index] <= solver.t + 1e-12 * config.t_max:
                t_sample = times[next_index]
                if t_sample >= solver.t:
                    y = solver.y
                else:
                    if interpolant is None:
                        interpolant = solver.dense_output()
                    y = interpolant(t_sample)
                last = y.reshape(self.dim, self.dim)
                record(last, float(t_sample))
                if next_index % report_every == 0:
                    logger.info('主方程演化 t=%.4g / %.4g，⟨n⟩=%.6f', t_sample, config.t_max,
                                records[-1].n_total)
                next_index += 1
            if solver.status == 'running':
                self._hermitize(solver)

        logger.debug('主方程积分完成，共 %d 步', steps)
        return MasterEvolution(times=times, records=records, derivative_norms=np.array(norms),
                               final_state=DensityMatrix(np.array(last), float(times[-1])),
                               snapshots=snapshots, steps=steps,
                               max_trace_drift=stats['trace'], max_hermiticity_error=stats['herm'],
                               min_eigenvalue=stats['min_eig'])


def evolve_master(rho0: DensityMatrix, H: SparseComplexOperator, channels: Sequence[ChannelSpec],
                  config: EvolutionConfig, model=None, keep_states: bool = False) -> MasterEvolution:
    """LindbladSolver 的函数式入口"""
    return LindbladSolver(H, channels, model=model).evolve(rho0, config, keep_states=keep_states)


# ==================== 稳态判据 ====================

def first_quiet_index(intensity: np.ndarray, steady_tol: float, window: int,
                      derivative_norms: Optional[np.ndarray] = None) -> Optional[int]:
    """
    第一个满足 I ≤ tol·I_peak（以及 ‖dρ/dt‖ ≤ tol）且连续 window 个采样点都满足的下标
    """
    intensity = np.asarray(intensity, dtype=float)
    if len(intensity) == 0:
        return None
    peak = float(np.nanmax(intensity)) if np.any(np.isfinite(intensity)) else 0.0
    quiet = intensity <= steady_tol * peak
    if derivative_norms is not None:
        quiet &= np.asarray(derivative_norms) <= steady_tol
    width = min(int(window), len(quiet))
    for start in range(len(quiet) - width + 1):
        if np.all(quiet[start:start + width]):
            return start
    return None


def detect_steady_state(series: MasterEvolution, steady_tol: float, window: int = 5):
    """
    稳态判据：总强度 I(t) < tol·I_peak 且 ‖dρ/dt‖_max < tol，在整个采样窗口内都成立

    Args:
        series: 主方程演化结果
        steady_tol: 阈值
        window: 窗口内的采样点数

    Returns:
        Tuple[bool, float]: (是否到达, 首次到达时间)
    """
    if len(series.records) == 0:
        raise ValueError('采样序列为空')
    intensity = series.series('I_total')
    index = first_quiet_index(intensity, steady_tol, window, series.derivative_norms)
    if index is None:
        return False, float('nan')
    return True, float(series.times[index])


# ==================== Liouvillian 对照 ====================

def liouvillian(H: SparseComplexOperator, channels: Sequence[ChannelSpec]) -> sp.csr_matrix:
    """
    行优先向量化下的 Liouvillian 超算符：vec(AρB) = (A ⊗ B^T) vec(ρ)

    只用作小体系（N ≤ 6）的对照
    """
    dim = H.dim
    identity = sp.identity(dim, dtype=np.complex128, format='csr')
    Hm = H.matrix
    superop = -1j * (sp.kron(Hm, identity) - sp.kron(identity, Hm.T))
    for channel in channels:
        L = channel.op.matrix
        LdL = channel.number_op
        superop = superop + channel.rate * (
            sp.kron(L, L.conj()) - 0.5 * sp.kron(LdL, identity) - 0.5 * sp.kron(identity, LdL.T)
        )
    return superop.tocsr()


def propagate_liouvillian(rho0, t: float, superop: sp.csr_matrix, dense: bool = True) -> np.ndarray:
    """exp(𝓛 t) vec(ρ0)；dense=True 时用稠密矩阵指数，否则用 expm_multiply"""
    data = np.asarray(as_array(rho0), dtype=np.complex128)
    dim = data.shape[0]
    if dense:
        propagator = expm(superop.toarray() * t)
        vec = propagator @ data.ravel()
    else:
        vec = expm_multiply(superop * t, data.ravel())
    return vec.reshape(dim, dim)


def asymptotic_state(rho0, superop: sp.csr_matrix, t_long: float, tol: float = 1e-10) -> np.ndarray:
    """
    长时间极限 lim exp(𝓛t)ρ0：在 t_long 与 2·t_long 之间检查收敛

    稳态不唯一（暗态很多），所以不能只取零空间，必须从初态投影
    """
    first = propagate_liouvillian(rho0, t_long, superop, dense=False)
    second = propagate_liouvillian(first, t_long, superop, dense=False)
    change = float(np.max(np.abs(second - first)))
    if change > tol:
        logger.warning('长时间极限尚未收敛，变化量 %.3e', change)
    return second
