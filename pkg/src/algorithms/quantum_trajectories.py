#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
量子跳跃轨迹
把主方程拆成随机纯态轨迹：非厄米有效哈密顿量下的确定性演化 + 随机跳跃。
每条轨迹的随机数流由 (master_seed, traj_index) 唯一确定，系综统计与完成顺序无关
"""

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.sparse as sp

from ..errors import NumericalError
from .chain_operators import ChainModel, ChannelSpec, SparseComplexOperator
from .lindblad_solver import first_quiet_index
from .observables import (channel_intensity, default_entropy_cut, energy, entropy_bound, excitation_number,
                          lowering_expectation, schmidt_entropy)
from .states import PureState

logger = logging.getLogger(__name__)

# 单步总跳跃概率上限
MAX_JUMP_PROBABILITY = 0.1
NORM_TOL = 1e-10


@dataclass
class TrajectoryConfig:
    """
    轨迹参数

    Attributes:
        t_max: 终止时间
        dt: 确定性演化的子步长
        master_seed: 系综主种子
        n_traj: 轨迹数 M
        record_cadence: 观测量记录间隔
        entropy_cut: 纠缠熵的子系统格点，None 表示前 N/2 个格点
        steady_tol: 单条轨迹的稳态阈值
        steady_window: 稳态需要连续满足的采样点数
        hist_bins: 末态熵直方图的分箱数
        workers: 并行进程数，1 表示串行
    """
    t_max: float = 20.0
    dt: float = 1e-3
    master_seed: int = 20240601
    n_traj: int = 500
    record_cadence: float = 0.05
    entropy_cut: Optional[Tuple[int, ...]] = None
    steady_tol: float = 1e-6
    steady_window: int = 5
    hist_bins: int = 40
    workers: int = 1

    def __post_init__(self):
        if self.t_max < 0:
            raise ValueError(f't_max 不能为负: {self.t_max}')
        if not self.dt > 0:
            raise ValueError(f'dt 必须大于 0: {self.dt}')
        if not self.record_cadence > 0:
            raise ValueError(f'record_cadence 必须大于 0: {self.record_cadence}')
        if int(self.n_traj) < 1:
            raise ValueError(f'n_traj 至少为 1: {self.n_traj}')
        if int(self.workers) < 1:
            raise ValueError(f'workers 至少为 1: {self.workers}')
        if int(self.hist_bins) < 1:
            raise ValueError(f'hist_bins 至少为 1: {self.hist_bins}')
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError(f'master_seed 必须是 64 位无符号整数: {self.master_seed}')

    def sample_times(self) -> np.ndarray:
        """0, Δt, 2Δt, ...，最后补上 t_max；Δt 为 record_cadence"""
        if self.t_max == 0:
            return np.array([0.0])
        count = int(np.floor(self.t_max / self.record_cadence + 1e-9))
        times = self.record_cadence * np.arange(count + 1)
        if self.t_max - times[-1] > 1e-12 * max(1.0, self.t_max):
            times = np.append(times, self.t_max)
        else:
            times[-1] = self.t_max
        return times

    def segment_steps(self) -> List[Tuple[int, float]]:
        """
        每个记录区间的 (子步数, 子步长)

        子步长不超过 dt 且正好铺满区间，记录时刻落在 record_cadence 的整数倍上
        """
        segments = []
        for span in np.diff(self.sample_times()):
            count = max(1, int(np.ceil(span / self.dt - 1e-9)))
            segments.append((count, float(span) / count))
        return segments


@dataclass
class JumpEvent:
    """
    一次光子发射

    Attributes:
        time: 跳跃时间
        channel: 通道编号 ξ（Dicke 模式为 None）
        pre_norm: 跳跃前 ‖S_ξ^- ψ‖²
    """
    time: float
    channel: Optional[int]
    pre_norm: float


@dataclass
class TrajectoryRecord:
    """一条随机轨迹：跳跃记录、观测量时间序列与末态"""
    seed: int
    traj_index: int
    events: List[JumpEvent]
    times: np.ndarray
    n_total: np.ndarray
    intensities: np.ndarray          # (采样点, 通道)
    momentum_occ: np.ndarray         # (采样点, N)
    entropy: np.ndarray
    energy: np.ndarray
    final_state: PureState
    steady_time: Optional[float] = None
    final_entropy: float = 0.0
    final_n: float = 0.0

    @property
    def i_total(self) -> np.ndarray:
        return self.intensities.sum(axis=1)


def trajectory_seed_sequence(master_seed: int, traj_index: int) -> np.random.SeedSequence:
    """混合函数：SeedSequence(master_seed, spawn_key=(traj_index,))，与 SeedSequence.spawn 的第 traj_index 个子序列相同"""
    return np.random.SeedSequence(int(master_seed), spawn_key=(int(traj_index),))


def trajectory_seed(master_seed: int, traj_index: int) -> int:
    """记录在轨迹里的 64 位种子"""
    return int(trajectory_seed_sequence(master_seed, traj_index).generate_state(1, dtype=np.uint64)[0])


def effective_hamiltonian(H: SparseComplexOperator, channels: Sequence[ChannelSpec]) -> SparseComplexOperator:
    """
    H_eff = H - (i/2) Σ_ξ γ_ξ S_ξ^+ S_ξ^-

    Args:
        H: 哈密顿量
        channels: 耗散通道

    Returns:
        SparseComplexOperator: 非厄米有效哈密顿量，反厄米部分半负定
    """
    decay = sp.csr_matrix((H.dim, H.dim), dtype=np.complex128)
    for channel in channels:
        if channel.op.dim != H.dim:
            raise ValueError(f'维数不一致: 通道 {channel.label} 为 {channel.op.dim}，H 为 {H.dim}')
        decay = decay + channel.rate * channel.number_op
    matrix = (H.matrix - 0.5j * decay).tocsr()
    matrix.eliminate_zeros()
    all_diagonal = H.is_diagonal and decay.nnz == np.count_nonzero(decay.diagonal())
    return SparseComplexOperator(matrix, all_diagonal, 'H_eff')


class QuantumJumpSimulator:
    """
    一阶量子跳跃（MCWF）模拟器

    算符在构造时组装，之后只读；不同轨迹之间不共享任何可变状态
    """

    def __init__(self, model: ChainModel):
        """
        Args:
            model: 链模型（KC 三通道或 Dicke 单通道）
        """
        self.model = model
        self.channels = list(model.channels)
        self.h_eff = effective_hamiltonian(model.hamiltonian, self.channels).matrix
        self._lowering = [channel.op.matrix for channel in self.channels]
        self._rates = np.array([channel.rate for channel in self.channels])

    # ---------- 单步 ----------

    def _no_jump_step(self, psi: np.ndarray, dt: float) -> np.ndarray:
        """dψ/dt = -i H_eff ψ 的一个经典 RK4 步"""
        k1 = -1j * (self.h_eff @ psi)
        k2 = -1j * (self.h_eff @ (psi + 0.5 * dt * k1))
        k3 = -1j * (self.h_eff @ (psi + 0.5 * dt * k2))
        k4 = -1j * (self.h_eff @ (psi + dt * k3))
        return psi + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    def jump_weights(self, psi: np.ndarray) -> Tuple[List[np.ndarray], np.ndarray]:
        """各通道的 S_ξ^- ψ 及 ‖S_ξ^- ψ‖²"""
        images = [L @ psi for L in self._lowering]
        norms = np.array([np.vdot(image, image).real for image in images])
        return images, norms

    def step_trajectory(self, state: PureState, dt: float, rng) -> Tuple[PureState, Optional[JumpEvent]]:
        """
        一阶跳跃格式的一步

        p_ξ = dt·γ_ξ‖S_ξ^-ψ‖²；以概率 Σp 发生跳跃，按累计概率选通道（第一个累计值超过
        均匀随机数的通道），作用 S_ξ^- 后归一化；否则在 H_eff 下演化 dt 并归一化

        Args:
            state: 归一化纯态
            dt: 步长
            rng: 提供 random() 的随机数发生器

        Returns:
            Tuple[PureState, Optional[JumpEvent]]: (新态, 跳跃事件)
        """
        psi = state.amplitudes
        images, norms = self.jump_weights(psi)
        probabilities = dt * self._rates * norms
        total = float(probabilities.sum())
        if total > MAX_JUMP_PROBABILITY:
            raise NumericalError('dt too large', time=state.time, jump_probability=total, dt=dt)

        new_time = state.time + dt
        draw = rng.random()
        if total > 0 and draw < total:
            cumulative = np.cumsum(probabilities) / total
            choice = rng.random()
            index = int(np.argmax(cumulative > choice))
            image = images[index]
            new_psi = image / np.sqrt(norms[index])
            event = JumpEvent(time=new_time, channel=self.channels[index].xi, pre_norm=float(norms[index]))
            return PureState(new_psi, new_time), event

        evolved = self._no_jump_step(psi, dt)
        norm = np.linalg.norm(evolved)
        if norm == 0:
            raise NumericalError('无跳跃演化后态的模为零', time=new_time)
        return PureState(evolved / norm, new_time), None

    # ---------- 单条轨迹 ----------

    def run_trajectory(self, psi0: PureState, config: TrajectoryConfig, traj_index: int) -> TrajectoryRecord:
        """
        演化一条轨迹到 t_max，在记录时刻采样观测量

        Args:
            psi0: 初态
            config: 轨迹参数
            traj_index: 轨迹编号，与 master_seed 一起决定随机数流

        Returns:
            TrajectoryRecord: 轨迹记录（同一 (master_seed, traj_index) 结果逐位相同）
        """
        sequence = trajectory_seed_sequence(config.master_seed, traj_index)
        rng = np.random.default_rng(sequence)
        seed = int(sequence.generate_state(1, dtype=np.uint64)[0])

        N = self.model.N
        cut = config.entropy_cut if config.entropy_cut is not None else default_entropy_cut(N)
        times = config.sample_times()
        n_samples = len(times)
        n_total = np.zeros(n_samples)
        intensities = np.zeros((n_samples, len(self.channels)))
        momentum = np.zeros((n_samples, N))
        entropy = np.zeros(n_samples)
        energies = np.zeros(n_samples)

        norm0 = np.linalg.norm(psi0.amplitudes)
        if abs(norm0 - 1.0) > NORM_TOL:
            raise ValueError(f'初态未归一化: ‖ψ0‖={norm0}')
        state = PureState(np.array(psi0.amplitudes, dtype=np.complex128), 0.0)
        events: List[JumpEvent] = []

        def sample(slot: int, current: PureState):
            psi = current.amplitudes
            n_total[slot] = excitation_number(psi)
            intensities[slot] = [channel_intensity(psi, channel) for channel in self.channels]
            momentum[slot] = [lowering_expectation(psi, op) for op in self.model.momentum_ops]
            entropy[slot] = schmidt_entropy(psi, cut)
            energies[slot] = energy(psi, self.model.hamiltonian)

        sample(0, state)
        for slot, (count, h) in enumerate(config.segment_steps(), start=1):
            start = times[slot - 1]
            for step in range(1, count + 1):
                state, event = self.step_trajectory(state, h, rng)
                # 时间用步数重算，避免累加误差
                state.time = float(times[slot]) if step == count else float(start + step * h)
                if event is not None:
                    event.time = state.time
                    events.append(event)
            sample(slot, state)

        steady_index = first_quiet_index(intensities.sum(axis=1), config.steady_tol, config.steady_window)
        final_slot = n_samples - 1 if steady_index is None else steady_index
        return TrajectoryRecord(
            seed=seed,
            traj_index=int(traj_index),
            events=events,
            times=times,
            n_total=n_total,
            intensities=intensities,
            momentum_occ=momentum,
            entropy=entropy,
            energy=energies,
            final_state=state,
            steady_time=None if steady_index is None else float(times[steady_index]),
            final_entropy=float(entropy[final_slot]),
            final_n=float(n_total[-1]),
        )


def _run_chunk(simulator: QuantumJumpSimulator, psi0: PureState, config: TrajectoryConfig,
               indices: Sequence[int]) -> List[TrajectoryRecord]:
    return [simulator.run_trajectory(psi0, config, index) for index in indices]


# ==================== 系综 ====================

@dataclass
class EnsembleResult:
    """
    系综统计

    stats 的键为观测量名（n、通道列名、I_total、nk_<m>、entropy），值为 (均值, 方差, 标准误)
    """
    times: np.ndarray
    n_traj: int
    channel_columns: List[str]
    stats: Dict[str, Tuple[np.ndarray, np.ndarray, np.ndarray]]
    entropy_hist: Tuple[np.ndarray, np.ndarray]
    trivial_fraction: float
    mean_final_entropy: float
    mean_final_n: float
    emission_rates: Dict[str, np.ndarray]
    photon_counts: Dict[str, np.ndarray]
    records: List[TrajectoryRecord] = field(default_factory=list, repr=False)

    def mean(self, name: str) -> np.ndarray:
        return self.stats[name][0]

    def sem(self, name: str) -> np.ndarray:
        return self.stats[name][2]


def _moments(samples: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """沿第 0 轴（轨迹）求均值、总体方差和标准误"""
    count = samples.shape[0]
    mean = samples.mean(axis=0)
    variance = samples.var(axis=0)
    if count > 1:
        sem = np.sqrt(samples.var(axis=0, ddof=1) / count)
    else:
        sem = np.zeros_like(mean)
    return mean, variance, sem


def aggregate_records(records: Sequence[TrajectoryRecord], model: ChainModel,
                      config: TrajectoryConfig) -> EnsembleResult:
    """
    按 traj_index 排序后归约，结果与完成顺序无关

    Args:
        records: 轨迹记录
        model: 链模型
        config: 轨迹参数

    Returns:
        EnsembleResult: 系综统计
    """
    if len(records) == 0:
        raise ValueError('没有轨迹记录')
    records = sorted(records, key=lambda r: r.traj_index)
    times = records[0].times
    columns = model.channel_columns()
    N = model.N

    stats = {}
    stats['n'] = _moments(np.stack([r.n_total for r in records]))
    intensities = np.stack([r.intensities for r in records])
    for c, column in enumerate(columns):
        stats[column] = _moments(intensities[:, :, c])
    stats['I_total'] = _moments(intensities.sum(axis=2))
    momentum = np.stack([r.momentum_occ for r in records])
    for m in range(N):
        stats[f'nk_{m}'] = _moments(momentum[:, :, m])
    stats['entropy'] = _moments(np.stack([r.entropy for r in records]))
    stats['energy'] = _moments(np.stack([r.energy for r in records]))

    cut = config.entropy_cut if config.entropy_cut is not None else default_entropy_cut(N)
    upper = max(entropy_bound(len(cut), N), 1e-12)
    final_entropy = np.array([r.final_entropy for r in records])
    counts, edges = np.histogram(np.clip(final_entropy, 0.0, upper), bins=int(config.hist_bins),
                                 range=(0.0, upper))
    final_n = np.array([r.final_n for r in records])
    trivial = float(np.mean(final_n < 0.5 / N))

    # 每次跳跃是一个频率为 ω_ξ 的光子；跳跃时刻落在 (t_{i-1}, t_i] 的计入第 i 个区间
    photons, emission = {}, {}
    for channel, column in zip(model.channels, columns):
        hits = np.array([e.time for r in records for e in r.events if e.channel == channel.xi])
        bins = np.searchsorted(times, hits, side='left') - 1
        photons[column] = np.bincount(bins.astype(int), minlength=len(times) - 1)[:len(times) - 1]
        emission[column] = photons[column] / (len(records) * np.diff(times))

    return EnsembleResult(
        times=times,
        n_traj=len(records),
        channel_columns=columns,
        stats=stats,
        entropy_hist=(counts, edges),
        trivial_fraction=trivial,
        mean_final_entropy=float(final_entropy.mean()),
        mean_final_n=float(final_n.mean()),
        emission_rates=emission,
        photon_counts=photons,
        records=list(records),
    )


def run_ensemble(simulator: QuantumJumpSimulator, psi0: PureState, config: TrajectoryConfig) -> EnsembleResult:
    """
    运行 n_traj 条轨迹并统计

    workers > 1 时按块分发到进程池；每条轨迹只依赖 (master_seed, traj_index)

    Args:
        simulator: 跳跃模拟器
        psi0: 初态
        config: 轨迹参数

    Returns:
        EnsembleResult: 均值/方差序列、末态熵直方图、平凡轨迹比例
    """
    indices = list(range(int(config.n_traj)))
    workers = min(int(config.workers), len(indices))
    records: List[TrajectoryRecord] = []
    if workers <= 1:
        report_every = max(1, len(indices) // 10)
        for index in indices:
            records.append(simulator.run_trajectory(psi0, config, index))
            if (index + 1) % report_every == 0:
                logger.info('轨迹进度 %d / %d', index + 1, len(indices))
    else:
        chunk_count = workers * 4
        chunks = [indices[i::chunk_count] for i in range(chunk_count) if indices[i::chunk_count]]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_chunk, simulator, psi0, config, chunk) for chunk in chunks]
            for done, future in enumerate(futures, start=1):
                records.extend(future.result())
                logger.info('轨迹块完成 %d / %d', done, len(futures))
    return aggregate_records(records, simulator.model, config)
