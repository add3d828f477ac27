#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
不变量检查清单
快速档（N ≤ 6）覆盖算符恒等式、守恒律、Liouvillian 对照、轨迹等价、Dicke 标度；
完整档再加上 N = 8 的脉冲次序、平台、束缚激发与 N = 10 的熵统计
"""

import logging
import time
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, List, Sequence

import numpy as np

from .algorithms.burst_analysis import (detect_plateau, extract_burst, fit_scaling, half_max_right_edge)
from .algorithms.chain_operators import (CHANNEL_INDICES, ChainModel, ChainParams, build_collective_lowering,
                                         build_constrained_jump, build_hamiltonian, verify_eigenoperator)
from .algorithms.dicke_ladder import dicke_ladder_reference
from .algorithms.lindblad_solver import (EvolutionConfig, detect_steady_state, evolve_master,
                                         liouvillian, propagate_liouvillian)
from .algorithms.quantum_trajectories import QuantumJumpSimulator, TrajectoryConfig, run_ensemble
from .algorithms.states import make_initial_state
from .errors import KCSRError

logger = logging.getLogger(__name__)

IDENTITY_TOL = 1e-12
BALANCE_TOL = 1e-4
SUM_RULE_TOL = 1e-8
ORACLE_TOL = 1e-6
LADDER_TOL = 1e-8


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0


@dataclass
class VerificationReport:
    results: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def format(self) -> str:
        lines = []
        for r in self.results:
            mark = 'PASS' if r.passed else 'FAIL'
            lines.append(f'[{mark}] {r.name}: {r.detail} ({r.seconds:.2f}s)')
        failed = sum(1 for r in self.results if not r.passed)
        lines.append(f'{len(self.results) - failed}/{len(self.results)} 项通过')
        return '\n'.join(lines) + '\n'


def _model(N: int, delta: float = 1.0, j_int: float = 0.2, gamma: float = 1.0, mode: str = 'kc') -> ChainModel:
    return ChainModel(ChainParams(N=N, delta=delta, j_int=j_int, gamma_prefactor=gamma), mode=mode)


def _master(model: ChainModel, t_max: float, sample_interval: float, initial: str = 'inverted',
            keep_states: bool = False, tight: bool = False):
    config = EvolutionConfig(t_max=t_max, sample_interval=sample_interval,
                             rel_tol=1e-10 if tight else 1e-8, abs_tol=1e-12 if tight else 1e-10)
    rho0 = make_initial_state(initial, model.N).to_density()
    return evolve_master(rho0, model.hamiltonian, model.channels, config, model=model, keep_states=keep_states)


# ==================== 快速档 ====================

def check_operator_identities(seed: int) -> CheckResult:
    """通道分解 Σ_ξ S_ξ^- = S^- 与本征算符残差，N = 3..6，每个 N 20 组随机 (Δ, J)"""
    rng = np.random.default_rng(seed)
    worst_partition = 0.0
    worst_residual = 0.0
    for N in range(3, 7):
        for _ in range(20):
            params = ChainParams(N=N, delta=float(rng.uniform(0.5, 2.0)), j_int=float(rng.uniform(0.0, 1.0)))
            H = build_hamiltonian(params)
            channels = [build_constrained_jump(params, xi) for xi in CHANNEL_INDICES]
            total = sum((c.op.matrix for c in channels[1:]), channels[0].op.matrix)
            diff = total - build_collective_lowering(params).matrix
            worst_partition = max(worst_partition, float(np.max(np.abs(diff.toarray()))))
            for channel in channels:
                worst_residual = max(worst_residual, verify_eigenoperator(H, channel))
    passed = worst_partition < IDENTITY_TOL and worst_residual < IDENTITY_TOL
    return CheckResult('算符恒等式', passed, f'分解误差 {worst_partition:.2e}，本征算符残差 {worst_residual:.2e}')


def centered_difference(values: Sequence[float], spacing: float) -> np.ndarray:
    """四阶中心差分 (f(t-2h) - 8f(t-h) + 8f(t+h) - f(t+2h)) / 12h，只在内部点（两端各去掉两个）给出"""
    v = np.asarray(values, dtype=float)
    if len(v) < 5:
        raise ValueError(f'中心差分至少需要 5 个采样点，当前 {len(v)}')
    return (v[:-4] - 8.0 * v[1:-3] + 8.0 * v[3:-1] - v[4:]) / (12.0 * spacing)


def balance_error(times: Sequence[float], values: Sequence[float], outflow: Sequence[float]) -> float:
    """
    采样序列的守恒残差 max |dv/dt + outflow| / max |outflow|

    Args:
        times: 等间距采样时刻
        values: 被消耗的量，如 ⟨n⟩ 或 ⟨H⟩
        outflow: 对应的流出速率，如 I(t) 或 P(t)

    Returns:
        float: 相对峰值流出速率的最大残差
    """
    times = np.asarray(times, dtype=float)
    spacing = float(times[1] - times[0])
    if not np.allclose(np.diff(times), spacing, rtol=1e-9, atol=1e-12):
        raise ValueError('中心差分要求等间距采样')
    outflow = np.asarray(outflow, dtype=float)
    scale = max(float(np.max(np.abs(outflow))), 1e-300)
    residual = centered_difference(values, spacing) + outflow[2:-2]
    return float(np.max(np.abs(residual)) / scale)


def check_conservation(N: int = 5) -> CheckResult:
    """迹、厄米性、采样 ⟨n⟩、⟨H⟩ 的中心差分对照 -I、-P，以及动量求和规则"""
    model = _model(N)
    evolution = _master(model, t_max=5.0, sample_interval=0.01, tight=True)
    worst_n = balance_error(evolution.times, evolution.series('n'), evolution.series('I_total'))
    worst_e = balance_error(evolution.times, evolution.series('energy'), evolution.series('emitted_power'))
    worst_sum = max(abs(float(np.sum(r.momentum_occ)) - r.n_total) for r in evolution.records)
    passed = (evolution.max_trace_drift < 1e-9 and evolution.max_hermiticity_error < 1e-10
              and worst_n < BALANCE_TOL and worst_e < BALANCE_TOL and worst_sum < SUM_RULE_TOL)
    detail = (f'迹漂移 {evolution.max_trace_drift:.1e}，厄米误差 {evolution.max_hermiticity_error:.1e}，'
              f'激发平衡 {worst_n:.1e}，能量平衡 {worst_e:.1e}，动量求和 {worst_sum:.1e}')
    return CheckResult(f'守恒律 N={N}', passed, detail)


def check_liouvillian_oracle(N: int = 4) -> CheckResult:
    """t = 5/γ_0 时主方程积分与稠密矩阵指数逐元素比较"""
    model = _model(N)
    t_end = 5.0 / model.rates[0]
    evolution = _master(model, t_max=t_end, sample_interval=t_end / 10, tight=True)
    rho0 = make_initial_state('inverted', N).to_density()
    exact = propagate_liouvillian(rho0, t_end, liouvillian(model.hamiltonian, model.channels), dense=True)
    error = float(np.max(np.abs(evolution.final_state.data - exact)))
    return CheckResult(f'Liouvillian 对照 N={N}', error < ORACLE_TOL, f'最大偏差 {error:.2e}')


def check_dicke_ladder_oracle() -> CheckResult:
    """N = 2 的 Dicke 主方程与级联速率方程一致"""
    model = _model(2, j_int=0.0, mode='dicke')
    evolution = _master(model, t_max=5.0, sample_interval=0.05, tight=True)
    ladder = dicke_ladder_reference(2, model.dicke_rate, times=evolution.times)
    error = float(np.max(np.abs(evolution.series('I_total') - ladder.intensity)))
    return CheckResult('Dicke 级联对照 N=2', error < LADDER_TOL, f'强度最大偏差 {error:.2e}')


def check_vacuum(N: int = 4) -> CheckResult:
    model = _model(N)
    evolution = _master(model, t_max=1.0, sample_interval=0.1, initial='vacuum')
    worst = max(max(abs(r.n_total), abs(r.i_total)) for r in evolution.records)
    steady, t_steady = detect_steady_state(evolution, 1e-6, 5)
    passed = worst == 0.0 and steady and t_steady == 0.0
    return CheckResult(f'真空不动点 N={N}', passed, f'max(n, I) = {worst:.1e}，稳态时刻 {t_steady}')


def check_trajectory_equivalence(seed: int, N: int = 6, n_traj: int = 500, t_max: float = 2.0,
                                 initial: str = 'inverted', workers: int = 1) -> CheckResult:
    """轨迹平均与主方程在每个采样时刻相差不超过 3 个标准误：n、I_ξ、I_total 与全部 ⟨ñ_k⟩"""
    model = _model(N)
    cadence = t_max / 4
    config = TrajectoryConfig(t_max=t_max, dt=2e-3 / model.max_rate(), master_seed=seed, n_traj=n_traj,
                              record_cadence=cadence, workers=workers)
    ensemble = run_ensemble(QuantumJumpSimulator(model), make_initial_state(initial, N), config)
    evolution = _master(model, t_max=t_max, sample_interval=cadence, initial=initial, tight=True)
    worst, worst_name = 0.0, ''
    for name in ['n', 'I_total'] + model.channel_columns() + [f'nk_{m}' for m in range(N)]:
        master = np.interp(ensemble.times, evolution.times, evolution.series(name))
        # 确定性的采样点（如 t = 0）标准误为零
        bound = 3.0 * ensemble.sem(name) + 1e-9
        ratio = float(np.max(np.abs(ensemble.mean(name) - master) / bound))
        if ratio > worst:
            worst, worst_name = ratio, name
    return CheckResult(f'轨迹-主方程等价 N={N}', worst <= 1.0,
                       f'{n_traj} 条轨迹，最大偏差 / 3σ = {worst:.2f}（{worst_name or "-"}）')


def check_trajectory_determinism(seed: int) -> CheckResult:
    model = _model(3)
    simulator = QuantumJumpSimulator(model)
    config = TrajectoryConfig(t_max=1.0, dt=1e-3 / model.max_rate(), master_seed=seed, n_traj=1)
    psi0 = make_initial_state('inverted', 3)
    first = simulator.run_trajectory(psi0, config, 7)
    second = simulator.run_trajectory(psi0, config, 7)
    same = (np.array_equal(first.final_state.amplitudes, second.final_state.amplitudes)
            and [(e.time, e.channel) for e in first.events] == [(e.time, e.channel) for e in second.events])
    return CheckResult('轨迹可复现', same, f'{len(first.events)} 次跳跃逐位一致' if same else '两次运行结果不同')


def check_dicke_scaling(gamma: float = 1.0) -> CheckResult:
    """梯子参考下 I_max ∝ N^2、w ∝ 1/N、t_D ∝ lnN/N（N = 16..256），小体系 N = 4..12 的 I_max 用 N 的二次多项式拟合"""
    sizes = [16, 32, 64, 128, 256]
    features = {}
    for N in sizes:
        ladder = dicke_ladder_reference(N, gamma)
        features[N] = extract_burst(ladder.times, ladder.intensity)
    i_fit = fit_scaling([(N, features[N].i_max) for N in sizes], 'power_law')
    w_fit = fit_scaling([(N, features[N].width) for N in sizes], 'power_law')
    t_fit = fit_scaling([(N, features[N].t_delay) for N in sizes], 'log_over_n')
    small = range(4, 13)
    for N in small:
        ladder = dicke_ladder_reference(N, gamma)
        features[N] = extract_burst(ladder.times, ladder.intensity)
    q_fit = fit_scaling([(N, features[N].i_max) for N in small], 'quadratic')
    passed = (abs(i_fit.exponent - 2.0) <= 0.1 and abs(w_fit.exponent + 1.0) <= 0.15
              and t_fit.r_squared > 0.98 and q_fit.r_squared > 0.99)
    detail = (f'I_max 指数 {i_fit.exponent:.3f}，w 指数 {w_fit.exponent:.3f}，'
              f't_D lnN/N 拟合 r²={t_fit.r_squared:.4f}'
              f'，N=4..12 的 I_max 二次拟合 r²={q_fit.r_squared:.4f}')
    return CheckResult('Dicke 标度', passed, detail)


# ==================== 完整档 ====================

def check_burst_ordering(N: int = 8) -> CheckResult:
    model = _model(N, j_int=0.2)
    evolution = _master(model, t_max=10.0, sample_interval=0.01)
    peaks = {xi: extract_burst(evolution.times, evolution.series(f'I_{xi}')).t_peak for xi in CHANNEL_INDICES}
    passed = peaks[2] < peaks[1] < peaks[0]
    return CheckResult(f'脉冲次序 N={N}', passed,
                       f't_peak: I_2={peaks[2]:.4f}, I_1={peaks[1]:.4f}, I_0={peaks[0]:.4f}')


def check_plateau(N: int = 8) -> CheckResult:
    model = _model(N, j_int=1.0)
    ratio = model.rates[2] / model.rates[0]
    evolution = _master(model, t_max=8.0 / model.rates[0], sample_interval=0.02 / model.rates[0], tight=True)
    after = half_max_right_edge(evolution.times, evolution.series('I_2'))
    window = detect_plateau(evolution.times, evolution.series('I_total'), model.rates[0], model.rates[1],
                            after_time=after)
    passed = ratio == 27.0 and window is not None
    detail = f'γ_2/γ_0 = {ratio:g}，' + ('未找到平台' if window is None else
                                        f'平台 [{window.t_start:.3f}, {window.t_end:.3f}]')
    return CheckResult(f'强耦合平台 N={N}', passed, detail)


def check_trapped_excitations(N: int = 8) -> CheckResult:
    model = _model(N, j_int=0.2)
    evolution = _master(model, t_max=40.0, sample_interval=0.1)
    steady, t_steady = detect_steady_state(evolution, 1e-6, 5)
    final = evolution.records[-1]
    nk_pi = float(final.momentum_occ[N // 2])
    passed = steady and final.n_total > 0 and nk_pi > 0
    return CheckResult(f'束缚激发 N={N}', passed,
                       f'稳态={steady} (t={t_steady:.3g})，n_ss={final.n_total:.4f}，⟨ñ_π⟩={nk_pi:.4f}')


def check_finite_size() -> CheckResult:
    densities = []
    for N in (4, 6, 8):
        evolution = _master(_model(N), t_max=40.0, sample_interval=0.1)
        densities.append(evolution.records[-1].n_total / N)
    dicke = _master(_model(6, j_int=0.0, mode='dicke'), t_max=40.0, sample_interval=0.1)
    n_dicke = dicke.records[-1].n_total / 6
    passed = all(d > 0 for d in densities) and all(b >= a for a, b in zip(densities, densities[1:])) \
        and n_dicke < 1e-3
    return CheckResult('有限尺寸趋势', passed,
                       'n(N=4,6,8) = ' + ', '.join(f'{d:.4f}' for d in densities) + f'，Dicke n = {n_dicke:.1e}')


def check_entropy_statistics(seed: int, N: int = 10, n_traj: int = 1000, workers: int = 1) -> CheckResult:
    """KC 轨迹平均熵高于 Dicke，末态熵直方图双峰（一个在最低分箱，一个在 1.5 ± 0.4 nats）"""
    kc = _model(N)
    dicke = _model(N, j_int=0.0, mode='dicke')
    config = TrajectoryConfig(t_max=30.0, dt=1e-3 / kc.max_rate(), master_seed=seed, n_traj=n_traj,
                              record_cadence=0.1, workers=workers)
    psi0 = make_initial_state('inverted', N)
    kc_ens = run_ensemble(QuantumJumpSimulator(kc), psi0, config)
    dicke_config = replace(config, dt=1e-3 / dicke.max_rate())
    dicke_ens = run_ensemble(QuantumJumpSimulator(dicke), psi0, dicke_config)
    s_kc, s_dicke = kc_ens.mean('entropy'), dicke_ens.mean('entropy')
    counts, edges = kc_ens.entropy_hist
    centers = 0.5 * (edges[:-1] + edges[1:])
    upper = counts[centers > 0.5]
    second_mode = float(centers[centers > 0.5][int(np.argmax(upper))]) if len(upper) else float('nan')
    lowest_is_mode = counts[0] >= counts[1]
    passed = (np.max(s_kc) > np.max(s_dicke) and s_kc[-1] > s_dicke[-1] and lowest_is_mode
              and abs(second_mode - 1.5) <= 0.4)
    detail = (f'峰值熵 KC {np.max(s_kc):.3f} / Dicke {np.max(s_dicke):.3f}，末态熵 KC {s_kc[-1]:.3f} / '
              f'Dicke {s_dicke[-1]:.3f}，第二峰 {second_mode:.2f} nats')
    return CheckResult(f'纠缠熵统计 N={N}', bool(passed), detail)


def run_verification(config, full: bool = False) -> VerificationReport:
    """
    运行检查清单

    Args:
        config: RunConfig，使用其中的 master_seed 与 workers
        full: 是否加入完整档

    Returns:
        VerificationReport: 每项检查的结果；单项抛出的异常记为失败
    """
    seed = config.trajectory.master_seed
    checks: List[Callable[[], CheckResult]] = [
        partial(check_operator_identities, seed),
        check_conservation,
        check_liouvillian_oracle,
        check_dicke_ladder_oracle,
        check_vacuum,
        partial(check_trajectory_equivalence, seed, workers=config.trajectory.workers),
        partial(check_trajectory_determinism, seed),
        check_dicke_scaling,
    ]
    if full:
        checks += [
            check_burst_ordering,
            check_plateau,
            check_trapped_excitations,
            check_finite_size,
            partial(check_entropy_statistics, seed, workers=config.trajectory.workers),
        ]

    report = VerificationReport()
    for check in checks:
        start = time.perf_counter()
        try:
            result = check()
        except (KCSRError, ValueError) as e:
            name = getattr(check, "func", check).__name__
            result = CheckResult(name, False, f'异常: {e}')
        result.seconds = time.perf_counter() - start
        logger.info('[%s] %s: %s', 'PASS' if result.passed else 'FAIL', result.name, result.detail)
        report.results.append(result)
    return report
