#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
模拟引擎核心模块
整合算符、积分器、轨迹和分析组件，按子命令生成输出产物
"""

import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from .algorithms.burst_analysis import (BurstFeatures, SizeRun, SizeSummary, extract_burst, fit_burst_scalings,
                                        steady_state_summary)
from .algorithms.chain_operators import ChainModel
from .algorithms.dicke_ladder import (DickeLadderSeries, dicke_delay_estimate, dicke_ladder_reference,
                                      dicke_width_estimate)
from .algorithms.lindblad_solver import MAX_MASTER_SITES, MasterEvolution, detect_steady_state, evolve_master
from .algorithms.quantum_trajectories import EnsembleResult, QuantumJumpSimulator, run_ensemble
from .algorithms.states import make_initial_state
from .config import RunConfig, write_resolved_config
from .errors import KCSRError
from .output import tables
from .output.plots import render_directory
from .verification import run_verification

logger = logging.getLogger(__name__)

SUBCOMMANDS = ('evolve', 'trajectories', 'scaling', 'dicke', 'verify', 'plot')
DEFAULT_KC_SWEEP = (4, 6, 8)
DEFAULT_DICKE_SWEEP = tuple(range(4, 11))


def _master_run(config: RunConfig, N: int) -> MasterEvolution:
    """一个尺寸的主方程演化（进程池的工作函数）"""
    model = SimulationEngine.build_model(config, N)
    rho0 = make_initial_state(config.initial_state, N).to_density()
    return evolve_master(rho0, model.hamiltonian, model.channels, config.evolution, model=model)


def intensity_features(times: np.ndarray, series: Dict[str, np.ndarray]) -> Dict[str, BurstFeatures]:
    """对每条有效的强度序列提取脉冲特征，样本不足或全为 NaN 的跳过"""
    features = {}
    for name, values in series.items():
        values = np.asarray(values, dtype=float)
        if len(values) == 0 or not np.all(np.isfinite(values)):
            continue
        try:
            features[name] = extract_burst(times, values)
        except ValueError as e:
            logger.warning('%s 无法提取脉冲特征: %s', name, e)
    return features


class SimulationEngine:
    """
    模拟引擎类
    """

    def __init__(self, config: RunConfig):
        """
        初始化模拟引擎

        Args:
            config: 解析后的运行配置
        """
        self.config = config
        self.output_dir = config.output_dir
        self.written: List[str] = []

    @staticmethod
    def build_model(config: RunConfig, N: Optional[int] = None) -> ChainModel:
        params = config.params if N is None else replace(config.params, N=int(N))
        return ChainModel(params, mode=config.mode, dicke_rate=config.dicke_rate)

    def _path(self, name: str) -> str:
        return os.path.join(self.output_dir, name)

    def _csv(self, frame: pd.DataFrame, name: str):
        self.written.append(tables.write_csv(frame, self._path(name)))

    def _json(self, payload: dict, name: str):
        self.written.append(tables.write_json(payload, self._path(name)))

    def _finish(self, message: str, **extra) -> Dict:
        if self.config.wants('svg_plots'):
            self.written.extend(render_directory(self.output_dir))
        return {'success': True, 'message': message, 'exit_code': 0, 'artifacts': list(self.written), **extra}

    # ==================== 子命令 ====================

    def run(self, subcommand: str, **options) -> Dict:
        """
        执行子命令

        Args:
            subcommand: evolve / trajectories / scaling / dicke / verify / plot
            options: 子命令的附加选项（verify 的 full，trajectories 的 compare）

        Returns:
            Dict: {'success', 'message', 'exit_code', 'artifacts', ...}
        """
        if subcommand not in SUBCOMMANDS:
            return {'success': False, 'message': f'未知子命令: {subcommand}', 'exit_code': 2}
        handler = getattr(self, f'run_{subcommand}')
        try:
            if subcommand != 'plot':
                self.written.append(write_resolved_config(self.config))
            return handler(**options)
        except KCSRError as e:
            logger.error('%s 失败: %s', subcommand, e)
            return {'success': False, 'message': str(e), 'exit_code': e.exit_code,
                    'artifacts': list(self.written)}
        except (ValueError, OSError) as e:
            logger.error('%s 参数错误: %s', subcommand, e)
            return {'success': False, 'message': str(e), 'exit_code': 2, 'artifacts': list(self.written)}

    def run_evolve(self) -> Dict:
        """主方程演化；engine=trajectories 时转为轨迹系综"""
        if self.config.engine == 'trajectories':
            return self.run_trajectories()
        config = self.config
        model = self.build_model(config)
        rho0 = make_initial_state(config.initial_state, model.N).to_density()
        evolution = evolve_master(rho0, model.hamiltonian, model.channels, config.evolution, model=model)
        steady, t_steady = detect_steady_state(evolution, config.evolution.steady_tol,
                                               config.evolution.steady_window)

        if config.wants('timeseries'):
            self._csv(tables.master_timeseries(model, evolution), 'timeseries.csv')
        final = evolution.records[-1]
        if config.wants('momentum'):
            self._csv(tables.momentum_frame(model, final.momentum_occ, final.n_total), 'momentum.csv')
        features = {}
        if config.wants('burst'):
            series = {name: evolution.series(name) for name in model.channel_columns() + ['I_total']}
            features = intensity_features(evolution.times, series)
            if features:
                self._csv(tables.burst_frame(features, model.N), 'burst.csv')

        summary = {
            'N': model.N,
            'mode': config.mode,
            'steady_reached': steady,
            'steady_time': t_steady,
            'n_final': final.n_total,
            'excitation_density': final.n_total / model.N,
            'I_total_final': final.i_total,
            'max_trace_drift': evolution.max_trace_drift,
            'max_hermiticity_error': evolution.max_hermiticity_error,
            'min_eigenvalue': evolution.min_eigenvalue,
            'integrator_steps': evolution.steps,
            'burst': {name: f.to_dict() for name, f in features.items()},
        }
        if not steady:
            logger.warning('t_max=%.4g 内未检测到稳态', config.evolution.t_max)
        self._json(summary, 'summary.json')
        return self._finish(f'主方程演化完成，N={model.N}，稳态={"是" if steady else "否"}', summary=summary)

    def _ensemble(self, config: RunConfig, N: Optional[int] = None) -> EnsembleResult:
        model = self.build_model(config, N)
        psi0 = make_initial_state(config.initial_state, model.N)
        return run_ensemble(QuantumJumpSimulator(model), psi0, config.trajectory)

    def _write_ensemble(self, model: ChainModel, ensemble: EnsembleResult, prefix: str = '') -> dict:
        if self.config.wants('timeseries'):
            self._csv(tables.ensemble_timeseries(model, ensemble), prefix + 'timeseries.csv')
            self._csv(tables.trajectory_entropy_frame(ensemble), prefix + 'trajectory_entropy.csv')
            self._csv(tables.jump_log_frame(ensemble), prefix + 'jumps.csv')
            self._csv(tables.emission_frame(ensemble), prefix + 'emission.csv')
        if self.config.wants('momentum'):
            momentum = [ensemble.mean(f'nk_{m}')[-1] for m in range(model.N)]
            self._csv(tables.momentum_frame(model, np.array(momentum), ensemble.mean_final_n), prefix + 'momentum.csv')
        if self.config.wants('entropy_hist'):
            self._csv(tables.entropy_hist_frame(ensemble), prefix + 'entropy_hist.csv')
        entropy_mean = ensemble.mean('entropy')
        emitted = {channel.column: sum(1 for r in ensemble.records for e in r.events if e.channel == channel.xi)
                   for channel in model.channels}
        return {
            'N': model.N,
            'mode': model.mode,
            'n_traj': ensemble.n_traj,
            'master_seed': self.config.trajectory.master_seed,
            'trivial_fraction': ensemble.trivial_fraction,
            'mean_final_entropy': ensemble.mean_final_entropy,
            'mean_final_n': ensemble.mean_final_n,
            'entropy_peak': float(np.max(entropy_mean)),
            'entropy_late': float(entropy_mean[-1]),
            'photons_per_channel': emitted,
        }

    def run_trajectories(self, compare: bool = False) -> Dict:
        """
        量子跳跃系综

        Args:
            compare: 同时用相同种子运行另一种模式（KC ↔ Dicke），结果写入 compare_<mode>_ 前缀的文件
        """
        config = self.config
        model = self.build_model(config)
        ensemble = self._ensemble(config)
        summary = self._write_ensemble(model, ensemble)
        if compare:
            other_mode = 'dicke' if config.mode == 'kc' else 'kc'
            other_config = replace(config, mode=other_mode,
                                   dicke_rate=None if other_mode == 'kc' else config.dicke_rate)
            other_model = self.build_model(other_config)
            other = run_ensemble(QuantumJumpSimulator(other_model), make_initial_state(config.initial_state, model.N),
                                 config.trajectory)
            summary['compare'] = self._write_ensemble(other_model, other, prefix=f'compare_{other_mode}_')
        self._json(summary, 'summary.json')
        return self._finish(f'轨迹系综完成，{ensemble.n_traj} 条轨迹，平凡比例 {ensemble.trivial_fraction:.3f}',
                            summary=summary)

    def run_dicke(self) -> Dict:
        """Dicke 梯子解析参考"""
        config = self.config
        model = self.build_model(replace(config, mode='dicke'))
        ladder = dicke_ladder_reference(model.N, model.dicke_rate)
        frame = self._ladder_frame(ladder)
        self._csv(frame, 'dicke_ladder.csv')
        features = intensity_features(ladder.times, {'I_total': ladder.intensity})
        summary = {
            'N': model.N,
            'gamma': model.dicke_rate,
            'burst': {name: f.to_dict() for name, f in features.items()},
            'delay_estimate': dicke_delay_estimate(model.N, model.dicke_rate),
            'width_estimate': dicke_width_estimate(model.N, model.dicke_rate),
            'max_rate': model.dicke_rate * (model.N / 2) * (model.N / 2 + 1),
        }
        self._json(summary, 'summary.json')
        return self._finish(f'Dicke 梯子参考完成，N={model.N}', summary=summary)

    @staticmethod
    def _ladder_frame(ladder: DickeLadderSeries) -> pd.DataFrame:
        data = {'t': ladder.times, 'I': ladder.intensity, 'n': ladder.n_total}
        for s in range(ladder.N + 1):
            data[f'p_s{s}'] = ladder.populations[:, s]
        return pd.DataFrame(data)

    def run_scaling(self) -> Dict:
        """扫描 N，提取脉冲特征并拟合标度律，同时给出有限尺寸汇总"""
        config = self.config
        if config.mode == 'dicke':
            sizes = config.sweep or DEFAULT_DICKE_SWEEP
            features_by_size, summaries, estimates = self._dicke_sweep(sizes)
        else:
            sizes = config.sweep or DEFAULT_KC_SWEEP
            features_by_size, summaries = self._kc_sweep(sizes)
            estimates = {}

        fits = fit_burst_scalings(features_by_size)
        rows = [tables.burst_frame(features_by_size[N], N) for N in sorted(features_by_size)]
        if config.wants('burst') and rows:
            self._csv(pd.concat(rows, ignore_index=True), 'burst.csv')
        if config.wants('scaling_sweep'):
            self._csv(tables.finite_size_frame(summaries), 'finite_size.csv')
        payload = {'mode': config.mode, 'sizes': list(sizes), 'fits': fits, 'estimates': estimates}
        self._json(payload, 'fits.json')
        return self._finish(f'标度扫描完成，N={list(sizes)}', fits=fits, summaries=summaries)

    def _dicke_sweep(self, sizes: Sequence[int]):
        gamma = self.build_model(replace(self.config, mode='dicke')).dicke_rate
        features_by_size, summaries, estimates = {}, [], {}
        for N in sizes:
            ladder = dicke_ladder_reference(N, gamma)
            features_by_size[N] = intensity_features(ladder.times, {'I_total': ladder.intensity})
            summaries.append(SizeSummary(N=int(N), excitation_density=float(ladder.n_total[-1]) / N,
                                         entropy_mean=float('nan'), trivial_fraction=float(ladder.populations[-1, -1]),
                                         steady_reached=True, steady_time=float(ladder.times[-1])))
            estimates[str(N)] = {'delay': dicke_delay_estimate(N, gamma), 'width': dicke_width_estimate(N, gamma)}
            logger.info('Dicke 扫描 N=%d 完成', N)
        return features_by_size, summaries, estimates

    def _kc_sweep(self, sizes: Sequence[int]):
        config = self.config
        use_master = config.engine == 'master'
        for N in sizes:
            if use_master and N > MAX_MASTER_SITES:
                raise ValueError(f'主方程扫描只支持 N ≤ {MAX_MASTER_SITES}，N={N}')

        evolutions: Dict[int, MasterEvolution] = {}
        if use_master and config.trajectory.workers > 1 and len(sizes) > 1:
            with ProcessPoolExecutor(max_workers=min(config.trajectory.workers, len(sizes))) as pool:
                futures = {N: pool.submit(_master_run, config, N) for N in sizes}
                evolutions = {N: future.result() for N, future in futures.items()}
        elif use_master:
            for N in sizes:
                evolutions[N] = _master_run(config, N)
                logger.info('主方程扫描 N=%d 完成', N)

        features_by_size = {}
        runs = []
        for N in sizes:
            model = self.build_model(config, N)
            columns = model.channel_columns() + ['I_total']
            if use_master:
                evolution = evolutions[N]
                series = {name: evolution.series(name) for name in columns}
                times = evolution.times
                runs.append(SizeRun(N=N, evolution=evolution))
            else:
                ensemble = self._ensemble(config, N)
                series = {name: ensemble.mean(name) for name in columns}
                times = ensemble.times
                runs.append(SizeRun(N=N, ensemble=ensemble))
                logger.info('轨迹扫描 N=%d 完成', N)
            features_by_size[N] = intensity_features(times, series)
        summaries = steady_state_summary(runs, config.evolution.steady_tol, config.evolution.steady_window)
        return features_by_size, summaries

    def run_verify(self, full: bool = False) -> Dict:
        report = run_verification(self.config, full=full)
        text = report.format()
        path = self._path('verify_report.txt')
        with open(path, 'w', encoding='utf-8', newline='\n') as f:
            f.write(text)
        self.written.append(path)
        return {'success': report.passed, 'message': text, 'exit_code': 0 if report.passed else 1,
                'artifacts': list(self.written), 'report': report}

    def run_plot(self) -> Dict:
        rendered = render_directory(self.output_dir)
        if not rendered:
            logger.warning('%s 中没有可绘制的 CSV', self.output_dir)
        return {'success': True, 'message': f'生成 {len(rendered)} 张 SVG', 'exit_code': 0, 'artifacts': rendered}


def run(subcommand: str, config: RunConfig, **options) -> Dict:
    """函数式入口"""
    return SimulationEngine(config).run(subcommand, **options)


__all__ = ['SimulationEngine', 'run', 'SUBCOMMANDS', 'intensity_features']
