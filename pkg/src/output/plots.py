#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
SVG 绘图
把输出目录里的 CSV 画成独立的 SVG 文件（非交互后端）
"""

import logging
import os
from typing import List, Optional, Sequence

import matplotlib

matplotlib.use('Agg')
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

logger = logging.getLogger(__name__)

# 固定 SVG 中的随机 id，相同输入得到相同文件
matplotlib.rcParams['svg.hashsalt'] = 'kcsr'
SVG_METADATA = {'Date': None}

INTENSITY_COLUMNS = ('I_0', 'I_1', 'I_2', 'I_total')


def _save(fig, path: str) -> str:
    fig.savefig(path, format='svg', metadata=SVG_METADATA, bbox_inches='tight')
    plt.close(fig)
    logger.info('已绘制 %s', path)
    return path


def plot_timeseries(frame: pd.DataFrame, path: str, columns: Optional[Sequence[str]] = None,
                    time_column: str = 't', title: str = '') -> str:
    """
    强度和激发数随时间的曲线

    Args:
        frame: timeseries.csv 的内容
        path: SVG 输出路径
        columns: 要画的列，默认为所有非全空的强度列
        time_column: 横轴列
        title: 图标题
    """
    if columns is None:
        columns = [c for c in INTENSITY_COLUMNS if c in frame and frame[c].notna().any()]
    fig, (ax_i, ax_n) = plt.subplots(2, 1, figsize=(7, 6), sharex=True)
    for column in columns:
        ax_i.plot(frame[time_column], frame[column], label=column, linewidth=1.2)
    ax_i.set_ylabel('I(t)')
    ax_i.legend(loc='upper right', frameon=False)
    if 'n' in frame:
        ax_n.plot(frame[time_column], frame['n'], color='black', linewidth=1.2)
    ax_n.set_ylabel('⟨n⟩')
    ax_n.set_xlabel(time_column)
    if title:
        ax_i.set_title(title)
    return _save(fig, path)


def plot_histogram(frame: pd.DataFrame, path: str, title: str = '') -> str:
    """末态纠缠熵直方图"""
    fig, ax = plt.subplots(figsize=(6, 4))
    widths = frame['bin_right'] - frame['bin_left']
    ax.bar(frame['bin_left'], frame['fraction'], width=widths, align='edge', edgecolor='black', linewidth=0.5)
    ax.set_xlabel('S_{N/2} (nats)')
    ax.set_ylabel('fraction of trajectories')
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_finite_size(frame: pd.DataFrame, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(frame['N'], frame['excitation_density'], marker='o', label='n_ss / N')
    if frame['trivial_fraction'].notna().any():
        ax.plot(frame['N'], frame['trivial_fraction'], marker='s', label='trivial fraction')
    ax.set_xlabel('N')
    ax.legend(frameon=False)
    return _save(fig, path)


def plot_momentum(frame: pd.DataFrame, path: str) -> str:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.asarray(frame['k']), np.asarray(frame['nk_final']), width=0.8 * 2 * np.pi / max(1, len(frame)))
    ax.set_xlabel('k')
    ax.set_ylabel('⟨ñ_k⟩')
    return _save(fig, path)


def _base_name(name: str) -> str:
    # compare_<mode>_ 前缀的文件按原表渲染
    if name.startswith('compare_'):
        parts = name.split('_', 2)
        if len(parts) == 3:
            return parts[2]
    return name


def render_directory(directory: str) -> List[str]:
    """
    渲染目录中所有认识的 CSV
    compare_<mode>_ 前缀的对照文件与原表用同样的方式渲染

    Args:
        directory: 输出目录

    Returns:
        List[str]: 生成的 SVG 路径
    """
    if not os.path.isdir(directory):
        raise FileNotFoundError(f'输出目录不存在: {directory}')
    rendered = []
    renderers = {
        'timeseries.csv': plot_timeseries,
        'entropy_hist.csv': plot_histogram,
        'finite_size.csv': plot_finite_size,
        'momentum.csv': plot_momentum,
    }
    for name in sorted(os.listdir(directory)):
        renderer = renderers.get(_base_name(name))
        if renderer is None:
            continue
        frame = pd.read_csv(os.path.join(directory, name))
        if frame.empty:
            logger.warning('%s 为空，跳过', name)
            continue
        rendered.append(renderer(frame, os.path.join(directory, name[:-4] + '.svg')))
    return rendered
