#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
量子态容器
纯态振幅向量与稠密密度矩阵，以及常用的初态
"""

from dataclasses import dataclass

import numpy as np

from .chain_operators import encode_config

INITIAL_STATES = ('inverted', 'vacuum', 'neel', 'single')


@dataclass
class PureState:
    """
    纯态 |ψ(t)⟩

    Attributes:
        amplitudes: 2^N 维复振幅
        time: 时间
    """
    amplitudes: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def to_density(self) -> 'DensityMatrix':
        return DensityMatrix(np.outer(self.amplitudes, self.amplitudes.conj()), self.time)


@dataclass
class DensityMatrix:
    """
    稠密厄米密度矩阵 ρ(t)
    """
    data: np.ndarray
    time: float = 0.0

    @property
    def dim(self) -> int:
        return self.data.shape[0]


def basis_state(bits: int, N: int, time: float = 0.0) -> PureState:
    amplitudes = np.zeros(1 << N, dtype=np.complex128)
    amplitudes[bits] = 1.0
    return PureState(amplitudes, time)


def make_initial_state(kind: str, N: int) -> PureState:
    """
    构造初态

    Args:
        kind: inverted（全激发）、vacuum（全退激发）、neel（交错）、single（格点 0 单激发）
        N: 格点数

    Returns:
        PureState: 计算基上的乘积态
    """
    if kind == 'inverted':
        bits = (1 << N) - 1
    elif kind == 'vacuum':
        bits = 0
    elif kind == 'neel':
        bits = encode_config(range(0, N, 2), N)
    elif kind == 'single':
        bits = 1
    else:
        raise ValueError(f'未知初态: {kind}，可选 {INITIAL_STATES}')
    return basis_state(bits, N)


def as_array(state) -> np.ndarray:
    """PureState / DensityMatrix / ndarray 统一成 ndarray"""
    if isinstance(state, PureState):
        return state.amplitudes
    if isinstance(state, DensityMatrix):
        return state.data
    return np.asarray(state)

