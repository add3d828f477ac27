#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试公共设置：项目路径、--runslow 选项和常用的小体系
"""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.algorithms.chain_operators import ChainModel, ChainParams  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False, help='运行标记为 slow 的验收测试')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='需要 --runslow')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def kc_model_4():
    return ChainModel(ChainParams(N=4, delta=1.0, j_int=0.2, gamma_prefactor=1.0))


@pytest.fixture
def kc_model_3():
    return ChainModel(ChainParams(N=3, delta=1.0, j_int=0.2, gamma_prefactor=1.0))


SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
NUMBER = np.array([[0, 0], [0, 1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


def site_operator(single, site, N):
    """稠密 kron 构造；计算基第 j 位对应格点 j，所以 kron 的第一个因子是格点 N-1"""
    factors = [single if s == site else IDENTITY for s in reversed(range(N))]
    result = factors[0]
    for factor in factors[1:]:
        result = np.kron(result, factor)
    return result


@pytest.fixture
def dense_site_operator():
    return site_operator
