#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
算法模块包
包含模拟器使用的所有数值算法
"""

from .chain_operators import ChainModel, ChainParams, ChannelSpec, SparseComplexOperator
from .lindblad_solver import EvolutionConfig, LindbladSolver, MasterEvolution
from .quantum_trajectories import EnsembleResult, QuantumJumpSimulator, TrajectoryConfig
from .burst_analysis import BurstFeatures, ScalingFit, extract_burst, fit_scaling
from .dicke_ladder import dicke_ladder_reference

__all__ = [
    'ChainModel',
    'ChainParams',
    'ChannelSpec',
    'SparseComplexOperator',
    'EvolutionConfig',
    'LindbladSolver',
    'MasterEvolution',
    'EnsembleResult',
    'QuantumJumpSimulator',
    'TrajectoryConfig',
    'BurstFeatures',
    'ScalingFit',
    'extract_burst',
    'fit_scaling',
    'dicke_ladder_reference',
]
