#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
受约束超辐射模拟器 - 源代码包
"""

__version__ = "1.0.0"
__description__ = "一维自旋链中动力学受约束的集体辐射：主方程、量子轨迹与标度分析"
