#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
输出模块包
CSV/JSON 表格与 SVG 图
"""

from .tables import write_csv, write_json
from .plots import render_directory

__all__ = ['write_csv', 'write_json', 'render_directory']
