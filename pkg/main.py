#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
受约束超辐射模拟器 - 主程序
"""

import os
import sys

# 添加项目根目录到Python路径
sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from src.cli import main  # noqa: E402


if __name__ == "__main__":
    sys.exit(main())
