#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
异常类型
每类异常对应命令行的一个退出码
"""


class KCSRError(Exception):
    """模拟器异常基类"""

    exit_code = 1

    def __init__(self, message: str, context: dict = None):
        super().__init__(message)
        self.message = message
        self.context = dict(context or {})

    def __str__(self):
        if not self.context:
            return self.message
        details = ', '.join(f'{key}={value}' for key, value in sorted(self.context.items()))
        return f'{self.message} ({details})'


class InvariantViolation(KCSRError):
    """物理不变量被破坏（迹、厄米性、守恒律等）"""

    exit_code = 1


class ConfigError(KCSRError):
    """配置文件或命令行参数错误"""

    exit_code = 2

    def __init__(self, message: str, line: int = None, key: str = None):
        context = {}
        if line is not None:
            context['line'] = line
        if key is not None:
            context['key'] = key
        super().__init__(message, context)
        self.line = line
        self.key = key


class NumericalError(KCSRError):
    """数值失败：步长下溢、dt过大、正定性破坏"""

    exit_code = 3

    def __init__(self, message: str, time: float = None, **context):
        if time is not None:
            context['time'] = time
        super().__init__(message, context)
        self.time = time
