#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行接口
子命令: evolve / trajectories / scaling / dicke / verify / plot
每个配置键都有对应的命令行参数；退出码 0 成功，1 不变量失败，2 配置错误，3 数值失败
"""

import argparse
import logging
import sys
from typing import Dict, List, Optional

from .config import CONFIG_KEYS, Config, parse_config
from .errors import ConfigError
from .simulation_engine import SimulationEngine

logger = logging.getLogger(__name__)

# verify 与 plot 没有给出 N 时的占位值
PLACEHOLDER_N = 6


def _int_list(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(',') if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f'需要逗号分隔的整数: {text}')


def _str_list(text: str) -> List[str]:
    return [part.strip() for part in text.split(',') if part.strip()]


_ARG_TYPES = {
    'int': int,
    'float': float,
    'float?': float,
    'str': str,
    'ints?': _int_list,
    'strs': _str_list,
}


def _flag(key: str) -> str:
    return '--' + key.replace('_', '-')


def build_parser() -> argparse.ArgumentParser:
    """
    构造参数解析器，配置键表里的每一项都生成一个同名参数（下划线换成连字符）
    """
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--config', '-c', help='JSON 配置文件')
    common.add_argument('--log-level', default='INFO', choices=['DEBUG', 'INFO', 'WARNING', 'ERROR'],
                        help='日志级别')
    group = common.add_argument_group('配置项（覆盖配置文件）')
    for key, (kind, help_text) in CONFIG_KEYS.items():
        group.add_argument(_flag(key), dest=key, type=_ARG_TYPES[kind], default=None, help=help_text)

    parser = argparse.ArgumentParser(prog='kcsr', description='受约束超辐射模拟器')
    subparsers = parser.add_subparsers(dest='subcommand', required=True)
    subparsers.add_parser('evolve', parents=[common], help='主方程演化（engine=trajectories 时为轨迹系综）')
    trajectories = subparsers.add_parser('trajectories', parents=[common], help='量子跳跃系综')
    trajectories.add_argument('--compare', action='store_true', help='用相同种子再跑另一种模式')
    subparsers.add_parser('scaling', parents=[common], help='扫描 N 并拟合标度律')
    subparsers.add_parser('dicke', parents=[common], help='Dicke 梯子解析参考')
    verify = subparsers.add_parser('verify', parents=[common], help='运行不变量检查清单')
    verify.add_argument('--full', action='store_true', help='加入大体系的验收检查')
    subparsers.add_parser('plot', parents=[common], help='把输出目录中的 CSV 画成 SVG')
    return parser


def _overrides(args: argparse.Namespace) -> Dict:
    return {key: getattr(args, key) for key in CONFIG_KEYS if getattr(args, key) is not None}


def configure_logging(level: str):
    logging.basicConfig(level=getattr(logging, level), format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def main(argv: Optional[List[str]] = None) -> int:
    """
    命令行入口

    Args:
        argv: 参数列表，默认为 sys.argv[1:]

    Returns:
        int: 退出码
    """
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log_level)

    overrides = _overrides(args)
    # verify 与 plot 不依赖 N，但配置校验需要一个值
    base = {'N': PLACEHOLDER_N} if args.subcommand in ('verify', 'plot') else None
    try:
        if args.config:
            config = Config.load_from_json(args.config, overrides, base=base)
        else:
            config = parse_config(None, overrides, base=base)
    except ConfigError as e:
        print(f'配置错误: {e}', file=sys.stderr)
        return e.exit_code

    options = {}
    if args.subcommand == 'verify':
        options['full'] = args.full
    elif args.subcommand == 'trajectories':
        options['compare'] = args.compare
    result = SimulationEngine(config).run(args.subcommand, **options)
    stream = sys.stdout if result['success'] else sys.stderr
    print(result['message'], file=stream)
    return int(result['exit_code'])


if __name__ == '__main__':
    sys.exit(main())
