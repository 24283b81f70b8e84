#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行入口测试
子命令输出文件与退出码
"""

import json
import math
import os
import sys
import tempfile
import traceback
from pathlib import Path

# 添加脚本目录到Python路径
script_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, script_dir)

from data_utils import read_json, read_tidy_csv
import lzcd_cli
from lzcd_cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, angle, build_parser, main


def run_cli(tmp: str, *args: str) -> int:
    """每次使用临时配置文件，避免修改全局配置"""
    config = str(Path(tmp) / 'config.json')
    return main(['--config', config, '--out', str(Path(tmp) / 'out'), '--serial', *args])


def test_angle_argument():
    assert angle('pi/2') == math.pi / 2
    assert angle('0.25') == 0.25
    try:
        build_parser().parse_args(['dirac', '--phi-values', 'north'])
    except SystemExit as e:
        assert e.code == 2
    else:
        raise AssertionError("无法解析的角度应当被拒绝")


def test_simulate_writes_trajectory():
    with tempfile.TemporaryDirectory() as tmp:
        status = run_cli(tmp, 'simulate', '--a', '0.5', '--b', '2', '--phi', 'pi/2', '--record')
        assert status == EXIT_OK
        frame, header = read_tidy_csv(Path(tmp) / 'out' / 'simulate' / 'trajectory.csv')
        assert header['command'] == 'simulate' and header['params']['b'] == 2.0
        assert frame['P'].max() <= 1e-3


def test_sweep_and_cc():
    with tempfile.TemporaryDirectory() as tmp:
        assert run_cli(tmp, 'sweep', '--a-values', '0.5', '1.0', '--b-values', '0', '2') == EXIT_OK
        frame, _ = read_tidy_csv(Path(tmp) / 'out' / 'sweep' / 'sweep.csv')
        assert len(frame) == 4

        assert run_cli(tmp, 'cc', '--a-values', '0.5', '1.0') == EXIT_OK
        curve, _ = read_tidy_csv(Path(tmp) / 'out' / 'cc' / 'cc.csv')
        assert list(curve.columns) == ['a', 'b0', 'residual']
        assert all(abs(row.a * row.b0 - 1.0) < 1e-3 for row in curve.itertuples())


def test_average_writes_json():
    with tempfile.TemporaryDirectory() as tmp:
        status = run_cli(tmp, '--samples', '200', '--seed', '3', 'average', '--mu', '0.5', '--sigma', '0.1')
        assert status == EXIT_OK
        payload = read_json(Path(tmp) / 'out' / 'average' / 'average.json')
        assert payload['n_samples'] == 200 and payload['seed'] == 3
        assert abs(payload['avg_plz'] - 0.4633) < 5e-4
        assert 0.0 <= payload['mean'] <= 1.0


def test_dirac_command():
    with tempfile.TemporaryDirectory() as tmp:
        assert run_cli(tmp, 'dirac', '--a-values', '0.5', '--phi-values', 'pi/2') == EXIT_OK


def test_invalid_configuration_exit_code():
    with tempfile.TemporaryDirectory() as tmp:
        assert run_cli(tmp, '--rtol', '-1', 'dirac') == EXIT_CONFIG
        assert run_cli(tmp, '--samples', '0', 'dirac') == EXIT_CONFIG

        blocker = Path(tmp) / 'blocker'
        blocker.write_text('', encoding='utf-8')
        status = main(['--config', str(Path(tmp) / 'config.json'), '--out', str(blocker / 'out'),
                       'scenario', 'identities', '--quick'])
        assert status == EXIT_CONFIG


def test_unexpected_error_exit_code():
    """子命令抛出非 LabError 异常时返回 1 而不是抛出"""
    def broken(args, config, ctx, logger):
        raise RuntimeError("意外失败")

    original = lzcd_cli.COMMANDS['dirac']
    lzcd_cli.COMMANDS['dirac'] = broken
    try:
        with tempfile.TemporaryDirectory() as tmp:
            assert run_cli(tmp, 'dirac') == EXIT_FAILURE
    finally:
        lzcd_cli.COMMANDS['dirac'] = original


def test_scenario_command_with_file():
    with tempfile.TemporaryDirectory() as tmp:
        scenario_file = Path(tmp) / 'dirac.txt'
        scenario_file.write_text("a = 0, 0.5, 1\nsigma = 0.5\nphi = pi/2\n", encoding='utf-8')
        status = run_cli(tmp, '--seed', '7', 'scenario', 'dirac', '--scenario-file', str(scenario_file))
        assert status == EXIT_OK
        manifest = read_json(Path(tmp) / 'out' / 'dirac' / 'manifest.json')
        assert manifest['seed'] == 7
        assert manifest['params']['phi'] == [math.pi / 2]
        with open(Path(tmp) / 'config.json', 'r', encoding='utf-8') as f:
            assert json.load(f)['ensemble']['seed'] == 20240501


def main_tests():
    """主测试函数"""
    print("=" * 60)
    print("           命令行入口测试")
    print("=" * 60)
    tests = [
        ("角度参数", test_angle_argument),
        ("simulate", test_simulate_writes_trajectory),
        ("sweep 与 cc", test_sweep_and_cc),
        ("average", test_average_writes_json),
        ("dirac", test_dirac_command),
        ("配置错误退出码", test_invalid_configuration_exit_code),
        ("意外异常退出码", test_unexpected_error_exit_code),
        ("scenario 与场景文件", test_scenario_command_with_file),
    ]
    failed = 0
    for name, func in tests:
        try:
            func()
            print(f"✅ {name}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {e}")
            traceback.print_exc()
    print(f"\n通过 {len(tests) - failed}/{len(tests)}")
    return failed == 0


if __name__ == '__main__':
    sys.exit(0 if main_tests() else 1)
