#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
数值传播测试
LZ 公式、反绝热精确性、对称性、δ 脉冲组合与抛物柱面函数传播子交叉验证
"""

import math
import os
import sys
import traceback

import numpy as np

# 添加脚本目录到Python路径
script_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, script_dir)

from error_handler import ValidationError
from config_manager import IntegratorConfig
from pauli_core import compose
from glz_models import GLZParams, SweepSpec
from propagator import (
    adiabaticity_area, delta_kick_grid, delta_kick_probability, half_window_pair,
    propagate, propagate_batch, raw_propagator, transition_probability,
)
from special_functions import p_infinity, pcf_lz_propagator

CFG = IntegratorConfig()


def test_landau_zener_formula():
    gaps = np.array([0.25, 0.5, 1.0, 1.5])
    batch = propagate_batch(GLZParams(a=0.5), gaps, 0.0, CFG)
    assert np.all(np.abs(batch.final_prob - np.exp(-math.pi * gaps ** 2)) < 2e-3), batch.final_prob


def test_landau_zener_limits():
    assert abs(transition_probability(GLZParams(a=2.0), CFG) - math.exp(-4 * math.pi)) < 1e-4
    assert abs(transition_probability(GLZParams(a=0.0), CFG) - 1.0) < 1e-6


def test_counterdiabatic_exactness():
    for a in (0.3, 0.5, 1.0):
        record = propagate(GLZParams(a=a, b=1.0 / a, phi=math.pi / 2), CFG, record=True)
        assert record.final_prob <= 1e-4, (a, record.final_prob)
        assert record.max_prob <= 1e-3, (a, record.max_prob)
        assert record.max_norm_error <= 1e-8


def test_adiabaticity_area_under_exact_control():
    assert adiabaticity_area(GLZParams(a=0.5, b=2.0, phi=math.pi / 2), CFG) <= 1e-3
    # φ = 0 的同一脉冲会在中途激发
    assert adiabaticity_area(GLZParams(a=0.5, b=2.0, phi=0.0), CFG) > 1e-3


def test_trajectory_record():
    record = propagate(GLZParams(a=0.5, b=1.0, phi=0.0), CFG, record=True)
    frame = record.to_frame()
    assert list(frame.columns) == ['u', 't', 'P', 'norm_error']
    assert len(frame) == CFG.grid_points
    assert frame['t'].iloc[0] == -5.0 and frame['t'].iloc[-1] == 5.0
    assert abs(frame['P'].iloc[-1] - record.final_prob) < 1e-9
    assert frame['norm_error'].max() <= 1e-8
    assert record.area > 0

    bare = propagate(GLZParams(a=0.5), CFG)
    try:
        bare.to_frame()
    except ValidationError:
        pass
    else:
        raise AssertionError("未记录网格时导出应当失败")


def test_norm_drift_covers_segment_interior():
    record = propagate(GLZParams(a=0.5, b=1.0, phi=0.0), CFG, record=True)
    frame = record.to_frame()
    # 段内网格点的偏差都计入 max_norm_error，而不只是段末
    assert record.max_norm_error >= frame['norm_error'].max()
    assert record.max_norm_error <= 1e-8


def test_tolerance_convergence():
    finer = IntegratorConfig(rtol=CFG.rtol / 2, atol=CFG.atol / 2)
    rng = np.random.default_rng(23)
    for _ in range(20):
        a, b, phi = rng.uniform(0.2, 1.5), rng.uniform(0.5, 4.0), rng.uniform(0.0, math.pi)
        params = GLZParams(a=a, b=b, phi=phi)
        coarse = propagate(params, CFG)
        fine = propagate(params, finer)
        # 全局误差带取 100·rtol
        estimate = max(coarse.max_norm_error, 100 * CFG.rtol)
        assert abs(coarse.final_prob - fine.final_prob) < 10 * estimate, (a, b, phi)


def test_gap_sign_symmetry():
    rng = np.random.default_rng(11)
    for phi in (0.0, math.pi / 2):
        for a, b in zip(rng.uniform(0.2, 1.5, 4), rng.uniform(0.5, 4.0, 4)):
            p = transition_probability(GLZParams(a=a, b=b, phi=phi), CFG)
            q = transition_probability(GLZParams(a=-a, b=-b, phi=phi), CFG)
            assert abs(p - q) < 1e-6, (a, b, phi, p, q)


def test_angle_independence_at_zero_gap():
    for b in (0.5, 2.0, 8.0):
        values = [transition_probability(GLZParams(a=0.0, b=b, phi=phi), CFG)
                  for phi in (0.0, math.pi / 4, math.pi / 2)]
        assert max(values) - min(values) < 1e-6, (b, values)


def test_batch_matches_single_members():
    template = GLZParams(a=0.5, b=2.0, phi=0.0, sweep=SweepSpec('Tan', 10.0, 1.0))
    gaps = np.array([0.3, 0.5, 0.8])
    batch = propagate_batch(template, gaps, 2.0, CFG)
    for a, p in zip(gaps, batch.final_prob):
        assert abs(transition_probability(GLZParams(a=a, b=2.0, phi=0.0,
                                                    sweep=SweepSpec('Tan', 10.0, 1.0)), CFG) - p) < 1e-7


def test_pcf_oracle_agreement():
    for a in (0.3, 0.7, 1.2):
        for t_i, t_f in ((-4.0, 4.0), (-2.0, 5.0), (-6.0, 1.0)):
            exact = pcf_lz_propagator(a, t_f, t_i)
            numeric = raw_propagator(a, t_i, t_f, cfg=CFG)
            assert exact.max_abs_diff(numeric) < 1e-6, (a, t_i, t_f)


def test_finite_window_lz_remnant():
    U = raw_propagator(0.5, -4.0, 4.0, cfg=CFG)
    assert abs(abs(U.A) ** 2 - math.exp(-math.pi / 4)) < 0.1
    assert U.is_unimodular(1e-8)


def test_half_windows_compose():
    U_minus, U_plus = half_window_pair(0.6, 5.0, CFG)
    full = raw_propagator(0.6, -5.0, 5.0, cfg=CFG)
    assert compose(U_plus, U_minus).max_abs_diff(full) < 1e-7


def test_delta_kick_zero_gap():
    for phi in (0.0, math.pi / 4, math.pi / 2):
        assert delta_kick_probability(0.0, phi, t_f=10.0, cfg=CFG) < 1e-6


def test_delta_kick_matches_closed_form():
    gaps = [0.5, 1.0, 1.5]
    angles = [0.0, math.pi / 4, math.pi / 2]
    table = delta_kick_grid(gaps, angles, t_f=20.0, cfg=CFG)
    for i, a in enumerate(gaps):
        for j, phi in enumerate(angles):
            assert abs(table[i, j] - p_infinity(a, phi)) <= 2e-3, (a, phi, table[i, j])
    assert abs(delta_kick_probability(1.0, 0.0, 20.0, CFG) - table[1, 0]) < 1e-6


def test_delta_kick_validation():
    for kwargs in ({'t_f': 0.0}, {'t_f': 10.0, 'projection': 'rotated'}):
        try:
            delta_kick_probability(0.5, 0.0, cfg=CFG, **kwargs)
        except ValidationError:
            continue
        raise AssertionError(f"应当拒绝参数 {kwargs}")


def main():
    """主测试函数"""
    print("=" * 60)
    print("           数值传播测试")
    print("=" * 60)
    tests = [
        ("LZ 公式", test_landau_zener_formula),
        ("LZ 极限", test_landau_zener_limits),
        ("反绝热精确性", test_counterdiabatic_exactness),
        ("绝热偏离面积", test_adiabaticity_area_under_exact_control),
        ("轨迹记录", test_trajectory_record),
        ("段内范数检查", test_norm_drift_covers_segment_interior),
        ("容差收敛", test_tolerance_convergence),
        ("P(a,b) = P(-a,-b)", test_gap_sign_symmetry),
        ("零能隙角度无关", test_angle_independence_at_zero_gap),
        ("批量与单成员一致", test_batch_matches_single_members),
        ("抛物柱面函数交叉验证", test_pcf_oracle_agreement),
        ("有限窗口 LZ 残余", test_finite_window_lz_remnant),
        ("半窗口组合", test_half_windows_compose),
        ("δ 脉冲零能隙", test_delta_kick_zero_gap),
        ("δ 脉冲闭式", test_delta_kick_matches_closed_form),
        ("δ 脉冲参数校验", test_delta_kick_validation),
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
    sys.exit(0 if main() else 1)
