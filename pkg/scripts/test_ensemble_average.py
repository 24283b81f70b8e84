#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
随机能隙系综测试
采样的可复现性、系综平均、特征曲线、b* 搜索与平均面积
"""

import json
import math
import os
import pickle
import sys
import traceback

import numpy as np

# 添加脚本目录到Python路径
script_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, script_dir)

from error_handler import IntegrationError, ValidationError
from config_manager import EnsembleConfig, IntegratorConfig
from glz_models import GLZParams
from propagator import propagate, propagate_batch
from special_functions import avg_plz
from ensemble_average import (
    GapDistribution, average_area, average_probability, characteristic_b0,
    characteristic_b0_t_averaged, characteristic_curve, evaluate_members,
    map_tasks, optimize_bstar, sample_gaps,
)

CFG = IntegratorConfig()
SERIAL = EnsembleConfig(serial=True)
MODEL = GLZParams(a=0.5)
HALF_PI = math.pi / 2


def expect_error(error_type, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except error_type as e:
        return e
    raise AssertionError(f"{getattr(func, '__name__', func)} 应当抛出 {error_type.__name__}")


def test_sample_gaps_reproducible():
    dist = GapDistribution(0.5, 0.1, seed=7)
    first = sample_gaps(dist, 1000)
    assert np.array_equal(first, sample_gaps(dist, 1000))
    assert not np.array_equal(first, sample_gaps(GapDistribution(0.5, 0.1, seed=8), 1000))
    # 前缀块与样本总数无关
    assert np.array_equal(first[:512], sample_gaps(dist, 600)[:512])


def test_sample_gaps_law_of_large_numbers():
    dist = GapDistribution(0.5, 0.1, seed=3)
    gaps = sample_gaps(dist, 100000)
    assert abs(gaps.mean() - 0.5) < 3 * 0.1 / math.sqrt(gaps.size)
    assert np.count_nonzero(gaps[:1000] <= 0) == 0


def test_distribution_validation():
    expect_error(ValidationError, GapDistribution, 0.5, -0.1)
    expect_error(ValidationError, GapDistribution, float('inf'), 0.1)
    expect_error(ValidationError, sample_gaps, GapDistribution(0.5, 0.1), 0)
    assert GapDistribution(0.5, 0.1).within_envelope
    assert not GapDistribution(0.5, 0.2).within_envelope


def test_serial_and_parallel_agree():
    dist = GapDistribution(0.5, 0.1, seed=11)
    gaps = sample_gaps(dist, 64, block_size=16)
    template = GLZParams(a=0.5, b=2.0, phi=0.0)
    serial = evaluate_members(template, gaps, 2.0, CFG, EnsembleConfig(block_size=16, serial=True))
    parallel = evaluate_members(template, gaps, 2.0, CFG, EnsembleConfig(block_size=16, workers=2))
    assert np.array_equal(serial, parallel)


def test_map_tasks_keeps_order():
    assert map_tasks(abs, [-3, 2, -1], SERIAL) == [3, 2, 1]


def test_average_matches_averaged_lz():
    dist = GapDistribution(0.5, 0.1, seed=20240501)
    result = average_probability(dist, 0.0, HALF_PI, MODEL, n=4000, cfg=CFG, ens_cfg=SERIAL)
    assert abs(result.mean - avg_plz(0.5, 0.1)) <= 3 * result.std_error, (result.mean, result.std_error)
    assert result.n_samples == 4000 and result.nonpositive_gaps == 0

    payload = json.loads(result.to_json())
    assert payload['seed'] == 20240501
    assert payload['params']['mu'] == 0.5 and payload['params']['b'] == 0.0


def test_average_is_deterministic():
    dist = GapDistribution(1.0, 0.2, seed=5)
    first = average_probability(dist, 0.0, HALF_PI, MODEL, n=300, cfg=CFG, ens_cfg=SERIAL, keep_values=True)
    second = average_probability(dist, 0.0, HALF_PI, MODEL, n=300, cfg=CFG, ens_cfg=SERIAL)
    assert first.mean == second.mean
    assert first.values.shape == (300,) and second.values is None


def test_characteristic_b0_seed_law():
    for a in (0.25, 0.5, 1.0, 1.25, 1.5):
        point = characteristic_b0(a, HALF_PI, MODEL, CFG)
        assert abs(point.b0 * a - 1.0) < 1e-3, (a, point.b0)
        assert point.residual <= 1e-6
    expect_error(ValidationError, characteristic_b0, 0.0, HALF_PI, MODEL, CFG)


def test_characteristic_b0_matches_grid_scan():
    point = characteristic_b0(0.5, 0.0, MODEL, CFG)
    template = GLZParams(a=0.5, phi=0.0)
    b_grid = np.linspace(1.2, 2.2, 401)
    scan = propagate_batch(template, 0.5, b_grid, CFG).final_prob
    b_min = b_grid[int(np.argmin(scan))]
    assert abs(b_min - point.b0) < 0.01, (b_min, point.b0)
    assert 1.65 <= point.b0 <= 1.70, point.b0


def test_transient_peak_at_b0():
    b0 = characteristic_b0(0.5, 0.0, MODEL, CFG).b0
    record = propagate(GLZParams(a=0.5, b=b0, phi=0.0), CFG, record=True)
    # 末态跃迁被抑制，但中途激发明显
    assert record.final_prob <= 1e-3, record.final_prob
    assert record.max_prob > 0.05, record.max_prob


def test_characteristic_curve_and_t_average():
    points = characteristic_curve([0.5, 1.0], HALF_PI, MODEL, CFG)
    assert [p.a for p in points] == [0.5, 1.0]
    assert abs(characteristic_b0_t_averaged(0.5, HALF_PI, MODEL, [8.0, 10.0], CFG) - 2.0) < 2e-3
    expect_error(ValidationError, characteristic_b0_t_averaged, 0.5, HALF_PI, MODEL, [], CFG)


def test_optimize_bstar_narrow_distribution():
    dist = GapDistribution(0.5, 1e-4, seed=1)
    found = optimize_bstar(dist, HALF_PI, MODEL, n=100, cfg=CFG, ens_cfg=SERIAL)
    assert not found.fallback
    assert abs(found.b_star - 2.0) <= 2e-2, found.b_star
    assert found.p_star.mean < 1e-4


def test_optimize_bstar_validation():
    expect_error(ValidationError, optimize_bstar, GapDistribution(0.0, 0.1), HALF_PI, MODEL, 200, CFG, SERIAL)
    expect_error(ValidationError, optimize_bstar, GapDistribution(0.5, 0.1), HALF_PI, MODEL, 50, CFG, SERIAL)


def test_sigma_one_outperforms_sigma_two():
    dist = GapDistribution(0.5, 0.1, seed=2)
    flat = optimize_bstar(dist, 0.0, MODEL, n=200, cfg=CFG, ens_cfg=SERIAL).p_star
    cd = optimize_bstar(dist, HALF_PI, MODEL, n=200, cfg=CFG, ens_cfg=SERIAL).p_star
    separation = 2.0 * math.hypot(flat.std_error, cd.std_error)
    assert flat.mean + separation < cd.mean, (flat.mean, cd.mean, separation)


def test_pstar_grows_quadratically_in_sigma():
    sigmas = np.array([0.02, 0.04, 0.08])
    p_star = []
    for sigma in sigmas:
        found = optimize_bstar(GapDistribution(0.5, float(sigma), seed=3), 0.0, MODEL,
                               n=200, cfg=CFG, ens_cfg=SERIAL)
        assert not found.fallback
        p_star.append(found.p_star.mean)
    slope = np.polyfit(np.log(sigmas), np.log(p_star), 1)[0]
    assert abs(slope - 2.0) <= 0.3, (slope, p_star)


def test_average_area():
    narrow = average_area(GapDistribution(0.5, 1e-4), HALF_PI, MODEL, n=32, cfg=CFG, ens_cfg=SERIAL)
    assert narrow.mean <= 1e-3
    dist = GapDistribution(0.5, 0.1, seed=4)
    flat = average_area(dist, 0.0, MODEL, n=128, cfg=CFG, ens_cfg=SERIAL)
    cd = average_area(dist, HALF_PI, MODEL, n=128, cfg=CFG, ens_cfg=SERIAL)
    assert flat.mean > cd.mean


def test_average_area_vanishes_for_large_gap():
    for phi in (0.0, HALF_PI):
        small = average_area(GapDistribution(0.5, 0.1, seed=4), phi, MODEL, n=128, cfg=CFG, ens_cfg=SERIAL)
        large = average_area(GapDistribution(1.8, 0.36, seed=4), phi, MODEL, n=128, cfg=CFG, ens_cfg=SERIAL)
        assert large.mean < small.mean, (phi, small.mean, large.mean)


def test_integration_error_survives_pickling():
    error = IntegrationError("步长下溢", location=0.42, details={'sample_index': 17, 'a': 0.5})
    restored = pickle.loads(pickle.dumps(error))
    assert restored.location == 0.42
    assert restored.details['sample_index'] == 17
    assert restored.error_code == 'INTEGRATION_ERROR'


def main():
    """主测试函数"""
    print("=" * 60)
    print("           随机能隙系综测试")
    print("=" * 60)
    tests = [
        ("采样可复现", test_sample_gaps_reproducible),
        ("大数定律", test_sample_gaps_law_of_large_numbers),
        ("分布校验", test_distribution_validation),
        ("串行并行一致", test_serial_and_parallel_agree),
        ("任务顺序", test_map_tasks_keeps_order),
        ("平均 LZ 概率", test_average_matches_averaged_lz),
        ("系综平均确定性", test_average_is_deterministic),
        ("b0 = 1/a", test_characteristic_b0_seed_law),
        ("b0 与网格扫描", test_characteristic_b0_matches_grid_scan),
        ("b0 处的瞬态峰", test_transient_peak_at_b0),
        ("特征曲线与 T 平均", test_characteristic_curve_and_t_average),
        ("窄分布 b*", test_optimize_bstar_narrow_distribution),
        ("b* 参数校验", test_optimize_bstar_validation),
        ("σ1 优于 σ2", test_sigma_one_outperforms_sigma_two),
        ("P* ∝ σ²", test_pstar_grows_quadratically_in_sigma),
        ("平均面积", test_average_area),
        ("大 μ 平均面积", test_average_area_vanishes_for_large_gap),
        ("积分错误跨进程", test_integration_error_survives_pickling),
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
