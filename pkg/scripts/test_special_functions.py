#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
特殊函数测试
Gamma 恒等式、χ(a)、P∞ 闭式与展开、抛物柱面函数传播子、能隙平均
"""

import math
import os
import sys
import traceback

import mpmath
import numpy as np

# 添加脚本目录到Python路径
script_dir = os.path.dirname(os.path.abspath(__file__))
sys.path.insert(0, script_dir)

from error_handler import NoRootError, RangeError, ValidationError
from config_manager import IntegratorConfig
from pauli_core import PauliVector, Unitary2, compose, pauli_exp, sigma_phi
from propagator import delta_kick_general, half_window_pair
from special_functions import (
    avg_plz, chi, delta_amplitude_general, dirac_crossover_sigma, half_window_amplitudes,
    log_gamma, p_infinity, p_infinity_asymptotic, p_infinity_average,
    p_infinity_average_series, pcf_d, pcf_d_at_zero, pcf_lz_propagator,
)

CFG = IntegratorConfig()


def expect_error(error_type, func, *args, **kwargs):
    try:
        func(*args, **kwargs)
    except error_type as e:
        return e
    raise AssertionError(f"{getattr(func, '__name__', func)} 应当抛出 {error_type.__name__}")


def gamma_abs2(z: complex) -> float:
    return math.exp(2.0 * log_gamma(z).real)


def test_gamma_identities():
    for b in (0.25, 1.0, 3.0):
        assert math.isclose(gamma_abs2(0.5 + 1j * b), math.pi / math.cosh(math.pi * b), rel_tol=1e-10)
        assert math.isclose(gamma_abs2(1.0 + 1j * b), math.pi * b / math.sinh(math.pi * b), rel_tol=1e-10)
        assert math.isclose(gamma_abs2(1j * b), math.pi / (b * math.sinh(math.pi * b)), rel_tol=1e-10)
    expect_error(ValidationError, log_gamma, 0.0)
    expect_error(ValidationError, log_gamma, -3.0)


def test_chi_anchors():
    assert abs(chi(0.0) - math.pi / 4) < 1e-10
    assert abs(chi(5.0) - math.pi / 2) < 0.02
    samples = np.random.default_rng(5).uniform(0.0, 4.0, 50)
    assert np.all(np.abs(chi(samples) - chi(-samples)) < 1e-12)
    assert isinstance(chi(1.0), float)


def test_chi_duplication_identity():
    # Γ(z)Γ(z+1/2) = 2^{1-2z}√π Γ(2z)，z = (1-ν)/2，用 mpmath 独立计算辐角
    z = mpmath.mpc(0.5, -0.25)
    shift = float(mpmath.im(1 - 2 * z)) * math.log(2.0)
    reference = (math.pi / 4 + 2 * float(mpmath.arg(mpmath.gamma(z)))
                 - float(mpmath.arg(mpmath.gamma(2 * z))) - shift)
    assert abs(math.remainder(chi(1.0) - reference, 2 * math.pi)) < 1e-12
    assert math.pi / 4 < chi(1.0) < math.pi / 2


def test_p_infinity_properties():
    assert p_infinity(0.0, 0.3) == 0.0
    a = np.linspace(0.01, 3.0, 200)[:, None]
    phi = np.linspace(0.0, math.pi / 2, 50)[None, :]
    grid = p_infinity(a, phi)
    assert grid.shape == (200, 50)
    violations = np.count_nonzero(grid[:, :1] - grid > 1e-12)
    assert violations == 0
    assert np.all((grid >= 0.0) & (grid <= 1.0))


def test_small_gap_expansion():
    assert abs(p_infinity_asymptotic(0.1, math.pi / 4, 'small') - p_infinity(0.1, math.pi / 4)) < 2e-3
    leading = math.pi * 0.05 ** 2 * math.cos(0.3 - math.pi / 4) ** 2
    assert abs(p_infinity(0.05, 0.3) - leading) <= 0.05 * leading


def test_large_gap_expansion():
    for phi in (0.0, math.pi / 4, math.pi / 2):
        assert abs(p_infinity_asymptotic(5.0, phi, 'large') - p_infinity(5.0, phi)) < 1e-3
    expect_error(ValidationError, p_infinity_asymptotic, 1.0, 0.0, 'medium')


def test_delta_amplitude_reduction():
    for a in np.linspace(-2.0, 2.0, 10):
        for phi in np.linspace(0.0, 2 * math.pi, 10):
            amp = delta_amplitude_general(float(a), sigma_phi(phi).scaled(math.pi / 2))
            assert abs(abs(amp) ** 2 - p_infinity(a, phi)) < 1e-12
    assert abs(abs(delta_amplitude_general(0.7, PauliVector(0, math.pi / 2, 0, 0))) ** 2
               - p_infinity(0.7, 0.0)) < 1e-12
    assert abs(delta_amplitude_general(0.5, PauliVector(0, 0, 0, 0)) - math.exp(-math.pi / 8)) < 1e-15


def test_sigma3_kick_keeps_population():
    for a in (0.3, 1.0, 2.0):
        amp = delta_amplitude_general(a, PauliVector(0.0, 0.0, 0.0, math.pi / 2))
        assert abs(abs(amp) ** 2 - 1.0) < 1e-12, (a, amp)


def test_delta_amplitude_general_direction():
    a, t = 0.5, 6.0
    n = PauliVector(0.0, math.pi / 4, math.pi / 4, math.pi / 4)
    kick = pauli_exp(n)
    exact = compose(pcf_lz_propagator(a, t, 0.0), compose(kick, pcf_lz_propagator(a, 0.0, -t)))
    U_minus, U_plus = half_window_pair(a, t, CFG)
    assert exact.max_abs_diff(compose(U_plus, compose(kick, U_minus))) < 1e-4
    numeric = delta_kick_general(a, n, t_f=t, cfg=CFG, projection='diabatic')
    assert abs(abs(exact.A) ** 2 - numeric) < 1e-4

    # 闭式 A∞ 是无限窗口极限，在 |t| 超出抛物柱面函数区间的窗口上比较
    far = delta_kick_general(a, n, t_f=20.0, cfg=CFG)
    assert abs(abs(delta_amplitude_general(a, n)) ** 2 - far) < 2e-3


def test_pcf_propagator_properties():
    assert pcf_lz_propagator(0.7, 2.0, 2.0).max_abs_diff(Unitary2.identity()) < 1e-10
    for a in (0.3, 0.7, 1.2):
        U = pcf_lz_propagator(a, 4.0, -4.0)
        assert U.is_unimodular(1e-8)
    free = pcf_lz_propagator(0.0, 3.0, -1.0)
    assert abs(free.B) == 0.0 and abs(abs(free.A) - 1.0) < 1e-10
    expect_error(RangeError, pcf_lz_propagator, 0.5, 7.0, 0.0)
    expect_error(RangeError, pcf_lz_propagator, 0.5, 0.0, -6.5)


def test_half_window_closed_form():
    for a in (0.4, 1.1):
        for t in (1.5, 4.0):
            A, B = half_window_amplitudes(a, t)
            U = pcf_lz_propagator(a, 0.0, -t)
            assert abs(A - U.A) < 1e-10 and abs(B - U.B) < 1e-10
    expect_error(ValidationError, half_window_amplitudes, 0.0, 2.0)


def test_pcf_value_at_zero():
    for nu in (0.3j, 0.5 + 1.2j, -0.4j):
        assert abs(pcf_d_at_zero(nu) - pcf_d(nu, 0.0)) < 1e-12


def test_avg_plz_anchors():
    assert abs(avg_plz(0.5, 0.1) - 0.4633) < 5e-4
    assert abs(avg_plz(1.0, 0.2) - 0.0726) < 5e-4
    assert abs(avg_plz(1.0, 0.0) - math.exp(-math.pi)) < 1e-15
    for mu in (0.0, 1.0):
        assert abs(100.0 * avg_plz(mu, 100.0) * math.sqrt(2 * math.pi) - 1.0) < 0.01
    expect_error(ValidationError, avg_plz, 0.5, -0.1)


def test_dirac_ensemble_average():
    assert p_infinity_average(0.0, 0.0) == 0.0
    for phi in (0.0, math.pi / 4, math.pi / 2):
        assert abs(p_infinity_average(0.05, phi) - p_infinity_average_series(0.05, phi)) < 5e-5


def test_dirac_crossover():
    sigma_star = dirac_crossover_sigma(math.pi / 2)
    assert abs(sigma_star - 0.84) <= 0.05, sigma_star
    expect_error(NoRootError, dirac_crossover_sigma, 0.0)
    for sigma in np.linspace(0.05, 3.0, 12):
        assert p_infinity_average(sigma, 0.0) < avg_plz(0.0, sigma)


def main():
    """主测试函数"""
    print("=" * 60)
    print("           特殊函数测试")
    print("=" * 60)
    tests = [
        ("Gamma 恒等式", test_gamma_identities),
        ("χ 锚点", test_chi_anchors),
        ("χ 倍元公式", test_chi_duplication_identity),
        ("P∞ 性质", test_p_infinity_properties),
        ("小 a 展开", test_small_gap_expansion),
        ("大 a 展开", test_large_gap_expansion),
        ("δ 振幅约化", test_delta_amplitude_reduction),
        ("σ3 踢不改变布居", test_sigma3_kick_keeps_population),
        ("任意方向 δ 振幅", test_delta_amplitude_general_direction),
        ("PCF 传播子", test_pcf_propagator_properties),
        ("半窗口闭式", test_half_window_closed_form),
        ("D_ν(0)", test_pcf_value_at_zero),
        ("<P_LZ> 锚点", test_avg_plz_anchors),
        ("δ 脉冲系综平均", test_dirac_ensemble_average),
        ("δ 脉冲交点", test_dirac_crossover),
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
