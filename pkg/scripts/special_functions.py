#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
闭式解析层
复 log-Gamma、χ(a)、δ 脉冲极限概率 P∞(a;φ) 及其渐近式、
一般 δ 脉冲振幅、抛物柱面函数精确 LZ 传播子、能隙平均的 LZ 概率

复数标量直接使用 Python complex。
"""

import math
from typing import Tuple

import mpmath
import numpy as np
from scipy import integrate, optimize, special

from enhanced_logger import get_logger
from error_handler import NoRootError, RangeError, ValidationError
from pauli_core import PauliVector, Unitary2

logger = get_logger("special_functions")

PCF_T_MAX = 6.0
PCF_DPS = 30
SMALL_A_LIMIT = 0.3
LARGE_A_LIMIT = 3.0


def _is_pole(z: complex) -> bool:
    return z.imag == 0.0 and z.real <= 0.0 and z.real == math.floor(z.real)


def log_gamma(z: complex) -> complex:
    """主值分支 log Γ(z)"""
    z = complex(z)
    if _is_pole(z):
        raise ValidationError("log Γ 在非正整数处有极点", "z", z)
    return complex(special.loggamma(z))


def _nu(a) -> np.ndarray:
    return 0.5j * np.square(np.asarray(a, dtype=float))


def chi(a):
    """χ(a) = π/4 + arg Γ((1-ν)/2) - arg Γ((2-ν)/2)，ν = i a²/2；支持数组"""
    nu = _nu(a)
    value = 0.25 * math.pi + special.loggamma(0.5 * (1.0 - nu)).imag - special.loggamma(0.5 * (2.0 - nu)).imag
    return float(value) if np.ndim(value) == 0 else value


def p_infinity(a, phi):
    """P∞(a;φ) = (1 - e^{-πa²}) cos²(χ(a) - φ)"""
    a = np.asarray(a, dtype=float)
    value = -np.expm1(-math.pi * a * a) * np.cos(chi(a) - np.asarray(phi, dtype=float)) ** 2
    return float(value) if np.ndim(value) == 0 else value


def p_infinity_asymptotic(a: float, phi: float, regime: str) -> float:
    """小 a / 大 a 截断级数"""
    if regime == 'small':
        if abs(a) > SMALL_A_LIMIT:
            logger.warning("小 a 展开超出有效区间", a=a, limit=SMALL_A_LIMIT)
        c2 = math.cos(phi - 0.25 * math.pi) ** 2
        return (math.pi * a ** 2 * c2
                - 0.5 * math.pi * a ** 4 * (math.log(2.0) * math.cos(2.0 * phi) + math.pi * c2))
    if regime == 'large':
        if abs(a) < LARGE_A_LIMIT:
            logger.warning("大 a 展开超出有效区间", a=a, limit=LARGE_A_LIMIT)
        return (math.sin(phi) ** 2
                + math.sin(2.0 * phi) / (2.0 * a ** 2)
                + math.cos(2.0 * phi) / (4.0 * a ** 4))
    raise ValidationError(f"未知的展开区间: {regime}", "regime", regime)


def delta_amplitude_general(a: float, n: PauliVector) -> complex:
    """任意 Pauli 向量 n 的 δ 脉冲 t→±∞ 振幅 A∞"""
    decay = math.exp(-0.5 * math.pi * a * a)
    r = n.magnitude
    if r == 0.0:
        return complex(decay)

    s, c = math.sin(r), math.cos(r)
    x = chi(a)
    root = math.sqrt(-math.expm1(-math.pi * a * a))
    sign = math.copysign(1.0, a) if a != 0 else 0.0
    return (decay * c
            - 1j * (n.n3 / r) * s
            - sign * root * s * ((n.n1 / r) * math.cos(x) + (n.n2 / r) * math.sin(x)))


# ---------------------------------------------------------------- PCF propagator

def pcf_d(nu: complex, z: complex) -> complex:
    """抛物柱面函数 D_ν(z)（复阶、复变量）"""
    with mpmath.workdps(PCF_DPS):
        return complex(mpmath.pcfd(nu, z))


def pcf_d_at_zero(nu: complex) -> complex:
    """D_ν(0) = 2^{ν/2} √π / Γ((1-ν)/2)"""
    with mpmath.workdps(PCF_DPS):
        nu = mpmath.mpc(nu)
        return complex(mpmath.power(2, nu / 2) * mpmath.sqrt(mpmath.pi) / mpmath.gamma((1 - nu) / 2))


def _check_pcf_range(t: float, t_max: float, name: str):
    if abs(t) > t_max:
        raise RangeError(f"|{name}| 超出抛物柱面函数可信区间 {t_max}", name, t, t_max)


def pcf_lz_propagator(a: float, t_f: float, t_i: float, t_max: float = PCF_T_MAX) -> Unitary2:
    """H = -tσ3 + aσ1 的精确传播子 U0(t_f, t_i)"""
    _check_pcf_range(t_f, t_max, "t_f")
    _check_pcf_range(t_i, t_max, "t_i")
    if t_f == t_i:
        return Unitary2.identity()

    with mpmath.workdps(PCF_DPS):
        nu = mpmath.mpc(0, 0.5 * a * a)
        kappa = mpmath.sqrt(2) * mpmath.expjpi(mpmath.mpf(-0.25))
        zf, zi = kappa * t_f, kappa * t_i
        prefactor = mpmath.gamma(1 - nu)

        A = prefactor / mpmath.sqrt(2 * mpmath.pi) * (
            mpmath.pcfd(nu, zf) * mpmath.pcfd(nu - 1, -zi)
            + mpmath.pcfd(nu, -zf) * mpmath.pcfd(nu - 1, zi))
        if a == 0:
            B = mpmath.mpc(0)
        else:
            B = prefactor / (a * mpmath.sqrt(mpmath.pi)) * mpmath.expjpi(mpmath.mpf(0.25)) * (
                -mpmath.pcfd(nu, zf) * mpmath.pcfd(nu, -zi)
                + mpmath.pcfd(nu, -zf) * mpmath.pcfd(nu, zi))
        return Unitary2(complex(A), complex(B))


def half_window_amplitudes(a: float, t: float, t_max: float = PCF_T_MAX) -> Tuple[complex, complex]:
    """半窗口 (A0(0,-t), B0(0,-t))，借助 D_ν(0) 的闭式"""
    _check_pcf_range(t, t_max, "t")
    if a == 0:
        raise ValidationError("半窗口闭式要求 a ≠ 0", "a", a)

    with mpmath.workdps(PCF_DPS):
        nu = mpmath.mpc(0, 0.5 * a * a)
        z = mpmath.sqrt(2) * mpmath.expjpi(mpmath.mpf(-0.25)) * t
        d0 = mpmath.mpc(pcf_d_at_zero(complex(nu)))
        prefactor = mpmath.gamma(1 - nu)
        A = prefactor / mpmath.sqrt(2 * mpmath.pi) * d0 * (mpmath.pcfd(nu - 1, z) + mpmath.pcfd(nu - 1, -z))
        B = (prefactor / (a * mpmath.sqrt(mpmath.pi)) * mpmath.expjpi(mpmath.mpf(0.25)) * d0
             * (mpmath.pcfd(nu, -z) - mpmath.pcfd(nu, z)))
        return complex(A), complex(B)


# ---------------------------------------------------------------- gap averages

def avg_plz(mu: float, sigma: float) -> float:
    """<P_LZ>(μ,σ) = exp(-πμ²/(1+2πσ²)) / √(1+2πσ²)"""
    if sigma < 0:
        raise ValidationError("σ 不能为负", "sigma", sigma)
    width = 1.0 + 2.0 * math.pi * sigma * sigma
    return math.exp(-math.pi * mu * mu / width) / math.sqrt(width)


def p_infinity_average(sigma: float, phi: float) -> float:
    """<P∞(·;φ)> 对 N(0, σ²) 的数值积分"""
    if sigma < 0:
        raise ValidationError("σ 不能为负", "sigma", sigma)
    if sigma == 0:
        return 0.0

    norm = 1.0 / math.sqrt(2.0 * math.pi)

    def integrand(x):
        return p_infinity(sigma * x, phi) * norm * math.exp(-0.5 * x * x)

    half, _ = integrate.quad(integrand, 0.0, np.inf, epsabs=1e-12, epsrel=1e-10, limit=200)
    return 2.0 * half


def p_infinity_average_series(sigma: float, phi: float) -> float:
    """小 σ 级数：<a²> = σ²，<a⁴> = 3σ⁴"""
    c2 = math.cos(phi - 0.25 * math.pi) ** 2
    return (math.pi * sigma ** 2 * c2
            - 1.5 * math.pi * sigma ** 4 * (math.log(2.0) * math.cos(2.0 * phi) + math.pi * c2))


def dirac_crossover_sigma(phi: float, bracket: Tuple[float, float] = (0.05, 3.0),
                          scan_points: int = 60) -> float:
    """<P∞(·;φ)>(σ) 与 <P_LZ>(0,σ) 的交点"""
    def gap(sigma):
        return p_infinity_average(sigma, phi) - avg_plz(0.0, sigma)

    sigmas = np.linspace(bracket[0], bracket[1], scan_points)
    values = np.array([gap(s) for s in sigmas])
    crossings = np.nonzero(np.sign(values[:-1]) * np.sign(values[1:]) <= 0)[0]
    if crossings.size == 0:
        raise NoRootError("δ 脉冲系综平均与平均 LZ 概率在区间内无交点",
                          scanned_min=float(np.min(np.abs(values))), bracket=bracket,
                          details={'phi': phi})
    k = int(crossings[0])
    return optimize.brentq(gap, sigmas[k], sigmas[k + 1], xtol=1e-10)


if __name__ == '__main__':
    print("=== 特殊函数模块测试 ===")
    print(f"χ(0) = {chi(0.0):.12f}, π/4 = {math.pi / 4:.12f}")
    print(f"P∞(1;0) = {p_infinity(1.0, 0.0):.6f}")
    print(f"<P_LZ>(0.5, 0.1) = {avg_plz(0.5, 0.1):.4f}")
    print(f"σ*(π/2) = {dirac_crossover_sigma(math.pi / 2):.4f}")
    U = pcf_lz_propagator(0.7, 3.0, -3.0)
    print(f"PCF U0(3,-3): |A|² = {abs(U.A) ** 2:.6f}, det = {U.det:.12f}")
