#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
广义 Landau-Zener 模型
脉冲形状、扫描函数、误差模型以及 s 坐标下的哈密顿量

s 坐标下的方程：
    i ∂_s ψ = [T(-λ(s;c)σ3 + aσ1) + ∂_sλ(s;b)·f(λ(s;b))·σ_φ] ψ
"""

import math
from dataclasses import dataclass, replace
from enum import Enum, IntEnum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from scipy import integrate

from error_handler import ValidationError
from pauli_core import PauliVector

PULSE_AREA = math.pi / 2


class PulseKind(Enum):
    """脉冲形状（单字母代码）"""
    LORENTZIAN = 'L'
    GAUSSIAN = 'g'
    SINC = 's'
    RECT = 'r'
    TRIANGLE = 't'

    @classmethod
    def from_code(cls, code) -> 'PulseKind':
        if isinstance(code, cls):
            return code
        for kind in cls:
            if kind.value == str(code).strip():
                return kind
        raise ValidationError(f"未知的脉冲代码: {code}", "pulse", code)


class SweepKind(Enum):
    """σ3 项的扫描函数"""
    LIN = 'Lin'
    TAN = 'Tan'

    @classmethod
    def from_code(cls, code) -> 'SweepKind':
        if isinstance(code, cls):
            return code
        for kind in cls:
            if kind.value.lower() == str(code).strip().lower():
                return kind
        raise ValidationError(f"未知的扫描类型: {code}", "sweep", code)


class ErrorKind(IntEnum):
    """脉冲误差模型"""
    SCALE_BOTH = 1
    FIX_PEAK = 2
    FIX_AREA = 3

    @classmethod
    def from_code(cls, code) -> 'ErrorKind':
        try:
            return cls(int(code))
        except (TypeError, ValueError):
            raise ValidationError(f"未知的误差类型: {code}", "error_kind", code)


# ---------------------------------------------------------------- pulses

def _base_pulse(kind: PulseKind, b: np.ndarray, t: np.ndarray,
                error: Optional['ErrorModel']) -> np.ndarray:
    """b > 0 的脉冲值（已广播）"""
    if kind is PulseKind.LORENTZIAN:
        stretch = 1.0
        if error is not None and error.kind in (ErrorKind.FIX_PEAK, ErrorKind.FIX_AREA):
            stretch = (1.0 - error.epsilon) ** 2
        return 0.5 * b / (b * b * t * t * stretch + 1.0)
    if kind is PulseKind.GAUSSIAN:
        return 0.5 * b * np.exp(-b * b * t * t / math.pi)
    if kind is PulseKind.SINC:
        return 0.5 * b * np.sinc(b * t / math.pi)
    if kind is PulseKind.RECT:
        return np.where(np.abs(t) < math.pi / (2.0 * b), 0.5 * b, 0.0)
    # 三角形
    return np.where(np.abs(t) < math.pi / b, 0.5 * (b - np.abs(t) * b * b / math.pi), 0.0)


def pulse_values(kind: PulseKind, b, t, error: Optional['ErrorModel'] = None) -> np.ndarray:
    """向量化脉冲 f(t; b)；b < 0 视作符号翻转的控制场，b = 0 关闭控制"""
    b = np.asarray(b, dtype=float)
    t = np.asarray(t, dtype=float)
    magnitude = np.abs(b)
    active = magnitude > 0.0
    safe_b = np.where(active, magnitude, 1.0)

    values = _base_pulse(kind, safe_b, t, error)
    if error is not None and error.kind in (ErrorKind.SCALE_BOTH, ErrorKind.FIX_AREA):
        values = values * (1.0 + error.epsilon)
    return np.where(active, np.sign(b) * values, 0.0)


@dataclass(frozen=True)
class PulseShape:
    """五种脉冲，峰值 b/2，面积 π/2"""
    kind: PulseKind
    b: float

    def __post_init__(self):
        object.__setattr__(self, 'kind', PulseKind.from_code(self.kind))
        if not self.b > 0:
            raise ValidationError("脉冲耦合 b 必须大于0", "b", self.b)

    def __call__(self, t):
        return eval_pulse(self, t)

    def kinks(self) -> Tuple[float, ...]:
        """不连续点/折点（t 坐标）"""
        if self.kind is PulseKind.RECT:
            edge = math.pi / (2.0 * self.b)
            return (-edge, edge)
        if self.kind is PulseKind.TRIANGLE:
            edge = math.pi / self.b
            return (-edge, 0.0, edge)
        return ()

    def core_halfwidth(self) -> float:
        """需要限制步长的中心区域半宽（t 坐标）；inf 表示整个窗口"""
        if self.kind is PulseKind.SINC:
            return math.inf
        if self.kind is PulseKind.RECT:
            return math.pi / (2.0 * self.b)
        if self.kind is PulseKind.TRIANGLE:
            return math.pi / self.b
        return 10.0 / self.b


def eval_pulse(p: PulseShape, t):
    """按脉冲种类求值；标量输入返回 float"""
    values = pulse_values(p.kind, p.b, t)
    return float(values) if np.ndim(values) == 0 else values


# ---------------------------------------------------------------- sweeps

def sweep_values(kind: SweepKind, lambda0: float, c, u) -> Tuple[np.ndarray, np.ndarray]:
    """λ(u) 与 dλ/du，c 可以是数组（每个系综成员一个）"""
    u = np.asarray(u, dtype=float)
    if kind is SweepKind.LIN:
        lam = lambda0 * (u - 0.5)
        return lam, np.full_like(lam, float(lambda0))

    c = np.asarray(c, dtype=float)
    k = np.arctan(1.0 / c)
    x = k * (2.0 * u - 1.0)
    cos_x = np.cos(x)
    lam = 0.5 * lambda0 * c * np.tan(x)
    dlam = lambda0 * c * k / (cos_x * cos_x)
    return lam, dlam


def sweep_inverse(kind: SweepKind, lambda0: float, c, lam) -> np.ndarray:
    """由 λ 反求 u"""
    lam = np.asarray(lam, dtype=float)
    if kind is SweepKind.LIN:
        return lam / lambda0 + 0.5
    c = np.asarray(c, dtype=float)
    return 0.5 * (1.0 + np.arctan(2.0 * lam / (lambda0 * c)) / np.arctan(1.0 / c))


@dataclass(frozen=True)
class SweepSpec:
    """扫描函数：Lin 或 Tan，边界处 λ = ∓λ0/2"""
    kind: SweepKind = SweepKind.LIN
    lambda0: float = 10.0
    c: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, 'kind', SweepKind.from_code(self.kind))
        if not self.lambda0 > 0:
            raise ValidationError("λ0 必须大于0", "lambda0", self.lambda0)
        if self.kind is SweepKind.TAN and not self.c > 0:
            raise ValidationError("Tan 扫描要求 c > 0", "c", self.c)

    def evaluate(self, u):
        return sweep_values(self.kind, self.lambda0, self.c, u)

    def inverse(self, lam):
        return sweep_inverse(self.kind, self.lambda0, self.c, lam)


def eval_sweep(s: SweepSpec, u: float) -> Tuple[float, float]:
    """返回 (λ(u), dλ/du)"""
    lam, dlam = s.evaluate(u)
    return float(lam), float(dlam)


# ---------------------------------------------------------------- errors

@dataclass(frozen=True)
class ErrorModel:
    """脉冲误差：1 同时缩放，2 固定峰值（时间缩放），3 两者组合"""
    kind: ErrorKind
    epsilon: float

    def __post_init__(self):
        object.__setattr__(self, 'kind', ErrorKind.from_code(self.kind))
        if not -1.0 < self.epsilon < 1.0:
            raise ValidationError("ε 必须位于 (-1, 1)", "epsilon", self.epsilon)

    def area_factor(self) -> float:
        """相对于 π/2 的面积因子"""
        if self.kind is ErrorKind.SCALE_BOTH:
            return 1.0 + self.epsilon
        if self.kind is ErrorKind.FIX_PEAK:
            return 1.0 / (1.0 - self.epsilon)
        return (1.0 + self.epsilon) / (1.0 - self.epsilon)


def _check_error_support(kind: PulseKind, error: Optional[ErrorModel]):
    if error is not None and error.kind is not ErrorKind.SCALE_BOTH and kind is not PulseKind.LORENTZIAN:
        raise ValidationError("误差类型 2/3 仅适用于 Lorentzian 脉冲", "error_kind", int(error.kind))


@dataclass(frozen=True)
class PerturbedPulse:
    """带误差的脉冲求值器"""
    shape: PulseShape
    error: ErrorModel

    def __call__(self, t):
        values = pulse_values(self.shape.kind, self.shape.b, t, self.error)
        return float(values) if np.ndim(values) == 0 else values


def apply_error(p: PulseShape, e: ErrorModel) -> PerturbedPulse:
    """对脉冲施加误差模型（作用在扫描复合之前的脉冲函数上）"""
    _check_error_support(p.kind, e)
    return PerturbedPulse(p, e)


def pulse_area(p: PulseShape, error: Optional[ErrorModel] = None) -> float:
    """自适应求积得到 ∫f dt（整个实轴）"""
    _check_error_support(p.kind, error)

    def f(t):
        return float(pulse_values(p.kind, p.b, t, error))

    if p.kind is PulseKind.SINC:
        scale = 1.0 + error.epsilon if error is not None else 1.0
        head, _ = integrate.quad(lambda t: float(pulse_values(p.kind, p.b, t)), 0.0, 1.0,
                                 epsabs=1e-13, epsrel=1e-12)
        tail, _ = integrate.quad(lambda t: 0.5 / t, 1.0, np.inf, weight='sin', wvar=p.b)
        return 2.0 * scale * (head + tail)

    if p.kind in (PulseKind.RECT, PulseKind.TRIANGLE):
        upper = max(p.kinks())
        half, _ = integrate.quad(f, 0.0, upper, epsabs=1e-13, epsrel=1e-12)
        return 2.0 * half

    half, _ = integrate.quad(f, 0.0, np.inf, epsabs=1e-13, epsrel=1e-12, limit=200)
    return 2.0 * half


def cd_pulse_reference(a: float, t):
    """反绝热驱动所需的 Lorentzian：(1/2)·a/(t² + a²)"""
    if a == 0:
        raise ValidationError("能隙 a = 0 时反绝热场不存在（本征值交叉）", "a", a)
    t = np.asarray(t, dtype=float)
    values = 0.5 * a / (t * t + a * a)
    return float(values) if values.ndim == 0 else values


# ---------------------------------------------------------------- GLZ

@dataclass(frozen=True)
class GLZParams:
    """广义 LZ 系统参数

    pulse_sweep 为 None 时，脉冲自变量使用与 sweep 同类的扫描，
    Tan 扫描的形状参数取 |b|，即 λ(s;b)。
    """
    a: float
    b: float = 0.0
    phi: float = math.pi / 2
    pulse: PulseKind = PulseKind.LORENTZIAN
    sweep: SweepSpec = SweepSpec()
    pulse_sweep: Optional[SweepSpec] = None
    T: float = 10.0
    error: Optional[ErrorModel] = None

    def __post_init__(self):
        object.__setattr__(self, 'pulse', PulseKind.from_code(self.pulse))
        if not math.isfinite(self.a):
            raise ValidationError("能隙 a 必须有限", "a", self.a)
        if not math.isfinite(self.b):
            raise ValidationError("耦合 b 必须有限", "b", self.b)
        if not self.T > 0:
            raise ValidationError("协议时间 T 必须大于0", "T", self.T)
        _check_error_support(self.pulse, self.error)

    @property
    def shape(self) -> Optional[PulseShape]:
        return PulseShape(self.pulse, abs(self.b)) if self.b != 0 else None

    def with_gap(self, a: float) -> 'GLZParams':
        return replace(self, a=a)

    def with_control(self, b: float) -> 'GLZParams':
        return replace(self, b=b)

    def pulse_sweep_for(self, b) -> Tuple[SweepKind, float, Any]:
        """脉冲自变量所用扫描 (kind, λ0, c)，c 可随 b 变化"""
        if self.pulse_sweep is not None:
            ps = self.pulse_sweep
            return ps.kind, ps.lambda0, ps.c
        if self.sweep.kind is SweepKind.TAN:
            magnitude = np.abs(np.asarray(b, dtype=float))
            return SweepKind.TAN, self.sweep.lambda0, np.where(magnitude > 0, magnitude, 1.0)
        return SweepKind.LIN, self.sweep.lambda0, self.sweep.c

    def echo(self) -> Dict[str, Any]:
        """参数回显（CSV 表头与 JSON 清单）"""
        return {
            'a': self.a,
            'b': self.b,
            'phi': self.phi,
            'pulse': self.pulse.value,
            'sweep': self.sweep.kind.value,
            'lambda0': self.sweep.lambda0,
            'c': self.sweep.c,
            'pulse_sweep': None if self.pulse_sweep is None else {
                'kind': self.pulse_sweep.kind.value,
                'lambda0': self.pulse_sweep.lambda0,
                'c': self.pulse_sweep.c,
            },
            'T': self.T,
            'error_kind': None if self.error is None else int(self.error.kind),
            'epsilon': None if self.error is None else self.error.epsilon,
        }


def control_field(params: GLZParams, u, b=None) -> np.ndarray:
    """∂_sλ(u;b)·f(λ(u;b))，b 可为数组"""
    b = params.b if b is None else b
    kind, lambda0, c = params.pulse_sweep_for(b)
    lam, dlam = sweep_values(kind, lambda0, c, u)
    return dlam * pulse_values(params.pulse, b, lam, params.error)


def hamiltonian_at(params: GLZParams, u: float) -> PauliVector:
    """s 坐标下 u 处的哈密顿量"""
    lam, _ = eval_sweep(params.sweep, u)
    g = float(control_field(params, u))
    return PauliVector(
        0.0,
        params.T * params.a + g * math.cos(params.phi),
        g * math.sin(params.phi),
        -params.T * lam,
    )


def raw_hamiltonian(a: float, t: float, b: float = 0.0, phi: float = math.pi / 2,
                    pulse: PulseKind = PulseKind.LORENTZIAN) -> PauliVector:
    """原始时间坐标 H = -tσ3 + aσ1 + f(t;b)σ_φ"""
    f = float(pulse_values(PulseKind.from_code(pulse), b, t))
    return PauliVector(0.0, a + f * math.cos(phi), f * math.sin(phi), -t)


def pulse_breakpoints(params: GLZParams, b_values) -> List[float]:
    """脉冲不连续点对应的 u 值（0 < u < 1）"""
    if params.pulse not in (PulseKind.RECT, PulseKind.TRIANGLE):
        return []
    points = set()
    for b in np.atleast_1d(np.asarray(b_values, dtype=float)):
        if b == 0:
            continue
        kind, lambda0, c = params.pulse_sweep_for(b)
        for t in PulseShape(params.pulse, abs(b)).kinks():
            u = float(sweep_inverse(kind, lambda0, c, t))
            if 0.0 < u < 1.0:
                points.add(u)
    return sorted(points)


def pulse_core_window(params: GLZParams, b_values) -> Optional[Tuple[float, float, float]]:
    """(u_lo, u_hi, max_step)：窄脉冲中心区域与步长上限；无控制场时返回 None"""
    magnitudes = np.abs(np.atleast_1d(np.asarray(b_values, dtype=float)))
    magnitudes = magnitudes[magnitudes > 0]
    if magnitudes.size == 0:
        return None

    b_max = float(magnitudes.max())
    b_min = float(magnitudes.min())
    kind, lambda0, c = params.pulse_sweep_for(b_min)
    halfwidth = PulseShape(params.pulse, b_min).core_halfwidth()
    if math.isinf(halfwidth):
        lo, hi = 0.0, 1.0
    else:
        lo = float(sweep_inverse(kind, lambda0, c, -halfwidth))
        hi = float(sweep_inverse(kind, lambda0, c, halfwidth))
    max_step = 0.1 / (b_max * params.sweep.lambda0)
    return max(lo, 0.0), min(hi, 1.0), max_step


def pulse_catalog(b: float, t_values) -> Dict[str, np.ndarray]:
    """五种脉冲在 t 网格上的取值"""
    return {kind.value: pulse_values(kind, b, t_values) for kind in PulseKind}


if __name__ == '__main__':
    print("=== GLZ 模型测试 ===")
    for kind in PulseKind:
        shape = PulseShape(kind, 2.0)
        print(f"{kind.value}: f(0) = {eval_pulse(shape, 0.0):.6f}, 面积 = {pulse_area(shape):.10f}")
    params = GLZParams(a=0.5, b=2.0, phi=math.pi / 2)
    print(f"H(0.5) = {hamiltonian_at(params, 0.5)}")
