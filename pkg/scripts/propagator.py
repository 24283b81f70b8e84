#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
二能级薛定谔方程数值传播
s 坐标有限窗口传播、原始时间坐标传播子、δ 脉冲组合以及绝热偏离面积

数值积分统一使用 scipy.integrate.solve_ivp 的 RK45（Dormand-Prince 5(4)）。
系综成员按块向量化：每个成员两分量，状态向量为 [c+ (N), c- (N)]。
"""

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy import integrate

from enhanced_logger import get_logger
from error_handler import IntegrationError, ValidationError
from config_manager import IntegratorConfig
from pauli_core import (
    PauliVector, StateVector, Unitary2, apply, compose, pauli_exp,
    real_eigenbasis, sigma_phi,
)
from glz_models import (
    GLZParams, PulseKind, PulseShape, control_field, pulse_breakpoints,
    pulse_core_window, pulse_values, sweep_values,
)

logger = get_logger("propagator")

PROJECTIONS = ('adiabatic', 'diabatic')


@dataclass
class TrajectoryRecord:
    """单条轨迹：P(u) 网格、末态跃迁概率与绝热偏离面积"""
    params: GLZParams
    final_prob: float
    amplitude: complex
    max_norm_error: float
    grid: Optional[np.ndarray] = None
    prob: Optional[np.ndarray] = None
    norm_error: Optional[np.ndarray] = None
    area: Optional[float] = None

    @property
    def max_prob(self) -> float:
        return float(np.max(self.prob)) if self.prob is not None else self.final_prob

    def to_frame(self) -> pd.DataFrame:
        """CSV 列：u, t, P, norm_error"""
        if self.grid is None:
            raise ValidationError("轨迹未记录网格，无法导出", "record", False)
        return pd.DataFrame({
            'u': self.grid,
            't': self.params.T * (self.grid - 0.5),
            'P': self.prob,
            'norm_error': self.norm_error,
        })


@dataclass
class BatchResult:
    """一块系综成员的传播结果"""
    amplitude: np.ndarray
    final_prob: np.ndarray
    max_norm_error: np.ndarray
    grid: Optional[np.ndarray] = None
    prob: Optional[np.ndarray] = None
    norm_error: Optional[np.ndarray] = None
    area: Optional[np.ndarray] = None
    details: Dict[str, Any] = field(default_factory=dict)


# ---------------------------------------------------------------- core stepping

def _pauli_rhs(n1, n2, n3, y: np.ndarray, size: int) -> np.ndarray:
    """-i(n·σ)ψ，向量化"""
    cp, cm = y[:size], y[size:]
    off = n1 - 1j * n2
    return np.concatenate((
        -1j * (n3 * cp + off * cm),
        -1j * (np.conj(off) * cp - n3 * cm),
    ))


def _segment_plan(boundaries: Sequence[float], start: float, stop: float,
                  default_step: float, core: Optional[Tuple[float, float, float]]) -> List[Tuple[float, float, float]]:
    """按断点切分积分区间，中心区域使用更小的步长上限"""
    lo_end, hi_end = min(start, stop), max(start, stop)
    cuts = {start, stop}
    cuts.update(u for u in boundaries if lo_end < u < hi_end)
    if core is not None:
        cuts.update(u for u in core[:2] if lo_end < u < hi_end)
    ordered = sorted(cuts, reverse=stop < start)

    plan = []
    for u0, u1 in zip(ordered[:-1], ordered[1:]):
        step = default_step
        if core is not None:
            mid = 0.5 * (u0 + u1)
            if core[0] <= mid <= core[1]:
                step = min(step, core[2])
        plan.append((u0, u1, step))
    return plan


def _integrate_segments(rhs: Callable, y0: np.ndarray, plan, cfg: IntegratorConfig,
                        grid: Optional[np.ndarray], size: int,
                        details: Dict[str, Any]) -> Tuple[np.ndarray, Optional[np.ndarray], float]:
    """逐段积分；返回末态、网格上的状态（可选）和段内全部输出点上的最大范数偏差"""
    y = y0.astype(complex)
    states = None
    filled = None
    if grid is not None:
        states = np.empty((2 * size, grid.size), dtype=complex)
        filled = np.zeros(grid.size, dtype=bool)
    max_drift = 0.0

    for u0, u1, step in plan:
        lo, hi = min(u0, u1), max(u0, u1)
        if grid is not None:
            mask = (grid >= lo) & (grid <= hi) & ~filled
            indices = np.nonzero(mask)[0]
            t_eval = np.unique(np.append(grid[indices], u1))
            if u1 < u0:
                t_eval = t_eval[::-1]
        else:
            # 不记录时保留每个接受步，范数在段内逐步检查
            indices = np.empty(0, dtype=int)
            t_eval = None

        sol = integrate.solve_ivp(rhs, (u0, u1), y, method='RK45', t_eval=t_eval,
                                  rtol=cfg.rtol, atol=cfg.atol, max_step=step)
        if sol.status < 0:
            location = float(sol.t[-1]) if sol.t.size else u0
            raise IntegrationError(f"积分失败: {sol.message}", location=location, details=dict(details))

        if indices.size:
            columns = np.searchsorted(sol.t if u1 > u0 else sol.t[::-1], grid[indices])
            block = sol.y if u1 > u0 else sol.y[:, ::-1]
            states[:, indices] = block[:, columns]
            filled[indices] = True

        block_norm = np.sqrt(np.abs(sol.y[:size]) ** 2 + np.abs(sol.y[size:]) ** 2)
        max_drift = max(max_drift, float(np.max(np.abs(block_norm - 1.0))))

        y = sol.y[:, -1]
        norm = block_norm[:, -1]
        drift = float(np.max(np.abs(norm - 1.0)))
        if drift > cfg.norm_tolerance:
            logger.log_norm_drift(u1, drift)
            y = y / np.concatenate((norm, norm))

    return y, states, max_drift


# ---------------------------------------------------------------- s-window

def propagate_batch(template: GLZParams, a_values, b_values, cfg: IntegratorConfig,
                    record: bool = False) -> BatchResult:
    """同一模板、不同 (a, b) 的成员一起传播

    初态为 u=0 处 T(-λσ3 + aσ1) 的瞬时基态，末态投影到 u=1 的瞬时激发态。
    """
    a, b = np.broadcast_arrays(np.atleast_1d(np.asarray(a_values, dtype=float)),
                               np.atleast_1d(np.asarray(b_values, dtype=float)))
    a, b = a.copy(), b.copy()
    size = a.size
    T = template.T
    sweep = template.sweep
    cos_phi, sin_phi = math.cos(template.phi), math.sin(template.phi)
    Ta = T * a
    has_control = bool(np.any(b != 0))

    def rhs(u, y):
        lam, _ = sweep_values(sweep.kind, sweep.lambda0, sweep.c, u)
        n3 = -T * lam
        if has_control:
            g = control_field(template, u, b)
            return _pauli_rhs(Ta + g * cos_phi, g * sin_phi, n3, y, size)
        return _pauli_rhs(Ta, 0.0, n3, y, size)

    lam0, _ = sweep.evaluate(0.0)
    ground0, _ = real_eigenbasis(-T * lam0, Ta)
    y0 = np.concatenate((ground0[0], ground0[1]))

    boundaries = list(cfg.breakpoints)
    core = None
    if has_control:
        boundaries.extend(pulse_breakpoints(template, b))
        core = pulse_core_window(template, b)
    plan = _segment_plan(boundaries, 0.0, 1.0, cfg.max_step, core)

    grid = np.linspace(0.0, 1.0, cfg.grid_points) if record else None
    details = {'template': template.echo(), 'a_range': (float(a.min()), float(a.max())),
               'b_range': (float(b.min()), float(b.max()))}
    y, states, max_drift = _integrate_segments(rhs, y0, plan, cfg, grid, size, details)

    lam1, _ = sweep.evaluate(1.0)
    _, excited1 = real_eigenbasis(-T * lam1, Ta)
    amplitude = excited1[0] * y[:size] + excited1[1] * y[size:]

    result = BatchResult(
        amplitude=amplitude,
        final_prob=np.abs(amplitude) ** 2,
        max_norm_error=np.full(size, max_drift),
        details=details,
    )

    if record:
        lam_grid, _ = sweep.evaluate(grid)
        _, excited = real_eigenbasis(-T * lam_grid[None, :], Ta[:, None])
        cp, cm = states[:size], states[size:]
        result.grid = grid
        result.prob = np.abs(excited[0] * cp + excited[1] * cm) ** 2
        result.norm_error = np.abs(np.sqrt(np.abs(cp) ** 2 + np.abs(cm) ** 2) - 1.0)
        result.area = T * integrate.trapezoid(result.prob, grid, axis=1)

    return result


def propagate(params: GLZParams, cfg: Optional[IntegratorConfig] = None,
              record: bool = False) -> TrajectoryRecord:
    """单组参数的有限窗口传播"""
    cfg = cfg or IntegratorConfig()
    batch = propagate_batch(params, params.a, params.b, cfg, record=record)
    record_obj = TrajectoryRecord(
        params=params,
        final_prob=float(batch.final_prob[0]),
        amplitude=complex(batch.amplitude[0]),
        max_norm_error=float(batch.max_norm_error[0]),
    )
    if record:
        record_obj.grid = batch.grid
        record_obj.prob = batch.prob[0]
        record_obj.norm_error = batch.norm_error[0]
        record_obj.area = float(batch.area[0])
    return record_obj


def transition_probability(params: GLZParams, cfg: Optional[IntegratorConfig] = None) -> float:
    """P = |<e(1)|U|g(0)>|²"""
    return propagate(params, cfg, record=False).final_prob


def adiabaticity_area(params: GLZParams, cfg: Optional[IntegratorConfig] = None) -> float:
    """∫P dt，dt = T·du，1001 点梯形积分"""
    return propagate(params, cfg, record=True).area


# ---------------------------------------------------------------- raw time

def raw_propagator_batch(a_values, t_i: float, t_f: float, b: float = 0.0,
                         phi: float = math.pi / 2, pulse: PulseKind = PulseKind.LORENTZIAN,
                         cfg: Optional[IntegratorConfig] = None) -> List[Unitary2]:
    """H = -tσ3 + aσ1 + f(t;b)σ_φ 在 [t_i, t_f] 上的传播子（每个 a 一个）"""
    cfg = cfg or IntegratorConfig()
    a = np.atleast_1d(np.asarray(a_values, dtype=float))
    size = a.size
    if t_f == t_i:
        return [Unitary2.identity() for _ in range(size)]

    cos_phi, sin_phi = math.cos(phi), math.sin(phi)
    pulse = PulseKind.from_code(pulse)

    def rhs(t, y):
        f = float(pulse_values(pulse, b, t)) if b != 0 else 0.0
        return _pauli_rhs(a + f * cos_phi, f * sin_phi, -t, y, size)

    boundaries: List[float] = []
    core = None
    span = abs(t_f - t_i)
    default_step = max(cfg.max_step * span, 1e-3)
    if b != 0:
        shape = PulseShape(pulse, abs(b))
        boundaries.extend(shape.kinks())
        halfwidth = min(shape.core_halfwidth(), span + abs(t_i) + abs(t_f))
        core = (-halfwidth, halfwidth, 0.1 / abs(b))
    plan = _segment_plan(boundaries, t_i, t_f, default_step, core)

    # 从 |-> 出发：U|-> = (B, A*)
    y0 = np.concatenate((np.zeros(size), np.ones(size)))
    details = {'t_i': t_i, 't_f': t_f, 'b': b, 'phi': phi, 'pulse': pulse.value}
    y, _, _ = _integrate_segments(rhs, y0, plan, cfg, None, size, details)
    return [Unitary2(complex(np.conj(y[size + k])), complex(y[k])) for k in range(size)]


def raw_propagator(a: float, t_i: float, t_f: float, b: float = 0.0,
                   phi: float = math.pi / 2, pulse: PulseKind = PulseKind.LORENTZIAN,
                   cfg: Optional[IntegratorConfig] = None) -> Unitary2:
    """单个 a 的原始时间传播子 U(t_f, t_i)"""
    return raw_propagator_batch([a], t_i, t_f, b, phi, pulse, cfg)[0]


def _kick_projection(U: Unitary2, a: float, t_f: float, projection: str) -> float:
    if projection == 'diabatic':
        return abs(U.A) ** 2
    ground, _ = real_eigenbasis(t_f, a)
    _, excited = real_eigenbasis(-t_f, a)
    psi = apply(U, StateVector(complex(ground[0]), complex(ground[1])))
    return abs(excited[0] * psi.c_plus + excited[1] * psi.c_minus) ** 2


def _check_kick_args(t_f: float, projection: str):
    if not t_f > 0:
        raise ValidationError("t_f 必须大于0", "t_f", t_f)
    if projection not in PROJECTIONS:
        raise ValidationError(f"未知的投影方式: {projection}", "projection", projection)


def half_window_pair(a: float, t_f: float, cfg: Optional[IntegratorConfig] = None) -> Tuple[Unitary2, Unitary2]:
    """(U0(0,-t_f), U0(t_f,0))，b = 0"""
    return raw_propagator(a, -t_f, 0.0, cfg=cfg), raw_propagator(a, 0.0, t_f, cfg=cfg)


def delta_kick_general(a: float, n: PauliVector, t_f: float = 20.0,
                       cfg: Optional[IntegratorConfig] = None,
                       projection: str = 'adiabatic') -> float:
    """U0(t_f,0)·exp(-i n·σ)·U0(0,-t_f) 的跃迁概率；δ 脉冲本身不做数值积分"""
    _check_kick_args(t_f, projection)
    U_minus, U_plus = half_window_pair(a, t_f, cfg)
    U = compose(U_plus, compose(pauli_exp(n), U_minus))
    return _kick_projection(U, a, t_f, projection)


def delta_kick_probability(a: float, phi: float, t_f: float = 20.0,
                           cfg: Optional[IntegratorConfig] = None,
                           projection: str = 'adiabatic') -> float:
    """δ 脉冲极限 K(φ) = -iσ_φ 下的跃迁概率，t_f → ∞ 时趋于 P∞(a;φ)"""
    return delta_kick_general(a, sigma_phi(phi).scaled(math.pi / 2), t_f, cfg, projection)


def delta_kick_grid(a_values, phi_values, t_f: float = 20.0,
                    cfg: Optional[IntegratorConfig] = None,
                    projection: str = 'adiabatic') -> np.ndarray:
    """(a, φ) 网格上的 δ 脉冲概率；每个 a 的半窗口传播子只算一次"""
    _check_kick_args(t_f, projection)
    a_values = np.atleast_1d(np.asarray(a_values, dtype=float))
    minus = raw_propagator_batch(a_values, -t_f, 0.0, cfg=cfg)
    plus = raw_propagator_batch(a_values, 0.0, t_f, cfg=cfg)

    table = np.empty((a_values.size, len(phi_values)))
    for i, a in enumerate(a_values):
        for j, phi in enumerate(phi_values):
            U = compose(plus[i], compose(pauli_exp(sigma_phi(phi).scaled(math.pi / 2)), minus[i]))
            table[i, j] = _kick_projection(U, float(a), t_f, projection)
    return table


if __name__ == '__main__':
    print("=== 传播模块测试 ===")
    cfg = IntegratorConfig()
    for a in (0.25, 0.5, 1.0):
        p = transition_probability(GLZParams(a=a), cfg)
        print(f"a={a}: P = {p:.6f}, e^(-πa²) = {math.exp(-math.pi * a * a):.6f}")
    rec = propagate(GLZParams(a=0.5, b=2.0, phi=math.pi / 2), cfg, record=True)
    print(f"CD: P_final = {rec.final_prob:.2e}, max P = {rec.max_prob:.2e}, area = {rec.area:.2e}")
