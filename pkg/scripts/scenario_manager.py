#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
实验场景管理器
按名称注册全部数据集场景，逐个面板计算并写出带自描述表头的 CSV，
同时生成包含校验和与耗时的 JSON 清单
集成增强的日志系统和错误处理
"""

import math
import os
import shutil
import time
from dataclasses import asdict, dataclass, field, fields, replace
from functools import lru_cache
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from enhanced_logger import get_logger
from error_handler import ConfigError, ErrorHandler, NoRootError, ValidationError, safe_execute
from config_manager import EnsembleConfig, IntegratorConfig
from data_utils import (
    DataConverter, export_workbook, file_sha256, write_json, write_tidy_csv,
)
from glz_models import (
    ErrorKind, ErrorModel, GLZParams, PulseKind, PulseShape, SweepKind, SweepSpec,
    pulse_area, pulse_catalog,
)
from propagator import (
    delta_kick_probability, half_window_pair, propagate, propagate_batch,
    raw_propagator, adiabaticity_area,
)
from pauli_core import compose
from special_functions import (
    avg_plz, chi, dirac_crossover_sigma, p_infinity, p_infinity_average,
    p_infinity_average_series, pcf_lz_propagator,
)
from ensemble_average import (
    GapDistribution, average_area, average_probability, characteristic_b0,
    characteristic_b0_t_averaged, map_tasks, optimize_bstar,
)

logger = get_logger("scenario_manager")

SCENARIO_NAMES = (
    'surface', 'cc', 'timedep', 'dirac', 'pstar-vs-sigma', 'pstar-vs-mu',
    'area', 'heatmap', 'pulses', 'sweeps', 'identities',
)
ENSEMBLE_SCENARIOS = ('pstar-vs-sigma', 'pstar-vs-mu', 'area', 'heatmap', 'pulses', 'sweeps')
B0_POLICIES = ('fixed', 't_averaged')
AXIS_FIELDS = ('mu', 'sigma', 'sigma_ratio', 'phi', 'pulse', 'error_kind', 'epsilon',
               'sweep', 'T', 'a', 'b')
HALF_PI = math.pi / 2


@dataclass
class Scenario:
    """一个场景的全部参数；列表字段为网格轴"""
    name: str
    mu: List[float] = field(default_factory=lambda: [0.5])
    sigma: List[float] = field(default_factory=lambda: [0.1])
    sigma_ratio: List[float] = field(default_factory=lambda: [0.2])
    phi: List[float] = field(default_factory=lambda: [0.0, HALF_PI])
    pulse: List[str] = field(default_factory=lambda: ['L'])
    error_kind: List[int] = field(default_factory=lambda: [1])
    epsilon: List[float] = field(default_factory=lambda: [0.0])
    sweep: List[str] = field(default_factory=lambda: ['Lin'])
    T: List[float] = field(default_factory=lambda: [10.0])
    a: List[float] = field(default_factory=lambda: [0.5])
    b: List[float] = field(default_factory=lambda: [2.0])
    n_samples: int = 1000
    seed: int = 20240501
    output: str = 'lzcd_output'
    optimize: bool = False
    b0_policy: str = 'fixed'
    lambda0: float = 10.0
    c: Optional[float] = None  # None 表示取 c = μ
    b_scan_max: float = 8.0
    b_scan_points: int = 81
    checks: int = 10

    @classmethod
    def axis_names(cls) -> Tuple[str, ...]:
        return AXIS_FIELDS

    @classmethod
    def from_mapping(cls, name: str, mapping: Dict[str, Any]) -> 'Scenario':
        """由键值映射构造；未知键或类型错误一并报告"""
        known = {f.name: f for f in fields(cls)}
        axes = set(cls.axis_names())
        violations = []
        kwargs: Dict[str, Any] = {}

        for key, raw in mapping.items():
            if key not in known or key == 'name':
                violations.append(f"{key}: 未知的场景参数")
                continue
            values = list(raw) if isinstance(raw, (list, tuple, np.ndarray)) else [raw]
            try:
                if key in axes:
                    kwargs[key] = [_coerce_axis(key, v) for v in values]
                else:
                    kwargs[key] = _coerce_scalar(key, values[-1] if values else None)
            except (TypeError, ValueError) as e:
                violations.append(f"{key}: 无法解析 {raw!r} ({e})")

        if violations:
            raise ConfigError(f"场景 {name} 参数无效", violations=violations)
        return cls(name=name, **kwargs)

    def collect_violations(self) -> List[str]:
        violations = []
        if self.name not in SCENARIO_NAMES:
            violations.append(f"name: 未注册的场景 {self.name}")
        for axis in self.axis_names():
            if len(getattr(self, axis)) == 0:
                violations.append(f"{axis}: 网格轴不能为空")

        def check(axis, predicate, message):
            bad = [v for v in getattr(self, axis) if not predicate(v)]
            if bad:
                violations.append(f"{axis}: {message} {bad}")

        finite = lambda v: isinstance(v, (int, float)) and math.isfinite(v)
        check('mu', finite, "必须为有限数")
        check('sigma', lambda v: finite(v) and v >= 0, "必须为非负有限数")
        check('sigma_ratio', lambda v: finite(v) and v >= 0, "必须为非负有限数")
        check('phi', finite, "必须为有限数")
        check('a', finite, "必须为有限数")
        check('b', finite, "必须为有限数")
        check('T', lambda v: finite(v) and v > 0, "必须大于0")
        check('epsilon', lambda v: finite(v) and -1 < v < 1, "必须位于 (-1, 1)")
        check('pulse', lambda v: _valid_code(PulseKind, v), "未知的脉冲代码")
        check('sweep', lambda v: _valid_code(SweepKind, v), "未知的扫描类型")
        check('error_kind', lambda v: _valid_code(ErrorKind, v), "未知的误差类型")

        if self.name in ENSEMBLE_SCENARIOS and any(finite(m) and m <= 0 for m in self.mu):
            violations.append("mu: 系综场景要求 μ > 0")
        if self.n_samples < 1:
            violations.append("n_samples: 必须大于0")
        if self.optimize and self.n_samples < 100:
            violations.append("n_samples: b* 搜索要求至少 100 个样本")
        if self.b0_policy not in B0_POLICIES:
            violations.append(f"b0_policy: 必须是 {', '.join(B0_POLICIES)}")
        if not self.lambda0 > 0:
            violations.append("lambda0: 必须大于0")
        if self.c is not None and not self.c > 0:
            violations.append("c: 必须大于0")
        if (self.c is None and any(_valid_code(SweepKind, v) and SweepKind.from_code(v) is SweepKind.TAN
                                   for v in self.sweep)
                and any(finite(m) and m <= 0 for m in self.mu)):
            violations.append("c: 未指定 c 时 Tan 扫描要求 μ > 0")
        if self.b_scan_points < 2:
            violations.append("b_scan_points: 至少为2")
        if self.checks < 1:
            violations.append("checks: 必须大于0")
        if not self.output:
            violations.append("output: 不能为空")
        return violations

    def validate(self):
        violations = self.collect_violations()
        if violations:
            raise ConfigError(f"场景 {self.name} 验证失败", violations=violations)

    def echo(self) -> Dict[str, Any]:
        """参数回显；不含输出路径，便于比较校验和"""
        data = asdict(self)
        data.pop('name')
        data.pop('output')
        return data

    def sweep_shape(self, mu: float) -> float:
        """Tan 扫描的形状参数；未指定时 c = μ"""
        return mu if self.c is None else self.c

    def model(self, pulse: Optional[str] = None, sweep: Optional[str] = None,
              T: Optional[float] = None, error: Optional[ErrorModel] = None) -> GLZParams:
        return GLZParams(
            a=self.mu[0],
            pulse=pulse or self.pulse[0],
            sweep=SweepSpec(kind=sweep or self.sweep[0], lambda0=self.lambda0,
                            c=self.sweep_shape(self.mu[0])),
            T=self.T[0] if T is None else T,
            error=error,
        )


def _coerce_axis(key: str, value: Any) -> Any:
    if key in ('pulse', 'sweep'):
        return str(value)
    if key == 'error_kind':
        return int(value)
    if isinstance(value, str):
        value = DataConverter.parse_scalar(value)
    if isinstance(value, bool):
        raise ValueError("不接受布尔值")
    return float(value)


def _coerce_scalar(key: str, value: Any) -> Any:
    if key == 'c' and value is None:
        return None
    if isinstance(value, str) and key != 'output' and key != 'b0_policy':
        value = DataConverter.parse_scalar(value)
    if key in ('n_samples', 'seed', 'b_scan_points', 'checks'):
        if isinstance(value, float) and not value.is_integer():
            raise ValueError("需要整数")
        return int(value)
    if key == 'optimize':
        if not isinstance(value, bool):
            raise ValueError("需要 true/false")
        return value
    if key in ('output', 'b0_policy'):
        return str(value)
    return float(value)


def _valid_code(kind_cls, value) -> bool:
    try:
        kind_cls.from_code(value)
        return True
    except ValidationError:
        return False


def load_scenario_file(path: Union[str, Path]) -> Dict[str, List[Any]]:
    """扁平 key = value 文本；# 起注释，重复键或逗号分隔的值组成网格轴"""
    mapping: Dict[str, List[Any]] = {}
    violations = []
    with open(path, 'r', encoding='utf-8') as f:
        for number, line in enumerate(f, 1):
            text = line.split('#', 1)[0].strip()
            if not text:
                continue
            key, sep, raw = text.partition('=')
            if not sep or not key.strip():
                violations.append(f"第 {number} 行: 缺少 key = value 形式")
                continue
            values = [DataConverter.parse_scalar(v) for v in raw.split(',') if v.strip()]
            mapping.setdefault(key.strip(), []).extend(values)
    if violations:
        raise ConfigError(f"场景文件格式错误: {path}", violations=violations)
    return mapping


# ---------------------------------------------------------------- registry

@dataclass(frozen=True)
class ScenarioSpec:
    description: str
    runner: Callable[['Scenario', 'RunContext'], Iterator[Tuple[str, pd.DataFrame]]]
    defaults: Dict[str, Any]
    quick: Dict[str, Any]


@dataclass(frozen=True)
class RunContext:
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    write_xlsx: bool = False
    float_format: str = "%.12g"


def _phi_tag(phi: float) -> str:
    return f"phi{phi:.4g}"


@lru_cache(maxsize=256)
def _cached_b0(mu: float, phi: float, model: GLZParams, cfg: IntegratorConfig) -> Tuple[float, bool]:
    """(b0(μ;φ), fallback)；无根时退回 1/μ"""
    try:
        return characteristic_b0(mu, phi, model, cfg).b0, False
    except NoRootError as e:
        logger.warning("b0 无根，使用 1/μ", mu=mu, phi=phi, scanned_min=e.scanned_min)
        return 1.0 / mu, True


def _control_estimate(s: Scenario, ctx: RunContext, dist: GapDistribution, phi: float,
                      model: GLZParams, b0: Optional[float] = None) -> Dict[str, Any]:
    """optimize = true 时做完整 b* 搜索，否则取 b* ≈ b0(μ)"""
    if s.optimize:
        found = optimize_bstar(dist, phi, model, n=s.n_samples, cfg=ctx.integrator,
                               ens_cfg=ctx.ensemble, b0=b0)
        result, b_star, fallback, b0 = found.p_star, found.b_star, found.fallback, found.b0
    else:
        fallback = False
        if b0 is None:
            b0, fallback = _cached_b0(dist.mu, phi, model, ctx.integrator)
        b_star = b0
        result = average_probability(dist, b0, phi, model, n=s.n_samples,
                                     cfg=ctx.integrator, ens_cfg=ctx.ensemble)
    return {
        'b_star': b_star,
        'b0': b0,
        'p_star': result.mean,
        'std_error': result.std_error,
        'fallback': fallback,
        'nonpositive_gaps': result.nonpositive_gaps,
    }


# ---------------------------------------------------------------- picklable grid tasks

def _surface_row(task) -> np.ndarray:
    model, a_grid, b, cfg = task
    return propagate_batch(model, a_grid, b, cfg).final_prob


def _cc_point(task) -> Optional[Tuple[float, float]]:
    a, phi, model, cfg = task
    try:
        point = characteristic_b0(a, phi, model, cfg)
    except NoRootError as e:
        logger.warning("特征曲线点缺失", a=a, phi=phi, scanned_min=e.scanned_min)
        return None
    return point.b0, point.residual


def _trajectory(task) -> pd.DataFrame:
    params, cfg = task
    frame = propagate(params, cfg, record=True).to_frame()
    frame.insert(0, 'b', params.b)
    frame.insert(0, 'a', params.a)
    return frame


# ---------------------------------------------------------------- runners

def run_surface(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """P(a, b) 网格与 b = 0、b → ∞ 两条边界曲线"""
    a_grid = np.asarray(s.a, dtype=float)
    for phi in s.phi:
        model = replace(s.model(), phi=phi)
        tasks = [(model, a_grid, float(b), ctx.integrator) for b in s.b]
        rows = map_tasks(_surface_row, tasks, ctx.ensemble)
        frame = pd.DataFrame({
            'a': np.tile(a_grid, len(s.b)),
            'b': np.repeat(np.asarray(s.b, dtype=float), a_grid.size),
            'P': np.concatenate(rows),
        })
        yield f"surface_{_phi_tag(phi)}", frame

    boundaries = pd.DataFrame({'a': a_grid, 'P_lz': np.exp(-math.pi * a_grid ** 2)})
    for phi in s.phi:
        boundaries[f"P_inf_{_phi_tag(phi)}"] = p_infinity(a_grid, phi)
    yield "boundaries", boundaries

    spot = GLZParams(a=0.5, b=2.0, phi=HALF_PI, sweep=s.model().sweep, T=s.T[0])
    yield "spot", pd.DataFrame([{'a': 0.5, 'b': 2.0, 'phi': HALF_PI,
                                 'P': propagate(spot, ctx.integrator).final_prob}])


def run_cc(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """特征曲线 b0(a;φ)"""
    model = s.model()
    for phi in s.phi:
        tasks = [(float(a), phi, model, ctx.integrator) for a in s.a]
        found = map_tasks(_cc_point, tasks, ctx.ensemble)
        rows = [{'a': a, 'b0': point[0], 'residual': point[1], 'inverse_a': 1.0 / a}
                for a, point in zip(s.a, found) if point is not None]
        yield f"cc_{_phi_tag(phi)}", pd.DataFrame(rows, columns=['a', 'b0', 'residual', 'inverse_a'])


def run_timedep(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """P(t) 轨迹以及末态概率随 b 的变化"""
    model = s.model()
    b_scan = np.linspace(0.0, s.b_scan_max, s.b_scan_points)
    for phi in s.phi:
        tasks = [(replace(model, a=a, b=b, phi=phi),
                  ctx.integrator) for a in s.a for b in s.b]
        frames = map_tasks(_trajectory, tasks, ctx.ensemble)
        yield f"trajectory_{_phi_tag(phi)}", pd.concat(frames, ignore_index=True)

        rows = map_tasks(_surface_row, [(replace(model, phi=phi), np.asarray(s.a, dtype=float), float(b),
                                         ctx.integrator) for b in b_scan], ctx.ensemble)
        yield f"final_vs_b_{_phi_tag(phi)}", pd.DataFrame({
            'a': np.tile(np.asarray(s.a, dtype=float), b_scan.size),
            'b': np.repeat(b_scan, len(s.a)),
            'P': np.concatenate(rows),
        })


def run_dirac(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """δ 脉冲极限闭式与 N(0, σ²) 系综平均"""
    a_grid = np.asarray(s.a, dtype=float)
    frame = pd.DataFrame({'a': a_grid, 'chi': chi(a_grid)})
    for phi in s.phi:
        frame[f"P_inf_{_phi_tag(phi)}"] = p_infinity(a_grid, phi)
    yield "p_infinity", frame

    sigmas = np.asarray(s.sigma, dtype=float)
    averages = pd.DataFrame({'sigma': sigmas, 'avg_plz': [avg_plz(0.0, v) for v in sigmas]})
    for phi in s.phi:
        averages[f"avg_{_phi_tag(phi)}"] = [p_infinity_average(v, phi) for v in sigmas]
        averages[f"series_{_phi_tag(phi)}"] = [p_infinity_average_series(v, phi) for v in sigmas]
    yield "ensemble", averages

    rows = []
    for phi in s.phi:
        try:
            sigma_star = dirac_crossover_sigma(phi)
        except NoRootError:
            sigma_star = math.nan
        rows.append({'phi': phi, 'sigma_star': sigma_star})
    yield "crossover", pd.DataFrame(rows)


def run_pstar_vs_sigma(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    model = s.model()
    rows = []
    for mu in s.mu:
        for sigma in s.sigma:
            for phi in s.phi:
                dist = GapDistribution(mu, sigma, s.seed)
                row = {'mu': mu, 'sigma': sigma, 'phi': phi}
                row.update(_control_estimate(s, ctx, dist, phi, model))
                row['avg_plz'] = avg_plz(mu, sigma)
                rows.append(row)
    yield "pstar_vs_sigma", pd.DataFrame(rows)


def run_pstar_vs_mu(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    model = s.model()
    rows = []
    for ratio in s.sigma_ratio:
        for mu in s.mu:
            for phi in s.phi:
                dist = GapDistribution(mu, ratio * mu, s.seed)
                row = {'mu': mu, 'sigma': dist.sigma, 'phi': phi}
                row.update(_control_estimate(s, ctx, dist, phi, model))
                row['avg_plz'] = avg_plz(mu, dist.sigma)
                rows.append(row)
    yield "pstar_vs_mu", pd.DataFrame(rows)


def run_area(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """固定 b = b0(μ) 的系综平均绝热偏离面积"""
    model = s.model()
    rows = []
    for ratio in s.sigma_ratio:
        for mu in s.mu:
            for phi in s.phi:
                dist = GapDistribution(mu, ratio * mu, s.seed)
                b0, fallback = _cached_b0(mu, phi, model, ctx.integrator)
                result = average_area(dist, phi, model, n=s.n_samples, cfg=ctx.integrator,
                                      ens_cfg=ctx.ensemble, b=b0)
                single = adiabaticity_area(replace(model, a=mu, b=b0, phi=phi), ctx.integrator)
                rows.append({'mu': mu, 'sigma': dist.sigma, 'phi': phi, 'b': b0, 'fallback': fallback,
                             'area_mean': result.mean, 'area_std_error': result.std_error,
                             'single_gap_area': single})
    yield "area", pd.DataFrame(rows)


def run_heatmap(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """σ × ε 网格；控制场按无误差脉冲设计"""
    mu = s.mu[0]
    base = s.model()
    for kind in s.error_kind:
        for phi in s.phi:
            b0, _ = _cached_b0(mu, phi, base, ctx.integrator)
            rows = []
            for sigma in s.sigma:
                for eps in s.epsilon:
                    model = s.model(error=ErrorModel(kind, eps))
                    dist = GapDistribution(mu, sigma, s.seed)
                    row = {'sigma': sigma, 'epsilon': eps}
                    row.update(_control_estimate(s, ctx, dist, phi, model, b0=b0))
                    rows.append(row)
            yield f"heatmap_k{kind}_{_phi_tag(phi)}", pd.DataFrame(rows)


def run_pulses(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """脉冲目录、面积/峰值检查以及各脉冲的 P*"""
    t_grid = np.linspace(-10.0, 10.0, 401)
    catalog = pd.DataFrame({'t': t_grid})
    for code, values in pulse_catalog(1.0, t_grid).items():
        catalog[code] = values
    yield "catalog", catalog

    shapes = []
    for code in s.pulse:
        shape = PulseShape(code, 2.0)
        area = pulse_area(shape)
        shapes.append({'pulse': code, 'b': 2.0, 'area': area, 'area_error': area - HALF_PI,
                       'peak': shape(0.0)})
    yield "shapes", pd.DataFrame(shapes)

    rows = []
    for code in s.pulse:
        model = s.model(pulse=code)
        for ratio in s.sigma_ratio:
            for mu in s.mu:
                for phi in s.phi:
                    dist = GapDistribution(mu, ratio * mu, s.seed)
                    row = {'pulse': code, 'mu': mu, 'sigma': dist.sigma, 'phi': phi}
                    row.update(_control_estimate(s, ctx, dist, phi, model))
                    rows.append(row)
    yield "pstar_by_pulse", pd.DataFrame(rows)


def run_sweeps(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """不同扫描函数与协议时间 T；b0 取当前 T 的值或 T 平均值，未指定 c 时 c = μ"""
    mu, sigma = s.mu[0], s.sigma[0]
    dist = GapDistribution(mu, sigma, s.seed)
    per_T, rows = [], []
    for sweep in s.sweep:
        for phi in s.phi:
            averaged = None
            if s.b0_policy == 't_averaged':
                averaged = characteristic_b0_t_averaged(mu, phi, s.model(sweep=sweep), s.T, ctx.integrator)
            for T in s.T:
                model = s.model(sweep=sweep, T=T)
                b0_T, _ = _cached_b0(mu, phi, model, ctx.integrator)
                per_T.append({'sweep': sweep, 'phi': phi, 'T': T, 'c': model.sweep.c, 'b0': b0_T})
                b0 = b0_T if averaged is None else averaged
                result = average_probability(dist, b0, phi, model, n=s.n_samples,
                                             cfg=ctx.integrator, ens_cfg=ctx.ensemble)
                rows.append({'sweep': sweep, 'T': T, 'phi': phi, 'mu': mu, 'sigma': sigma, 'c': model.sweep.c,
                             'b0_policy': s.b0_policy, 'b0': b0,
                             'P_mean': result.mean, 'std_error': result.std_error})
    yield "b0_vs_T", pd.DataFrame(per_T)
    yield "sweeps", pd.DataFrame(rows)


def run_identities(s: Scenario, ctx: RunContext) -> Iterator[Tuple[str, pd.DataFrame]]:
    """对称性与交叉验证的随机抽样记录：lhs、rhs 及其差"""
    rng = np.random.default_rng(s.seed)
    cfg = ctx.integrator
    rows = []

    def record(identity, lhs, rhs, **params):
        rows.append({'identity': identity, 'lhs': lhs, 'rhs': rhs, 'abs_diff': abs(lhs - rhs),
                     'params': DataConverter.to_jsonable(params)})

    for _ in range(s.checks):
        a, t_f = float(rng.uniform(0.2, 1.5)), float(rng.uniform(2.0, 6.0))
        U_minus, U_plus = half_window_pair(a, t_f, cfg)
        record('half_window_A', U_minus.A, U_plus.A.conjugate(), a=a, t_f=t_f)
        record('half_window_B', U_minus.B, U_plus.B, a=a, t_f=t_f)
        full = compose(U_plus, U_minus)
        record('symmetric_window', full.A, 2.0 * abs(U_plus.A) ** 2 - 1.0, a=a, t_f=t_f)

        pcf = pcf_lz_propagator(a, t_f, -t_f)
        numeric = raw_propagator(a, -t_f, t_f, cfg=cfg)
        record('pcf_oracle', 0.0, pcf.max_abs_diff(numeric), a=a, t_f=t_f)

        b, phi = float(rng.uniform(0.5, 4.0)), float(rng.uniform(0.0, math.pi))
        forward = propagate(GLZParams(a=a, b=b, phi=phi), cfg).final_prob
        mirrored = propagate(GLZParams(a=-a, b=-b, phi=phi), cfg).final_prob
        record('p_symmetry', forward, mirrored, a=a, b=b, phi=phi)

        record('delta_kick', delta_kick_probability(a, phi, 20.0, cfg), p_infinity(a, phi), a=a, phi=phi)

    for b in (0.5, 2.0, 8.0):
        reference = propagate(GLZParams(a=0.0, b=b, phi=HALF_PI), cfg).final_prob
        for phi in (0.0, math.pi / 4):
            record('angle_independence', propagate(GLZParams(a=0.0, b=b, phi=phi), cfg).final_prob,
                   reference, b=b, phi=phi)

    frame = pd.DataFrame(rows)
    for column in ('lhs', 'rhs'):
        values = frame[column].to_numpy(dtype=complex)
        frame[f"{column}_re"] = values.real
        frame[f"{column}_im"] = values.imag
    frame['params'] = frame['params'].map(lambda p: ';'.join(f"{k}={v:.12g}" for k, v in p.items()))
    yield "identities", frame[['identity', 'params', 'lhs_re', 'lhs_im', 'rhs_re', 'rhs_im', 'abs_diff']]


def _grid(start: float, stop: float, num: int) -> List[float]:
    return [round(float(v), 12) for v in np.linspace(start, stop, num)]


REGISTRY: Dict[str, ScenarioSpec] = {
    'surface': ScenarioSpec(
        "P(a,b) 曲面与边界曲线", run_surface,
        {'a': _grid(0, 3, 31), 'b': _grid(0, 8, 33)},
        {'a': _grid(0, 3, 13), 'b': _grid(0, 8, 17)}),
    'cc': ScenarioSpec(
        "特征曲线 b0(a;φ)", run_cc,
        {'a': _grid(0.1, 1.9, 19), 'phi': [0.0, math.pi / 4, HALF_PI]},
        {'a': [0.25, 0.5, 1.0, 1.5], 'phi': [0.0, HALF_PI]}),
    'timedep': ScenarioSpec(
        "P(t) 轨迹与末态概率随 b 变化", run_timedep,
        {'a': [0.5], 'b': [0.0, 1.0, 2.0, 4.0]},
        {'a': [0.5], 'b': [0.0, 2.0], 'b_scan_points': 33}),
    'dirac': ScenarioSpec(
        "δ 脉冲极限闭式与高斯系综平均", run_dirac,
        {'a': _grid(0, 5, 101), 'sigma': _grid(0.05, 3, 60), 'phi': [0.0, math.pi / 4, HALF_PI]},
        {'a': _grid(0, 5, 51), 'sigma': _grid(0.05, 3, 30)}),
    'pstar-vs-sigma': ScenarioSpec(
        "P* 随 σ 的变化", run_pstar_vs_sigma,
        {'mu': [0.5], 'sigma': [0.02, 0.04, 0.06, 0.08, 0.1]},
        {'mu': [0.5], 'sigma': [0.04, 0.1], 'n_samples': 256}),
    'pstar-vs-mu': ScenarioSpec(
        "P* 随 μ 的变化（σ = μ/5）", run_pstar_vs_mu,
        {'mu': _grid(0.2, 1.8, 9)},
        {'mu': [0.3, 0.5, 1.0], 'n_samples': 256}),
    'area': ScenarioSpec(
        "系综平均绝热偏离面积", run_area,
        {'mu': _grid(0.2, 1.8, 9)},
        {'mu': [0.5, 1.0], 'n_samples': 128}),
    'heatmap': ScenarioSpec(
        "脉冲误差 σ × ε 热图", run_heatmap,
        {'mu': [0.5], 'sigma': [0.02, 0.05, 0.1], 'error_kind': [1, 2, 3],
         'epsilon': _grid(-0.2, 0.2, 5), 'n_samples': 500},
        {'sigma': [0.05, 0.1], 'error_kind': [1, 2], 'epsilon': [-0.2, 0.0, 0.2],
         'phi': [HALF_PI], 'n_samples': 128}),
    'pulses': ScenarioSpec(
        "脉冲形状目录与各形状的 P*", run_pulses,
        {'pulse': ['L', 'g', 's', 'r', 't'], 'mu': [0.3, 0.45, 0.6], 'phi': [HALF_PI]},
        {'pulse': ['L', 's'], 'mu': [0.3, 0.6], 'n_samples': 128}),
    'sweeps': ScenarioSpec(
        "扫描函数与协议时间 T", run_sweeps,
        {'sweep': ['Lin', 'Tan'], 'T': [5.0, 7.5, 10.0, 15.0, 20.0], 'mu': [0.5], 'sigma': [0.1],
         'n_samples': 500},
        {'T': [5.0, 10.0], 'phi': [HALF_PI], 'n_samples': 128}),
    'identities': ScenarioSpec(
        "解析恒等式与交叉验证", run_identities,
        {'checks': 10},
        {'checks': 3}),
}


def build_scenario(name: str, mapping: Optional[Dict[str, Any]] = None,
                   overrides: Optional[Dict[str, Any]] = None, quick: bool = False) -> Scenario:
    """优先级：命令行 > 场景文件 > 场景默认值"""
    if name not in REGISTRY:
        raise ConfigError(f"未注册的场景: {name}", violations=[f"name: 未注册的场景 {name}"],
                          field='name', value=name)
    merged: Dict[str, Any] = dict(REGISTRY[name].defaults)
    if quick:
        merged.update(REGISTRY[name].quick)
    merged.update(mapping or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    scenario = Scenario.from_mapping(name, merged)
    scenario.validate()
    return scenario


# ---------------------------------------------------------------- execution

def ensure_writable(directory: Union[str, Path]) -> Path:
    """输出目录必须可写；失败时不留下任何文件"""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise ConfigError(f"无法创建输出目录: {directory}", violations=[f"output: {e}"],
                          field='output', value=str(directory))
    if not os.access(directory, os.W_OK | os.X_OK):
        raise ConfigError(f"输出目录不可写: {directory}", violations=[f"output: {directory} 不可写"],
                          field='output', value=str(directory))
    return directory


def run_scenario(s: Scenario, ctx: Optional[RunContext] = None,
                 out_root: Optional[Union[str, Path]] = None) -> Dict[str, Any]:
    """运行单个场景，返回清单；失败时删除已写出的部分结果"""
    ctx = ctx or RunContext()
    s.validate()
    root = ensure_writable(out_root or s.output)
    out_dir = root / s.name
    created = not out_dir.exists()

    operation_index = logger.start_operation("运行场景", scenario=s.name, seed=s.seed)
    logger.set_context(scenario=s.name)
    written: List[Path] = []
    entries: List[Dict[str, Any]] = []
    frames: Dict[str, pd.DataFrame] = {}
    started = time.perf_counter()

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        panel_start = time.perf_counter()
        for panel, frame in REGISTRY[s.name].runner(s, ctx):
            path = out_dir / f"{panel}.csv"
            header = {'scenario': s.name, 'panel': panel, 'seed': s.seed,
                      'n_samples': s.n_samples, 'params': s.echo()}
            write_tidy_csv(frame, path, header, ctx.float_format)
            written.append(path)
            frames[panel] = frame
            elapsed = time.perf_counter() - panel_start
            entries.append({'file': path.name, 'rows': len(frame),
                            'sha256': file_sha256(path), 'wall_time': elapsed})
            logger.info("面板已写出", panel=panel, rows=len(frame), seconds=f"{elapsed:.2f}")
            panel_start = time.perf_counter()

        if ctx.write_xlsx:
            workbook = out_dir / f"{s.name}.xlsx"
            if safe_execute(export_workbook, frames, workbook, default_return=None,
                            logger_name="scenario_manager") is not None:
                written.append(workbook)
                entries.append({'file': workbook.name, 'rows': None, 'sha256': None, 'wall_time': None})

        manifest = {
            'scenario': s.name,
            'status': 'ok',
            'seed': s.seed,
            'n_samples': s.n_samples,
            'params': s.echo(),
            'sweep_c': s.sweep_shape(s.mu[0]),
            'files': entries,
            'wall_time': time.perf_counter() - started,
        }
        write_json(manifest, out_dir / 'manifest.json')
        logger.end_operation(operation_index, success=True, files=len(entries))
        return manifest

    except Exception as e:
        logger.error("场景运行失败，删除部分结果", error=str(e), include_traceback=True)
        for path in written:
            safe_execute(path.unlink, default_return=None, logger_name="scenario_manager")
        if created:
            safe_execute(shutil.rmtree, out_dir, default_return=None, logger_name="scenario_manager")
        logger.end_operation(operation_index, success=False, error=str(e))
        raise
    finally:
        logger.clear_context()


def run_all(seed: int, out_root: Union[str, Path], ctx: Optional[RunContext] = None,
            quick: bool = True, names: Optional[List[str]] = None,
            overrides: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """依次运行全部注册场景，单个场景失败不会中断后续场景"""
    ctx = ctx or RunContext()
    root = ensure_writable(out_root)
    handler = ErrorHandler("scenario_manager")
    operation_index = logger.start_operation("运行全部场景", seed=seed, quick=quick)
    started = time.perf_counter()
    summary = []

    for name in names or SCENARIO_NAMES:
        entry: Dict[str, Any] = {'scenario': name}
        try:
            params = dict(overrides or {})
            params['seed'] = seed
            scenario = build_scenario(name, overrides=params, quick=quick)
            manifest = run_scenario(scenario, ctx, root)
            entry.update(status='ok', files=manifest['files'], wall_time=manifest['wall_time'])
        except Exception as e:
            info = handler.handle_error(e, context=f"场景 {name}")
            entry.update(status='failed', error=info['user_message'])
        summary.append(entry)

    failed = [entry['scenario'] for entry in summary if entry['status'] != 'ok']
    manifest = {
        'seed': seed,
        'quick': quick,
        'scenarios': summary,
        'failed': failed,
        'wall_time': time.perf_counter() - started,
    }
    write_json(manifest, root / 'manifest.json')
    logger.end_operation(operation_index, success=not failed, failed=len(failed))
    return manifest


if __name__ == '__main__':
    print("=== 场景管理器测试 ===")
    for name, spec in REGISTRY.items():
        print(f"{name}: {spec.description}")
