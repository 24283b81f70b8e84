#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
随机能隙系综
能隙采样、跃迁概率的 Monte Carlo 平均、特征曲线 b0(a;φ) 求根、
最优控制耦合 b* 搜索以及系综平均的绝热偏离面积

随机数按块派生：第 j 块使用 SeedSequence(seed).spawn(k)[j]，
因此某个样本序号得到的能隙与进程数无关。
"""

import json
import math
import os
from dataclasses import dataclass, field, replace
from multiprocessing import Pool
from typing import Any, Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np
from scipy import optimize

from enhanced_logger import get_logger
from error_handler import IntegrationError, NoRootError, ValidationError
from config_manager import EnsembleConfig, IntegratorConfig
from glz_models import GLZParams
from propagator import propagate_batch

logger = get_logger("ensemble_average")

ROOT_TOLERANCE = 1e-6
TRUSTED_GAP_LIMIT = 2.0
SCAN_POINTS = 24


@dataclass(frozen=True)
class GapDistribution:
    """能隙 a ~ N(μ, σ²)"""
    mu: float
    sigma: float
    seed: int = 20240501

    def __post_init__(self):
        if not math.isfinite(self.mu):
            raise ValidationError("μ 必须有限", "mu", self.mu)
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError("σ 必须为非负有限数", "sigma", self.sigma)

    @property
    def sigma_max(self) -> Optional[float]:
        return self.mu / 5.0 if self.mu > 0 else None

    @property
    def within_envelope(self) -> bool:
        return self.mu > 0 and self.sigma <= self.mu / 5.0

    def echo(self) -> Dict[str, Any]:
        return {'mu': self.mu, 'sigma': self.sigma, 'seed': self.seed}


@dataclass
class EnsembleResult:
    """系综平均结果"""
    mean: float
    std_error: float
    n_samples: int
    seed: int
    values: Optional[np.ndarray] = None
    params: Dict[str, Any] = field(default_factory=dict)
    nonpositive_gaps: int = 0

    @classmethod
    def from_values(cls, values: np.ndarray, dist: GapDistribution,
                    params: Dict[str, Any], keep_values: bool = False) -> 'EnsembleResult':
        n = values.size
        std = float(np.std(values, ddof=1)) if n > 1 else 0.0
        return cls(
            mean=float(np.mean(values)),
            std_error=std / math.sqrt(n),
            n_samples=n,
            seed=dist.seed,
            values=values if keep_values else None,
            params=params,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            'mean': self.mean,
            'std_error': self.std_error,
            'n_samples': self.n_samples,
            'seed': self.seed,
            'nonpositive_gaps': self.nonpositive_gaps,
            'params': self.params,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), ensure_ascii=False, indent=2)


@dataclass(frozen=True)
class CharacteristicPoint:
    """特征曲线上的一点，residual 为根处的 P"""
    a: float
    b0: float
    phi: float
    residual: float


class BStarResult(NamedTuple):
    b_star: float
    p_star: EnsembleResult
    fallback: bool
    b0: float


# ---------------------------------------------------------------- sampling

def _block_sizes(n: int, block_size: int) -> List[int]:
    full, rest = divmod(n, block_size)
    return [block_size] * full + ([rest] if rest else [])


def _check_samples(n: int, minimum: int = 1):
    if n is None or n < minimum:
        raise ValidationError(f"样本数至少为 {minimum}", "n", n)


def sample_gaps(dist: GapDistribution, n: int, block_size: int = 256) -> np.ndarray:
    """n 个 N(μ, σ²) 能隙；同一种子在任意进程数下给出相同序列"""
    _check_samples(n)
    sizes = _block_sizes(n, block_size)
    children = np.random.SeedSequence(dist.seed).spawn(len(sizes))
    gaps = np.concatenate([
        dist.mu + dist.sigma * np.random.default_rng(child).standard_normal(size)
        for child, size in zip(children, sizes)
    ])

    nonpositive = int(np.count_nonzero(gaps <= 0)) if dist.mu > 0 else 0
    if nonpositive or (dist.mu > 0 and not dist.within_envelope):
        logger.log_envelope_violation(dist.mu, dist.sigma, nonpositive)
    return gaps


# ---------------------------------------------------------------- block evaluation

def _locate_failure(template: GLZParams, start: int, gaps: np.ndarray, b: float,
                    cfg: IntegratorConfig, record: bool) -> np.ndarray:
    """整块积分失败时逐个成员重算，定位出错样本"""
    values = np.empty(gaps.size)
    for k, a in enumerate(gaps):
        try:
            batch = propagate_batch(template, a, b, cfg, record=record)
        except IntegrationError as e:
            e.details.update(sample_index=start + k, a=float(a), b=b, phi=template.phi)
            raise
        values[k] = batch.area[0] if record else batch.final_prob[0]
    return values


def _block_task(task) -> np.ndarray:
    template, start, gaps, b, cfg, record = task
    try:
        batch = propagate_batch(template, gaps, b, cfg, record=record)
    except IntegrationError:
        return _locate_failure(template, start, gaps, b, cfg, record)
    return batch.area if record else batch.final_prob


def _worker_count(ens_cfg: EnsembleConfig, tasks: int) -> int:
    if ens_cfg.serial or tasks <= 1:
        return 1
    workers = ens_cfg.workers or os.cpu_count() or 1
    return max(1, min(workers, tasks))


def map_tasks(func: Callable, tasks: Sequence, ens_cfg: EnsembleConfig) -> list:
    """按任务顺序返回结果；串行模式或单任务时不启动进程池"""
    workers = _worker_count(ens_cfg, len(tasks))
    if workers == 1:
        return list(map(func, tasks))
    with Pool(processes=workers) as pool:
        return pool.map(func, tasks)


def evaluate_members(template: GLZParams, gaps: np.ndarray, b: float,
                     cfg: IntegratorConfig, ens_cfg: EnsembleConfig,
                     record: bool = False, label: str = "ensemble") -> np.ndarray:
    """按块传播全部成员；结果按样本序号拼接，串行与并行逐位一致"""
    tasks = []
    start = 0
    for size in _block_sizes(gaps.size, ens_cfg.block_size):
        tasks.append((template, start, gaps[start:start + size], float(b), cfg, record))
        start += size

    blocks = map_tasks(_block_task, tasks, ens_cfg)
    logger.log_ensemble_progress(label, gaps.size, gaps.size)
    return np.concatenate(blocks)


def _ensemble_params(dist: GapDistribution, template: GLZParams, b: float) -> Dict[str, Any]:
    params = template.with_control(b).echo()
    params.pop('a')
    params.update(dist.echo())
    return params


def _summarize(values: np.ndarray, gaps: np.ndarray, dist: GapDistribution,
               template: GLZParams, b: float, keep_values: bool) -> EnsembleResult:
    result = EnsembleResult.from_values(values, dist, _ensemble_params(dist, template, b), keep_values)
    result.nonpositive_gaps = int(np.count_nonzero(gaps <= 0)) if dist.mu > 0 else 0
    return result


def average_probability(dist: GapDistribution, b: float, phi: float, model: GLZParams,
                        n: Optional[int] = None, cfg: Optional[IntegratorConfig] = None,
                        ens_cfg: Optional[EnsembleConfig] = None,
                        keep_values: bool = False) -> EnsembleResult:
    """<P(a, b; φ)>_a，b、φ、脉冲、扫描与 T 固定"""
    cfg = cfg or IntegratorConfig()
    ens_cfg = ens_cfg or EnsembleConfig()
    n = ens_cfg.samples if n is None else n
    _check_samples(n)

    template = replace(model, a=dist.mu, b=b, phi=phi)
    gaps = sample_gaps(dist, n, ens_cfg.block_size)
    values = evaluate_members(template, gaps, b, cfg, ens_cfg, label="average_probability")
    return _summarize(values, gaps, dist, template, b, keep_values)


# ---------------------------------------------------------------- characteristic curve

def _signed_amplitude(template: GLZParams, a: float, b, cfg: IntegratorConfig) -> np.ndarray:
    """对称窗口上 <e(1)|ψ(1)> 为实数，其符号在 b0 处翻转"""
    return propagate_batch(template, a, b, cfg).amplitude


def _root_point(template: GLZParams, a: float, phi: float, lo: float, hi: float,
                cfg: IntegratorConfig) -> Optional[CharacteristicPoint]:
    def f(b):
        return float(_signed_amplitude(template, a, b, cfg)[0].real)

    b0 = optimize.brentq(f, lo, hi, xtol=1e-10, rtol=1e-10)
    residual = float(abs(_signed_amplitude(template, a, b0, cfg)[0]) ** 2)
    if residual > ROOT_TOLERANCE:
        return None
    return CharacteristicPoint(a=a, b0=b0, phi=phi, residual=residual)


def characteristic_b0(a: float, phi: float, model: GLZParams,
                      cfg: Optional[IntegratorConfig] = None) -> CharacteristicPoint:
    """P(a, b; φ) ≤ 1e-6 的最小 b > 0

    在 [1/(10a), 50/a] 的几何网格上批量扫描带符号振幅，先扫 b ≤ 4/a
    （包含初猜 1/a），取第一个变号区间用 Brent 法求根；
    无变号时退回到网格极小附近的有界最小化。
    """
    cfg = cfg or IntegratorConfig()
    if not a > 0:
        raise ValidationError("特征曲线要求 a > 0", "a", a)
    if a >= TRUSTED_GAP_LIMIT:
        logger.warning("a 超出可信区间，b0 可能多值", a=a, limit=TRUSTED_GAP_LIMIT)

    template = replace(model, a=a, b=1.0 / a, phi=phi)
    bracket = (0.1 / a, 50.0 / a)
    scanned_b: List[np.ndarray] = []
    scanned_p: List[np.ndarray] = []

    for lo, hi in ((bracket[0], 4.0 / a), (4.0 / a, bracket[1])):
        grid = np.geomspace(lo, hi, SCAN_POINTS)
        amplitude = _signed_amplitude(template, a, grid, cfg)
        scanned_b.append(grid)
        scanned_p.append(np.abs(amplitude) ** 2)

        signed = amplitude.real
        for k in np.nonzero(signed[:-1] * signed[1:] <= 0)[0]:
            point = _root_point(template, a, phi, grid[k], grid[k + 1], cfg)
            if point is not None:
                return point

    b_all = np.concatenate(scanned_b)
    p_all = np.concatenate(scanned_p)
    k = int(np.argmin(p_all))
    lo, hi = b_all[max(k - 1, 0)], b_all[min(k + 1, b_all.size - 1)]
    found = optimize.minimize_scalar(
        lambda b: float(abs(_signed_amplitude(template, a, b, cfg)[0]) ** 2),
        bounds=(lo, hi), method='bounded', options={'xatol': 1e-8})
    if found.fun <= ROOT_TOLERANCE:
        return CharacteristicPoint(a=a, b0=float(found.x), phi=phi, residual=float(found.fun))

    raise NoRootError("特征曲线在搜索区间内无根",
                      scanned_min=float(min(found.fun, p_all.min())), bracket=bracket,
                      details={'a': a, 'phi': phi})


def characteristic_curve(a_values: Sequence[float], phi: float, model: GLZParams,
                         cfg: Optional[IntegratorConfig] = None) -> List[CharacteristicPoint]:
    """逐点求 b0(a;φ)；无根的 a 记录警告后跳过"""
    points = []
    for a in a_values:
        try:
            points.append(characteristic_b0(float(a), phi, model, cfg))
        except NoRootError as e:
            logger.warning("特征曲线点缺失", a=a, phi=phi, scanned_min=e.scanned_min)
    return points


def characteristic_b0_t_averaged(a: float, phi: float, model: GLZParams,
                                 T_values: Sequence[float],
                                 cfg: Optional[IntegratorConfig] = None) -> float:
    """有限 T 下 b0 随 T 振荡，取 T 网格上的平均值"""
    if len(T_values) == 0:
        raise ValidationError("T 网格不能为空", "T_values", T_values)
    roots = [characteristic_b0(a, phi, replace(model, a=a, T=float(T)), cfg).b0
             for T in T_values]
    return float(np.mean(roots))


# ---------------------------------------------------------------- optimal coupling

def _b0_guess(dist: GapDistribution, phi: float, model: GLZParams, cfg: IntegratorConfig) -> float:
    try:
        return characteristic_b0(dist.mu, phi, model, cfg).b0
    except NoRootError as e:
        logger.warning("b0(μ) 无根，使用初猜 1/μ", mu=dist.mu, scanned_min=e.scanned_min)
        return 1.0 / dist.mu


def optimize_bstar(dist: GapDistribution, phi: float, model: GLZParams,
                   n: Optional[int] = None, cfg: Optional[IntegratorConfig] = None,
                   ens_cfg: Optional[EnsembleConfig] = None,
                   b0: Optional[float] = None) -> BStarResult:
    """b* = argmin_b <P(a, b)>_a

    所有目标函数求值共用同一组能隙样本。先在 (b0/2, b0, 2b0) 上检查括号，
    不成立时改用 9 点网格；仍失败则返回 b0 并置 fallback。
    """
    cfg = cfg or IntegratorConfig()
    ens_cfg = ens_cfg or EnsembleConfig()
    n = ens_cfg.samples if n is None else n
    if not dist.mu > 0:
        raise ValidationError("b* 搜索要求 μ > 0", "mu", dist.mu)
    _check_samples(n, minimum=100)

    op = logger.start_operation("optimize_bstar", mu=dist.mu, sigma=dist.sigma, phi=phi, n=n)
    b0 = _b0_guess(dist, phi, model, cfg) if b0 is None else b0
    template = replace(model, a=dist.mu, b=b0, phi=phi)
    gaps = sample_gaps(dist, n, ens_cfg.block_size)
    cache: Dict[float, EnsembleResult] = {}

    def evaluate(b: float) -> EnsembleResult:
        key = float(b)
        if key not in cache:
            values = evaluate_members(template, gaps, key, cfg, ens_cfg, label="optimize_bstar")
            cache[key] = _summarize(values, gaps, dist, template, key, False)
        return cache[key]

    def objective(b: float) -> float:
        return evaluate(b).mean

    bracket = (0.5 * b0, b0, 2.0 * b0)
    if not objective(bracket[1]) < min(objective(bracket[0]), objective(bracket[2])):
        grid = np.geomspace(0.5 * b0, 2.0 * b0, 9)
        k = int(np.argmin([objective(b) for b in grid]))
        bracket = (grid[k - 1], grid[k], grid[k + 1]) if 0 < k < grid.size - 1 else None

    if bracket is None:
        logger.warning("b* 括号失败，退回 b0(μ)", mu=dist.mu, sigma=dist.sigma, phi=phi, b0=b0)
        logger.end_operation(op, success=False, fallback=True)
        return BStarResult(b_star=b0, p_star=evaluate(b0), fallback=True, b0=b0)

    found = optimize.minimize_scalar(objective, bracket=bracket, method='golden', tol=1e-3)
    b_star = float(found.x)
    logger.end_operation(op, success=True, b_star=b_star, evaluations=len(cache))
    return BStarResult(b_star=b_star, p_star=evaluate(b_star), fallback=False, b0=b0)


def average_area(dist: GapDistribution, phi: float, model: GLZParams,
                 n: Optional[int] = None, cfg: Optional[IntegratorConfig] = None,
                 ens_cfg: Optional[EnsembleConfig] = None,
                 b: Optional[float] = None) -> EnsembleResult:
    """单一控制场 b = b0(μ) 下绝热偏离面积的系综平均"""
    cfg = cfg or IntegratorConfig()
    ens_cfg = ens_cfg or EnsembleConfig()
    n = ens_cfg.samples if n is None else n
    _check_samples(n)
    if b is None:
        if not dist.mu > 0:
            raise ValidationError("未指定 b 时要求 μ > 0", "mu", dist.mu)
        b = _b0_guess(dist, phi, model, cfg)

    template = replace(model, a=dist.mu, b=b, phi=phi)
    gaps = sample_gaps(dist, n, ens_cfg.block_size)
    values = evaluate_members(template, gaps, b, cfg, ens_cfg, record=True, label="average_area")
    return _summarize(values, gaps, dist, template, b, False)


if __name__ == '__main__':
    print("=== 系综平均模块测试 ===")
    serial = EnsembleConfig(serial=True)
    model = GLZParams(a=0.5)
    dist = GapDistribution(0.5, 0.1, seed=42)
    result = average_probability(dist, 0.0, math.pi / 2, model, n=256, ens_cfg=serial)
    print(f"<P>(b=0) = {result.mean:.4f} ± {result.std_error:.4f}")
    point = characteristic_b0(0.5, math.pi / 2, model)
    print(f"b0(0.5; π/2) = {point.b0:.6f}, residual = {point.residual:.2e}")
