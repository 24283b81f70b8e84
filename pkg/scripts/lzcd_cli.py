#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
命令行入口
simulate / sweep / cc / optimize / dirac / average / scenario / all 子命令，
全局参数 --seed --samples --out --rtol --serial 覆盖配置文件
"""

import argparse
import math
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Tuple

import numpy as np
import pandas as pd

from enhanced_logger import EnhancedLogger
from error_handler import ConfigError, ErrorHandler, LabError, NoRootError, error_handler_decorator
from config_manager import AppConfig, ConfigManager, get_config_manager
from data_utils import DataConverter, DataFormatter, TableFormatter, write_json, write_tidy_csv
from glz_models import ErrorModel, GLZParams, SweepSpec
from propagator import propagate, propagate_batch
from special_functions import avg_plz, chi, dirac_crossover_sigma, p_infinity
from ensemble_average import (
    GapDistribution, average_probability, characteristic_curve, optimize_bstar,
)
from scenario_manager import (
    REGISTRY, RunContext, build_scenario, ensure_writable, load_scenario_file,
    run_all, run_scenario,
)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2


def angle(text: str) -> float:
    """角度参数，支持 pi/2、0.25pi 等写法"""
    value = DataConverter.parse_scalar(text)
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise argparse.ArgumentTypeError(f"无法解析角度: {text}")
    return float(value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="反绝热 Landau-Zener 随机能隙数值实验")
    parser.add_argument("--seed", type=int, help="随机种子")
    parser.add_argument("--samples", type=int, help="系综样本数")
    parser.add_argument("--out", help="输出目录")
    parser.add_argument("--rtol", type=float, help="积分相对容差")
    parser.add_argument("--serial", action="store_true", help="串行参考模式（不启动进程池）")
    parser.add_argument("--workers", type=int, help="并行进程数（0 表示 CPU 核数）")
    parser.add_argument("--xlsx", action="store_true", help="同时导出 Excel 工作簿")
    parser.add_argument("--config", help="应用配置文件 (JSON)")
    parser.add_argument("--log-level", default=None,
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
                        help="日志级别")
    parser.add_argument("--export-report", action="store_true", help="导出详细报告")

    sub = parser.add_subparsers(dest="command", required=True)

    def add_model_args(p):
        p.add_argument("--phi", type=angle, default=math.pi / 2, help="控制场方向 φ")
        p.add_argument("--pulse", default="L", help="脉冲代码 L/g/s/r/t")
        p.add_argument("--sweep", default="Lin", help="扫描函数 Lin/Tan")
        p.add_argument("--c", type=float, default=1.0, help="Tan 扫描形状参数")
        p.add_argument("--T", type=float, default=10.0, help="协议时间")
        p.add_argument("--error-kind", type=int, help="脉冲误差类型 1/2/3")
        p.add_argument("--epsilon", type=float, default=0.0, help="误差幅度 ε")

    p = sub.add_parser("simulate", help="单组参数传播")
    p.add_argument("--a", type=float, required=True)
    p.add_argument("--b", type=float, default=0.0)
    p.add_argument("--record", action="store_true", help="写出 P(t) 轨迹")
    add_model_args(p)

    p = sub.add_parser("sweep", help="(a, b) 网格上的跃迁概率")
    p.add_argument("--a-values", type=float, nargs="+", required=True)
    p.add_argument("--b-values", type=float, nargs="+", required=True)
    add_model_args(p)

    p = sub.add_parser("cc", help="特征曲线 b0(a;φ)")
    p.add_argument("--a-values", type=float, nargs="+", required=True)
    add_model_args(p)

    p = sub.add_parser("optimize", help="最优控制耦合 b*")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    add_model_args(p)

    p = sub.add_parser("dirac", help="δ 脉冲极限闭式")
    p.add_argument("--a-values", type=float, nargs="+", default=[0.5, 1.0, 2.0])
    p.add_argument("--phi-values", type=angle, nargs="+", default=[0.0, math.pi / 4, math.pi / 2])

    p = sub.add_parser("average", help="固定 b 的系综平均跃迁概率")
    p.add_argument("--mu", type=float, required=True)
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--b", type=float, default=0.0)
    add_model_args(p)

    p = sub.add_parser("scenario", help="运行单个注册场景")
    p.add_argument("name", choices=sorted(REGISTRY))
    p.add_argument("--scenario-file", help="扁平 key = value 场景文件")
    p.add_argument("--quick", action="store_true", help="使用缩小的网格")
    p.add_argument("--optimize", action="store_true", help="完整 b* 搜索代替 b* ≈ b0(μ)")

    p = sub.add_parser("all", help="运行全部注册场景")
    p.add_argument("--full", action="store_true", help="使用完整网格（默认缩小网格）")
    return parser


def build_context(args) -> Tuple[AppConfig, RunContext]:
    """命令行参数覆盖配置文件与环境变量"""
    if args.config:
        manager = ConfigManager(args.config)
        manager.apply_env_overrides()
    else:
        manager = get_config_manager()

    updates: Dict[str, Any] = {}
    for key, value in (('rtol', args.rtol), ('samples', args.samples), ('seed', args.seed),
                       ('workers', args.workers), ('output_dir', args.out)):
        if value is not None:
            updates[key] = value
    if args.serial:
        updates['serial'] = True
    if args.xlsx:
        updates['write_xlsx'] = True
    if updates:
        manager.update_config(**updates)

    errors = manager.collect_errors()
    if errors:
        raise ConfigError("配置验证失败", violations=errors)

    config = manager.get_config()
    ctx = RunContext(
        integrator=config.integrator,
        ensemble=config.ensemble,
        write_xlsx=config.output.write_xlsx,
        float_format=config.output.float_format,
    )
    return config, ctx


def model_from_args(args, a: float = 0.5, b: float = 0.0) -> GLZParams:
    error = ErrorModel(args.error_kind, args.epsilon) if args.error_kind else None
    return GLZParams(a=a, b=b, phi=args.phi, pulse=args.pulse,
                     sweep=SweepSpec(kind=args.sweep, c=args.c), T=args.T, error=error)


def _output_dir(config: AppConfig, command: str) -> Path:
    return ensure_writable(Path(config.output.output_dir) / command)


@error_handler_decorator("lzcd_cli", "simulate")
def cmd_simulate(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    params = model_from_args(args, args.a, args.b)
    record = propagate(params, ctx.integrator, record=args.record)
    print(f"P = {DataFormatter.format_probability(record.final_prob, 8)}"
          f"  (最大范数偏差 {record.max_norm_error:.2e})")
    if args.record:
        path = _output_dir(config, "simulate") / "trajectory.csv"
        write_tidy_csv(record.to_frame(), path, {'command': 'simulate', 'params': params.echo()},
                       ctx.float_format)
        print(f"max P(t) = {record.max_prob:.3e}, 面积 = {record.area:.3e}")
        print(f"轨迹已保存到: {path}")
    return EXIT_OK


@error_handler_decorator("lzcd_cli", "sweep")
def cmd_sweep(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    model = model_from_args(args, args.a_values[0])
    a_values = np.asarray(args.a_values, dtype=float)
    rows = [propagate_batch(model, a_values, b, ctx.integrator).final_prob for b in args.b_values]
    frame = pd.DataFrame({
        'a': np.tile(a_values, len(args.b_values)),
        'b': np.repeat(np.asarray(args.b_values, dtype=float), a_values.size),
        'P': np.concatenate(rows),
    })
    path = _output_dir(config, "sweep") / "sweep.csv"
    write_tidy_csv(frame, path, {'command': 'sweep', 'params': model.echo()}, ctx.float_format)
    logger.info("网格计算完成", points=len(frame), file=str(path), is_success=True)
    print(f"结果已保存到: {path}")
    return EXIT_OK


@error_handler_decorator("lzcd_cli", "cc")
def cmd_cc(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    model = model_from_args(args, args.a_values[0])
    points = characteristic_curve(args.a_values, args.phi, model, ctx.integrator)
    frame = pd.DataFrame([{'a': p.a, 'b0': p.b0, 'residual': p.residual} for p in points],
                         columns=['a', 'b0', 'residual'])
    path = _output_dir(config, "cc") / "cc.csv"
    write_tidy_csv(frame, path, {'command': 'cc', 'phi': args.phi, 'params': model.echo()},
                   ctx.float_format)
    print(TableFormatter.format_table(frame.to_dict('records'), ['a', 'b0', 'residual'],
                                      formatters={'residual': lambda v: f"{v:.2e}"},
                                      title="特征曲线"))
    return EXIT_OK


@error_handler_decorator("lzcd_cli", "optimize")
def cmd_optimize(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    model = model_from_args(args, args.mu)
    dist = GapDistribution(args.mu, args.sigma, config.ensemble.seed)
    found = optimize_bstar(dist, args.phi, model, n=config.ensemble.samples,
                           cfg=ctx.integrator, ens_cfg=ctx.ensemble)
    result = found.p_star.to_dict()
    result.update(b_star=found.b_star, b0=found.b0, fallback=found.fallback, avg_plz=avg_plz(args.mu, args.sigma))
    path = write_json(result, _output_dir(config, "optimize") / "optimize.json")
    flag = "（括号失败，已退回 b0）" if found.fallback else ""
    print(f"b* = {found.b_star:.6f}{flag}, P* = {DataFormatter.format_estimate(found.p_star.mean, found.p_star.std_error)}")
    print(f"结果已保存到: {path}")
    return EXIT_OK


@error_handler_decorator("lzcd_cli", "dirac")
def cmd_dirac(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    rows = [{'a': a, 'phi': phi, 'chi': chi(a), 'P_inf': p_infinity(a, phi)}
            for a in args.a_values for phi in args.phi_values]
    print(TableFormatter.format_table(rows, ['a', 'phi', 'chi', 'P_inf'],
                                      formatters={k: (lambda v: f"{v:.6f}") for k in ('phi', 'chi', 'P_inf')},
                                      title="δ 脉冲极限 P∞(a;φ)"))
    for phi in args.phi_values:
        try:
            print(f"φ = {phi:.4f}: σ* = {dirac_crossover_sigma(phi):.4f}")
        except NoRootError:
            print(f"φ = {phi:.4f}: 与 <P_LZ>(0,σ) 无交点")
    return EXIT_OK


@error_handler_decorator("lzcd_cli", "average")
def cmd_average(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    model = model_from_args(args, args.mu, args.b)
    dist = GapDistribution(args.mu, args.sigma, config.ensemble.seed)
    result = average_probability(dist, args.b, args.phi, model, n=config.ensemble.samples,
                                 cfg=ctx.integrator, ens_cfg=ctx.ensemble)
    payload = result.to_dict()
    payload['avg_plz'] = avg_plz(args.mu, args.sigma)
    path = write_json(payload, _output_dir(config, "average") / "average.json")
    print(f"<P> = {DataFormatter.format_estimate(result.mean, result.std_error)}"
          f" (n = {result.n_samples}, <P_LZ> = {payload['avg_plz']:.4f})")
    print(f"结果已保存到: {path}")
    return EXIT_OK


def _scenario_overrides(config: AppConfig, args) -> Dict[str, Optional[Any]]:
    """只有命令行显式给出的参数才覆盖场景文件"""
    overrides: Dict[str, Optional[Any]] = {'seed': args.seed, 'n_samples': args.samples}
    if getattr(args, 'optimize', False):
        overrides['optimize'] = True
    return overrides


@error_handler_decorator("lzcd_cli", "scenario")
def cmd_scenario(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    mapping = load_scenario_file(args.scenario_file) if args.scenario_file else None
    scenario = build_scenario(args.name, mapping, _scenario_overrides(config, args), quick=args.quick)
    manifest = run_scenario(scenario, ctx, config.output.output_dir)
    print(TableFormatter.format_table(manifest['files'], ['file', 'rows', 'wall_time'],
                                      formatters={'wall_time': lambda v: DataFormatter.format_seconds(v) if v else '-'},
                                      title=f"场景 {scenario.name}"))
    return EXIT_OK


@error_handler_decorator("lzcd_cli", "all")
def cmd_all(args, config: AppConfig, ctx: RunContext, logger: EnhancedLogger) -> int:
    seed = args.seed if args.seed is not None else config.ensemble.seed
    overrides = {'n_samples': args.samples} if args.samples else None
    manifest = run_all(seed, config.output.output_dir, ctx, quick=not args.full, overrides=overrides)
    print(TableFormatter.format_table(manifest['scenarios'], ['scenario', 'status', 'wall_time'],
                                      formatters={'wall_time': lambda v: DataFormatter.format_seconds(v) if v else '-'},
                                      title="全部场景"))
    return EXIT_FAILURE if manifest['failed'] else EXIT_OK


COMMANDS = {
    'simulate': cmd_simulate,
    'sweep': cmd_sweep,
    'cc': cmd_cc,
    'optimize': cmd_optimize,
    'dirac': cmd_dirac,
    'average': cmd_average,
    'scenario': cmd_scenario,
    'all': cmd_all,
}


def main(argv=None) -> int:
    """主函数"""
    args = build_parser().parse_args(argv)
    logger = EnhancedLogger("LZCD", args.log_level or "INFO")
    handler = ErrorHandler("lzcd_cli")

    try:
        config, ctx = build_context(args)
    except LabError as e:
        print(handler.handle_error(e, "配置")['user_message'], file=sys.stderr)
        logger.print_summary()
        return EXIT_CONFIG

    if args.log_level is None:
        logger.logger.setLevel(config.logging.level)
    operation_index = logger.start_operation("执行子命令", command=args.command)
    try:
        status = COMMANDS[args.command](args, config, ctx, logger)
    except ConfigError as e:
        print(handler.handle_error(e, "配置", log_level="warning")['user_message'], file=sys.stderr)
        status = EXIT_CONFIG
    except LabError as e:
        print(handler.handle_error(e, args.command, log_level="warning")['user_message'], file=sys.stderr)
        status = EXIT_FAILURE
    except Exception as e:
        info = handler.handle_error(e, args.command)
        logger.error(f"子命令 {args.command} 异常终止", error_type=info["error_type"])
        print(info["user_message"], file=sys.stderr)
        status = EXIT_FAILURE
    logger.end_operation(operation_index, success=status == EXIT_OK)

    logger.print_summary()
    if args.export_report:
        report_path = logger.export_report()
        print(f"\n详细报告已保存到: {report_path}")
    return status


if __name__ == "__main__":
    sys.exit(main())
