#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
配置管理模块
统一管理积分器容差、系综采样、输出目录和日志设置
"""

import os
import json
from typing import Any, Dict, List, Optional
from pathlib import Path
from dataclasses import dataclass, asdict, field, replace
from enhanced_logger import get_logger
from error_handler import ValidationError

RTOL_FLOOR = 1e-13
ATOL_FLOOR = 1e-15


@dataclass(frozen=True)
class IntegratorConfig:
    """积分器配置（s 坐标下的 RK45 自适应步长）"""
    rtol: float = 1e-9
    atol: float = 1e-12
    max_step: float = 0.01
    breakpoints: tuple = ()
    grid_points: int = 1001
    norm_tolerance: float = 1e-8

    def __post_init__(self):
        if not self.rtol >= RTOL_FLOOR:
            raise ValidationError(f"rtol 不能小于 {RTOL_FLOOR}", "rtol", self.rtol)
        if not self.atol >= ATOL_FLOOR:
            raise ValidationError(f"atol 不能小于 {ATOL_FLOOR}", "atol", self.atol)
        if not self.max_step > 0:
            raise ValidationError("max_step 必须大于0", "max_step", self.max_step)
        if self.grid_points < 2:
            raise ValidationError("grid_points 至少为2", "grid_points", self.grid_points)
        object.__setattr__(self, 'breakpoints', tuple(float(u) for u in self.breakpoints))

    def with_rtol(self, rtol: float) -> 'IntegratorConfig':
        return replace(self, rtol=rtol)


@dataclass
class EnsembleConfig:
    """系综采样配置"""
    samples: int = 1000
    seed: int = 20240501
    workers: int = 0  # 0 表示 os.cpu_count()
    block_size: int = 256
    serial: bool = False


@dataclass
class OutputConfig:
    """输出配置"""
    output_dir: str = "lzcd_output"
    write_xlsx: bool = False
    float_format: str = "%.12g"


@dataclass
class LoggingConfig:
    """日志配置"""
    level: str = "INFO"
    enable_file: bool = True


@dataclass
class AppConfig:
    """应用配置"""
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    ensemble: EnsembleConfig = field(default_factory=EnsembleConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    logging: LoggingConfig = field(default_factory=LoggingConfig)
    debug_mode: bool = False
    version: str = "1.0.0"


class ConfigManager:
    """配置管理器"""

    def __init__(self, config_file: str = None):
        self.logger = get_logger("config_manager")
        self.config_file = config_file or self._get_default_config_path()
        self._config: Optional[AppConfig] = None
        self._load_config()

    def _get_default_config_path(self) -> str:
        """获取默认配置文件路径"""
        return str(Path(__file__).parent / "config.json")

    def _load_config(self):
        """加载配置"""
        try:
            if os.path.exists(self.config_file):
                with open(self.config_file, 'r', encoding='utf-8') as f:
                    config_data = json.load(f)
                self._config = self._dict_to_config(config_data)
                self.logger.info("配置文件加载成功", config_file=self.config_file)
            else:
                self.logger.info("配置文件不存在，使用默认配置")
                self._config = AppConfig()
                self.save_config()
        except (OSError, ValueError, TypeError) as e:
            self.logger.error("加载配置文件失败，使用默认配置", error=str(e))
            self._config = AppConfig()

    def _dict_to_config(self, config_dict: Dict[str, Any]) -> AppConfig:
        """将字典转换为配置对象"""
        integrator = dict(config_dict.get('integrator', {}))
        integrator['breakpoints'] = tuple(integrator.get('breakpoints', ()))
        return AppConfig(
            integrator=IntegratorConfig(**integrator),
            ensemble=EnsembleConfig(**config_dict.get('ensemble', {})),
            output=OutputConfig(**config_dict.get('output', {})),
            logging=LoggingConfig(**config_dict.get('logging', {})),
            debug_mode=config_dict.get('debug_mode', False),
            version=config_dict.get('version', '1.0.0')
        )

    def _config_to_dict(self, config: AppConfig) -> Dict[str, Any]:
        """将配置对象转换为字典"""
        integrator = asdict(config.integrator)
        integrator['breakpoints'] = list(integrator['breakpoints'])
        return {
            'integrator': integrator,
            'ensemble': asdict(config.ensemble),
            'output': asdict(config.output),
            'logging': asdict(config.logging),
            'debug_mode': config.debug_mode,
            'version': config.version
        }

    def get_config(self) -> AppConfig:
        """获取配置"""
        if self._config is None:
            self._load_config()
        return self._config

    def get_integrator_config(self) -> IntegratorConfig:
        return self.get_config().integrator

    def get_ensemble_config(self) -> EnsembleConfig:
        return self.get_config().ensemble

    def get_output_config(self) -> OutputConfig:
        return self.get_config().output

    def get_logging_config(self) -> LoggingConfig:
        return self.get_config().logging

    def update_config(self, **kwargs):
        """更新配置；积分器字段通过 replace 重建以保留校验"""
        config = self.get_config()
        integrator_fields = set(IntegratorConfig.__dataclass_fields__)

        for key, value in kwargs.items():
            if key in integrator_fields:
                config.integrator = replace(config.integrator, **{key: value})
            elif hasattr(config.ensemble, key):
                setattr(config.ensemble, key, value)
            elif hasattr(config.output, key):
                setattr(config.output, key, value)
            elif hasattr(config, key):
                setattr(config, key, value)
            else:
                self.logger.warning(f"未知的配置项: {key}")

        self.logger.info("配置已更新", updated_keys=list(kwargs.keys()))

    def save_config(self):
        """保存配置到文件"""
        try:
            config_dir = Path(self.config_file).parent
            config_dir.mkdir(parents=True, exist_ok=True)

            with open(self.config_file, 'w', encoding='utf-8') as f:
                json.dump(self._config_to_dict(self.get_config()), f, ensure_ascii=False, indent=2)

            self.logger.info("配置已保存", config_file=self.config_file)
        except OSError as e:
            self.logger.error("保存配置文件失败", error=str(e))

    def get_env_override(self, key: str, default: Any = None) -> Any:
        """从环境变量获取配置覆盖"""
        return os.getenv(f"LZCD_{key.upper()}", default)

    def apply_env_overrides(self):
        """应用环境变量覆盖"""
        config = self.get_config()

        for key in ('rtol', 'atol'):
            raw = self.get_env_override(key)
            if raw:
                try:
                    config.integrator = replace(config.integrator, **{key: float(raw)})
                except (ValueError, ValidationError):
                    self.logger.warning(f"无效的积分容差: {key}={raw}")

        for key in ('samples', 'seed', 'workers'):
            raw = self.get_env_override(key)
            if raw:
                try:
                    setattr(config.ensemble, key, int(raw))
                except ValueError:
                    self.logger.warning(f"无效的整数配置: {key}={raw}")

        output_dir = self.get_env_override('output_dir')
        if output_dir:
            config.output.output_dir = output_dir

        log_level = self.get_env_override('log_level')
        if log_level:
            config.logging.level = log_level.upper()

        debug_mode = self.get_env_override('debug_mode')
        if debug_mode:
            config.debug_mode = debug_mode.lower() in ('true', '1', 'yes')

        self.logger.debug("环境变量覆盖已应用")

    def collect_errors(self) -> List[str]:
        """收集全部配置违规项"""
        config = self.get_config()
        errors = []

        if config.ensemble.samples < 1:
            errors.append("ensemble.samples 必须大于0")
        if config.ensemble.block_size < 1:
            errors.append("ensemble.block_size 必须大于0")
        if config.ensemble.workers < 0:
            errors.append("ensemble.workers 不能为负")
        if not config.output.output_dir:
            errors.append("output.output_dir 不能为空")

        valid_log_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if config.logging.level not in valid_log_levels:
            errors.append(f"日志级别必须是: {', '.join(valid_log_levels)}")

        return errors

    def validate_config(self) -> bool:
        """验证配置有效性"""
        errors = self.collect_errors()
        if errors:
            for error in errors:
                self.logger.error(f"配置验证失败: {error}")
            return False

        self.logger.info("配置验证通过")
        return True


_config_manager = None


def get_config_manager() -> ConfigManager:
    """获取全局配置管理器实例"""
    global _config_manager
    if _config_manager is None:
        _config_manager = ConfigManager()
        _config_manager.apply_env_overrides()
    return _config_manager


def get_config() -> AppConfig:
    """获取应用配置"""
    return get_config_manager().get_config()


def get_integrator_config() -> IntegratorConfig:
    """获取积分器配置"""
    return get_config_manager().get_integrator_config()


def get_ensemble_config() -> EnsembleConfig:
    """获取系综配置"""
    return get_config_manager().get_ensemble_config()


if __name__ == '__main__':
    print("=== 配置管理模块测试 ===")
    config_mgr = ConfigManager()
    config = config_mgr.get_config()
    print(f"rtol: {config.integrator.rtol}")
    print(f"样本数: {config.ensemble.samples}")
    print(f"输出目录: {config.output.output_dir}")
    print(f"配置验证结果: {config_mgr.validate_config()}")
