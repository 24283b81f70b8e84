#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
统一错误处理模块
提供标准化的异常类型、错误记录和用户友好的错误信息
"""

import traceback
from datetime import datetime
from typing import Any, Dict, List, Optional
from functools import wraps
from enhanced_logger import get_logger


def _restore_error(cls, args, state):
    error = Exception.__new__(cls)
    error.args = args
    error.__dict__.update(state)
    return error


class LabError(Exception):
    """计算错误基类"""
    def __init__(self, message: str, error_code: str = None, details: Dict[str, Any] = None):
        super().__init__(message)
        self.message = message
        self.error_code = error_code or 'LAB_ERROR'
        self.details = details or {}
        self.timestamp = datetime.now()

    def __reduce__(self):
        # 子类构造参数各不相同，按属性字典还原
        return _restore_error, (type(self), self.args, self.__dict__)


class ValidationError(LabError):
    """参数验证错误"""
    def __init__(self, message: str, field: str = None, value: Any = None):
        super().__init__(message, 'VALIDATION_ERROR', {'field': field, 'value': value})
        self.field = field
        self.value = value


class ConfigError(ValidationError):
    """配置/场景验证错误，携带全部违规字段"""
    def __init__(self, message: str, violations: Optional[List[str]] = None,
                 field: str = None, value: Any = None):
        super().__init__(message, field, value)
        self.error_code = 'CONFIG_ERROR'
        self.violations = list(violations or [message])
        self.details['violations'] = self.violations


class RangeError(ValidationError):
    """参数超出已验证的计算区间"""
    def __init__(self, message: str, field: str = None, value: Any = None, limit: float = None):
        super().__init__(message, field, value)
        self.error_code = 'RANGE_ERROR'
        self.limit = limit
        self.details['limit'] = limit


class IntegrationError(LabError):
    """数值积分失败（步长下溢等）"""
    def __init__(self, message: str, location: float = None, details: Dict[str, Any] = None):
        super().__init__(message, 'INTEGRATION_ERROR', details)
        self.location = location
        self.details['location'] = location


class NoRootError(LabError):
    """特征曲线求根区间内无解"""
    def __init__(self, message: str, scanned_min: float = None, bracket: tuple = None,
                 details: Dict[str, Any] = None):
        super().__init__(message, 'NO_ROOT', details)
        self.scanned_min = scanned_min
        self.bracket = bracket
        self.details.update({'scanned_min': scanned_min, 'bracket': bracket})


class ErrorHandler:
    """错误处理器"""

    def __init__(self, logger_name: str = "error_handler"):
        self.logger = get_logger(logger_name)
        self.error_counts = {}

    def handle_error(self,
                     error: Exception,
                     context: str = "",
                     user_message: str = None,
                     log_level: str = "error") -> Dict[str, Any]:
        """统一错误处理"""
        error_type = type(error).__name__
        error_message = str(error)

        self.error_counts[error_type] = self.error_counts.get(error_type, 0) + 1

        error_info = {
            'error_type': error_type,
            'error_message': error_message,
            'context': context,
            'timestamp': datetime.now().isoformat(),
            'traceback': traceback.format_exc() if log_level == "error" else None
        }

        # 添加特定错误类型的详细信息
        if isinstance(error, ConfigError):
            error_info['violations'] = error.violations
        if isinstance(error, ValidationError):
            error_info.update({'field': error.field, 'value': error.value})
        if isinstance(error, IntegrationError):
            error_info['location'] = error.location
        if isinstance(error, NoRootError):
            error_info.update({'scanned_min': error.scanned_min, 'bracket': error.bracket})
        if isinstance(error, LabError):
            error_info.update({'error_code': error.error_code, 'details': error.details})

        log_message = f"{context}: {error_message}" if context else error_message

        if log_level == "error":
            self.logger.error(log_message, error_type=error_type)
        elif log_level == "warning":
            self.logger.warning(log_message, error_type=error_type)
        else:
            self.logger.info(log_message, error_type=error_type)

        error_info['user_message'] = user_message or self._generate_user_message(error)
        return error_info

    def _generate_user_message(self, error: Exception) -> str:
        """生成用户友好的错误信息"""
        if isinstance(error, ConfigError):
            return "配置验证失败：" + "；".join(error.violations)
        elif isinstance(error, RangeError):
            return f"参数超出可计算区间：{error.message}"
        elif isinstance(error, ValidationError):
            return f"参数验证失败：{error.message}"
        elif isinstance(error, IntegrationError):
            where = f"（u={error.location:.6f}）" if error.location is not None else ""
            return f"数值积分失败{where}，请放宽容差或检查脉冲参数"
        elif isinstance(error, NoRootError):
            return f"未找到零跃迁耦合 b₀，扫描最小值 {error.scanned_min}"
        elif isinstance(error, LabError):
            return error.message
        elif "permission" in str(error).lower():
            return "权限不足，请检查输出目录"
        else:
            return "计算失败，请检查参数后重试"

    def get_error_statistics(self) -> Dict[str, int]:
        """获取错误统计信息"""
        return self.error_counts.copy()

    def reset_statistics(self):
        """重置错误统计"""
        self.error_counts.clear()


def error_handler_decorator(logger_name: str = None,
                            context: str = None,
                            reraise: bool = True,
                            default_return: Any = None):
    """错误处理装饰器"""
    def decorator(func):
        @wraps(func)
        def wrapper(*args, **kwargs):
            handler = ErrorHandler(logger_name or func.__name__)
            try:
                return func(*args, **kwargs)
            except Exception as e:
                handler.handle_error(e, context or f"执行函数 {func.__name__}")
                if reraise:
                    raise
                return default_return
        return wrapper
    return decorator


def safe_execute(func,
                 *args,
                 default_return: Any = None,
                 logger_name: str = "safe_execute",
                 context: str = None,
                 **kwargs) -> Any:
    """安全执行函数，捕获并处理异常"""
    handler = ErrorHandler(logger_name)
    try:
        return func(*args, **kwargs)
    except Exception as e:
        name = func.__name__ if hasattr(func, '__name__') else 'unknown'
        handler.handle_error(e, context or f"执行函数 {name}", log_level="warning")
        return default_return


if __name__ == '__main__':
    print("=== 错误处理模块测试 ===")
    handler = ErrorHandler("test")

    try:
        raise NoRootError("bracket empty", scanned_min=3.2e-3, bracket=(0.2, 100.0))
    except Exception as e:
        print(f"错误处理结果: {handler.handle_error(e, '测试上下文')['user_message']}")

    print(f"错误统计: {handler.get_error_statistics()}")
