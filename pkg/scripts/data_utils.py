#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
数据处理工具模块
提供场景参数转换、结果格式化、带自描述表头的 CSV 读写、
工作簿导出以及清单文件的校验和
"""

import hashlib
import json
import math
import re
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple, Union

import numpy as np
import pandas as pd

from enhanced_logger import get_logger
from error_handler import ValidationError

logger = get_logger("data_utils")

HEADER_PREFIX = '# '
CODE_VERSION = "1.0.0"
PI_PATTERN = re.compile(r'^([0-9]*\.?[0-9]+)?\s*\*?\s*pi(?:\s*\/\s*([0-9]*\.?[0-9]+))?$')


class DataConverter:
    """数据转换器"""

    @staticmethod
    def safe_float(value: Any, default: float = 0.0) -> float:
        """安全转换为浮点数"""
        try:
            if value is None or value == '':
                return default
            return float(value)
        except (ValueError, TypeError):
            return default

    @staticmethod
    def safe_int(value: Any, default: int = 0) -> int:
        """安全转换为整数"""
        try:
            if value is None or value == '':
                return default
            return int(float(value))  # 先转float再转int，处理"1.0"这种情况
        except (ValueError, TypeError):
            return default

    @staticmethod
    def parse_scalar(text: str) -> Any:
        """场景文件中的值：布尔、整数、浮点（支持 pi 倍数），否则原样字符串"""
        value = text.strip()
        lowered = value.lower()
        if lowered in ('true', 'yes', 'on'):
            return True
        if lowered in ('false', 'no', 'off'):
            return False
        try:
            return int(value)
        except ValueError:
            pass
        try:
            return float(value)
        except ValueError:
            pass
        match = PI_PATTERN.match(lowered)
        if match:
            factor = float(match.group(1)) if match.group(1) else 1.0
            divisor = float(match.group(2)) if match.group(2) else 1.0
            return factor * math.pi / divisor
        return value

    @staticmethod
    def to_jsonable(value: Any) -> Any:
        """numpy 标量与数组转为 JSON 可序列化对象"""
        if isinstance(value, dict):
            return {str(k): DataConverter.to_jsonable(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [DataConverter.to_jsonable(v) for v in value]
        if isinstance(value, np.ndarray):
            return value.tolist()
        if isinstance(value, np.generic):
            return value.item()
        return value


class DataFormatter:
    """数据格式化器"""

    @staticmethod
    def format_probability(value: Union[int, float, str], decimal_places: int = 4) -> str:
        """概率：小于 1e-3 时改用科学计数法"""
        try:
            num = float(value)
        except (ValueError, TypeError):
            return "nan"
        if num != 0 and abs(num) < 1e-3:
            return f"{num:.{max(decimal_places - 2, 1)}e}"
        return f"{num:.{decimal_places}f}"

    @staticmethod
    def format_estimate(mean: float, std_error: float) -> str:
        """均值 ± 标准误差"""
        return f"{DataFormatter.format_probability(mean)} ± {DataFormatter.format_probability(std_error)}"

    @staticmethod
    def format_seconds(seconds: float) -> str:
        if seconds < 60:
            return f"{seconds:.2f}s"
        return f"{int(seconds // 60)}m{seconds % 60:04.1f}s"


class TableFormatter:
    """表格格式化器"""

    @staticmethod
    def format_table(data: List[Dict[str, Any]],
                     headers: List[str],
                     formatters: Optional[Dict[str, Callable]] = None,
                     title: Optional[str] = None) -> str:
        """格式化表格数据为字符串"""
        if not data:
            return "暂无数据"

        formatters = formatters or {}

        def cell(item, header):
            value = item.get(header, '')
            return formatters[header](value) if header in formatters else str(value)

        rows = [[cell(item, h) for h in headers] for item in data]
        col_widths = [max(len(h), *(len(r[i]) for r in rows)) for i, h in enumerate(headers)]

        header_row = '|'.join(h.ljust(w) for h, w in zip(headers, col_widths))
        result = [header_row, '-' * len(header_row)]
        result.extend('|'.join(v.ljust(w) for v, w in zip(row, col_widths)) for row in rows)
        table = '\n'.join(result)

        if title:
            table = f"{title}\n{'=' * len(title)}\n{table}"
        return table


# ---------------------------------------------------------------- tidy CSV

def write_tidy_csv(df: pd.DataFrame, path: Union[str, Path], header: Dict[str, Any],
                   float_format: str = "%.12g") -> Path:
    """UTF-8 逗号分隔，# 开头的表头行依次给出列名、参数回显、种子与代码版本"""
    path = Path(path)
    meta = {'columns': list(df.columns)}
    meta.update(header)
    meta.setdefault('version', CODE_VERSION)

    with open(path, 'w', encoding='utf-8', newline='') as f:
        for key, value in meta.items():
            f.write(f"{HEADER_PREFIX}{key}: {json.dumps(DataConverter.to_jsonable(value), ensure_ascii=False, sort_keys=True)}\n")
        df.to_csv(f, index=False, float_format=float_format, lineterminator='\n')
    return path


def read_tidy_csv(path: Union[str, Path]) -> Tuple[pd.DataFrame, Dict[str, Any]]:
    """读回数据与表头参数"""
    header: Dict[str, Any] = {}
    with open(path, 'r', encoding='utf-8') as f:
        for line in f:
            if not line.startswith(HEADER_PREFIX):
                break
            key, _, raw = line[len(HEADER_PREFIX):].partition(': ')
            try:
                header[key] = json.loads(raw)
            except json.JSONDecodeError:
                raise ValidationError(f"CSV 表头无法解析: {line.strip()}", "header", key)

    df = pd.read_csv(path, comment='#', encoding='utf-8')
    if 'columns' in header and list(df.columns) != header['columns']:
        raise ValidationError("CSV 列与表头不一致", "columns", list(df.columns))
    return df, header


def export_workbook(frames: Dict[str, pd.DataFrame], path: Union[str, Path]) -> Path:
    """每个面板一个工作表"""
    path = Path(path)
    with pd.ExcelWriter(path, engine='openpyxl') as writer:
        for name, df in frames.items():
            # 工作表名最长 31 字符
            df.to_excel(writer, sheet_name=name[:31], index=False)
    logger.info("工作簿已导出", path=str(path), sheets=len(frames))
    return path


# ---------------------------------------------------------------- manifest

def file_sha256(path: Union[str, Path]) -> str:
    digest = hashlib.sha256()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(65536), b''):
            digest.update(chunk)
    return digest.hexdigest()


def write_json(data: Dict[str, Any], path: Union[str, Path]) -> Path:
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as f:
        json.dump(DataConverter.to_jsonable(data), f, ensure_ascii=False, indent=2)
    return path


def read_json(path: Union[str, Path]) -> Dict[str, Any]:
    with open(path, 'r', encoding='utf-8') as f:
        return json.load(f)


if __name__ == '__main__':
    print("=== 数据工具模块测试 ===")
    print(f"pi/2 解析: {DataConverter.parse_scalar('pi/2')}")
    print(f"概率格式化: {DataFormatter.format_probability(3.2e-6)}")
    print(TableFormatter.format_table([{'a': 0.5, 'P': 0.4633}], ['a', 'P'], title="示例"))
