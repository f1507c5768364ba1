"""
通用辅助函数模块
"""

import logging
from typing import Any, List, Sequence, Union

import numpy as np

logger = logging.getLogger(__name__)


def encode_real(arr: Any) -> Any:
    """实数组编码为嵌套列表"""
    if arr is None:
        return None
    return np.asarray(arr, dtype=float).tolist()


def decode_real(data: Any) -> Any:
    if data is None:
        return None
    return np.asarray(data, dtype=float)


def encode_complex(arr: Any) -> Any:
    """复数组编码为末维为 [re, im] 的嵌套列表"""
    if arr is None:
        return None
    a = np.asarray(arr, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def decode_complex(data: Any) -> Any:
    if data is None:
        return None
    a = np.asarray(data, dtype=float)
    return a[..., 0] + 1j * a[..., 1]


def spawn_rng(seed: int, *keys: int) -> np.random.Generator:
    """
    由主种子和若干整数键派生独立的随机数子流

    Args:
        seed: 主种子
        keys: 子流标识，例如 (扫描点, 试验)

    Returns:
        np.random.Generator: 子流生成器
    """
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def format_duration(seconds: float) -> str:
    """格式化耗时"""
    if seconds < 1:
        return f"{seconds * 1000:.0f}ms"
    if seconds < 60:
        return f"{seconds:.1f}s"
    minutes, sec = divmod(seconds, 60)
    if minutes < 60:
        return f"{int(minutes)}m{sec:.0f}s"
    hours, minutes = divmod(minutes, 60)
    return f"{int(hours)}h{int(minutes)}m"


def float_range(start: float, stop: float, step: float) -> List[float]:
    """含端点的浮点等差序列，例如 1, 1.5, …, 8"""
    n = int(round((stop - start) / step))
    return [round(start + i * step, 10) for i in range(n + 1)]


def is_sorted(values: Sequence[Union[int, float]]) -> bool:
    return all(a <= b for a, b in zip(values, values[1:]))
