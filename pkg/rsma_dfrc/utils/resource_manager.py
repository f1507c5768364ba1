"""
资源管理模块
记录每个扫描任务的耗时与内存峰值，并在超出时间预算时通知优化循环截断
"""

import gc
import logging
import time
from dataclasses import asdict, dataclass
from typing import Any, Dict, Optional

import psutil

logger = logging.getLogger(__name__)


@dataclass
class ResourceUsage:
    """资源使用情况"""
    wall_time_s: float
    peak_rss_mb: float
    start_rss_mb: float
    cpu_percent: float
    truncated: bool
    timestamp: float


@dataclass
class MemoryThresholds:
    """内存阈值配置"""
    warning_mb: float = 1000.0
    critical_mb: float = 2000.0


class PointBudget:
    """
    单个扫描任务的资源预算

    优化循环在每次外层迭代后调用 expired()；超时后返回 True，
    由调用方以 max_iterations 状态返回当前最优解。
    """

    def __init__(self, wall_time_s: Optional[float] = None,
                 memory_thresholds: Optional[MemoryThresholds] = None):
        """
        初始化预算

        Args:
            wall_time_s: 墙钟时间预算（None 表示不限）
            memory_thresholds: 内存阈值配置
        """
        self.wall_time_s = wall_time_s
        self.memory_thresholds = memory_thresholds or MemoryThresholds()
        self.process = psutil.Process()
        self.start_time = time.time()
        self.start_rss_mb = self._rss_mb()
        self.peak_rss_mb = self.start_rss_mb
        self.truncated = False
        self._warned = False

    def _rss_mb(self) -> float:
        return self.process.memory_info().rss / 1024 / 1024

    def elapsed(self) -> float:
        return time.time() - self.start_time

    def sample(self) -> float:
        """采样当前内存并更新峰值"""
        rss = self._rss_mb()
        self.peak_rss_mb = max(self.peak_rss_mb, rss)
        if rss >= self.memory_thresholds.critical_mb:
            logger.critical(f"内存使用 {rss:.1f}MB 超过临界阈值，执行垃圾回收")
            gc.collect()
        elif rss >= self.memory_thresholds.warning_mb and not self._warned:
            logger.warning(f"内存使用 {rss:.1f}MB 超过警告阈值")
            self._warned = True
        return rss

    def expired(self) -> bool:
        """时间预算是否耗尽（耗尽后标记截断）"""
        self.sample()
        if self.wall_time_s is not None and self.elapsed() >= self.wall_time_s:
            if not self.truncated:
                logger.warning(f"任务超出时间预算 {self.wall_time_s:.1f}s，返回当前最优解")
            self.truncated = True
        return self.truncated

    def usage(self) -> ResourceUsage:
        try:
            cpu = self.process.cpu_percent()
        except psutil.Error:
            cpu = 0.0
        return ResourceUsage(
            wall_time_s=self.elapsed(),
            peak_rss_mb=max(self.peak_rss_mb, self.sample()),
            start_rss_mb=self.start_rss_mb,
            cpu_percent=cpu,
            truncated=self.truncated,
            timestamp=time.time(),
        )

    def summary(self) -> Dict[str, Any]:
        data = asdict(self.usage())
        data['wall_time_s'] = round(data['wall_time_s'], 3)
        data['peak_rss_mb'] = round(data['peak_rss_mb'], 1)
        return data

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.sample()
