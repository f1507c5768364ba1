"""
迭代进度模块
为外层优化循环提供tqdm进度条与迭代统计
"""

import logging
import time
from collections import deque
from dataclasses import dataclass
from typing import Any, Deque, Dict, List, Optional

from tqdm import tqdm

logger = logging.getLogger(__name__)


@dataclass
class IterationUpdate:
    """一次外层迭代的记录"""
    iteration: int
    ee: float
    r_norm: float = 0.0
    q_norm: float = 0.0
    n_active: int = 0
    accepted: bool = True
    timestamp: float = 0.0


class IterationMonitor:
    """优化循环监控器，enabled 为 False 时不输出进度条"""

    def __init__(self, total: int, description: str = "优化", enabled: bool = False,
                 window: int = 10):
        """
        初始化监控器

        Args:
            total: 最大迭代次数
            description: 进度条描述
            enabled: 是否显示进度条
            window: 计算近期速度的窗口长度
        """
        self.total = total
        self.description = description
        self.enabled = enabled
        self.history: List[IterationUpdate] = []
        self.recent: Deque[float] = deque(maxlen=window)
        self.start_time = time.time()
        self.progress_bar: Optional[tqdm] = None
        if enabled:
            self.progress_bar = tqdm(total=total, desc=description, unit="it", leave=False,
                                     bar_format="{l_bar}{bar}| {n_fmt}/{total_fmt} [{elapsed}<{remaining}]")

    def update(self, iteration: int, ee: float, r_norm: float = 0.0, q_norm: float = 0.0,
               n_active: int = 0, accepted: bool = True):
        """记录一次迭代"""
        now = time.time()
        self.history.append(IterationUpdate(iteration, ee, r_norm, q_norm, n_active, accepted, now))
        self.recent.append(now)
        logger.debug(f"{self.description} it={iteration} EE={ee:.6f} r={r_norm:.2e} q={q_norm:.2e} "
                     f"active={n_active} {'接受' if accepted else '拒绝'}")
        if self.progress_bar is not None:
            self.progress_bar.set_postfix({'EE': f"{ee:.4f}", 'active': n_active})
            self.progress_bar.update(1)

    def iterations_per_second(self) -> float:
        if len(self.recent) < 2:
            return 0.0
        span = self.recent[-1] - self.recent[0]
        return (len(self.recent) - 1) / span if span > 0 else 0.0

    def finish(self) -> Dict[str, Any]:
        """
        结束监控并返回统计信息

        Returns:
            Dict[str, Any]: 迭代次数、拒绝次数、耗时与速度
        """
        if self.progress_bar is not None:
            self.progress_bar.close()
            self.progress_bar = None
        elapsed = time.time() - self.start_time
        rejected = sum(1 for u in self.history if not u.accepted)
        return {
            'iterations': len(self.history),
            'rejected': rejected,
            'elapsed_s': round(elapsed, 3),
            'iterations_per_second': round(len(self.history) / elapsed, 2) if elapsed > 0 else 0.0,
        }
