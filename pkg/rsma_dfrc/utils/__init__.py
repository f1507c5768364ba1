"""
工具模块
包含错误处理、进度显示、资源预算与辅助函数
（配置模块依赖 core，需直接从 rsma_dfrc.utils.config 导入）
"""

from rsma_dfrc.utils.errors import (
    ConfigError,
    DfrcError,
    ErrorCollector,
    InfeasibleError,
    InvalidArgumentError,
    SolverError,
)
from rsma_dfrc.utils.progress import IterationMonitor
from rsma_dfrc.utils.resource_manager import MemoryThresholds, PointBudget, ResourceUsage

__all__ = [
    'DfrcError', 'InvalidArgumentError', 'ConfigError', 'SolverError', 'InfeasibleError',
    'ErrorCollector', 'IterationMonitor', 'PointBudget', 'MemoryThresholds', 'ResourceUsage',
]
