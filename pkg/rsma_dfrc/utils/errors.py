"""
错误处理模块
定义RSMA-DFRC能效优化器的各种异常类型
"""

import logging
import time
from typing import Optional, List, Dict, Any

logger = logging.getLogger(__name__)


class DfrcError(Exception):
    """优化器基础异常类"""

    # CLI退出码，子类覆盖
    exit_code: int = 3

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        """
        初始化异常

        Args:
            message: 错误信息
            details: 错误详情字典
        """
        super().__init__(message)
        self.message = message
        self.details = details or {}
        self.timestamp = time.time()

        logger.error(f"{type(self).__name__}: {message}")
        if details:
            logger.error(f"错误详情: {details}")


class InvalidArgumentError(DfrcError):
    """参数非法"""

    exit_code = 4

    def __init__(self, argument: str, value: Any, reason: str = ""):
        message = f"参数非法: {argument}={value!r}"
        if reason:
            message += f" ({reason})"
        super().__init__(message, {'argument': argument, 'value': repr(value), 'reason': reason})
        self.argument = argument
        self.value = value
        self.reason = reason


class InvalidStateError(DfrcError):
    """状态非法，例如总功耗为零"""

    def __init__(self, state: str, reason: str = ""):
        super().__init__(f"状态非法: {state} {reason}".strip(), {'state': state, 'reason': reason})
        self.state = state


class InvalidModelError(DfrcError):
    """模型非法，例如二次型不定"""

    def __init__(self, reason: str, min_eigenvalue: Optional[float] = None):
        details = {'reason': reason}
        if min_eigenvalue is not None:
            details['min_eigenvalue'] = min_eigenvalue
        super().__init__(f"模型非法: {reason}", details)
        self.min_eigenvalue = min_eigenvalue


class SingularGeometryError(DfrcError):
    """CRB分母退化"""

    def __init__(self, reason: str, value: float = 0.0):
        super().__init__(f"几何退化: {reason}", {'reason': reason, 'value': value})
        self.value = value


class ConfigError(DfrcError):
    """配置文件错误"""

    exit_code = 4

    def __init__(self, path: Optional[str], key: Optional[str], reason: str):
        message = f"配置错误: {reason}"
        if key:
            message += f" (键: {key})"
        if path:
            message += f" [{path}]"
        super().__init__(message, {'path': path, 'key': key, 'reason': reason})
        self.path = path
        self.key = key


class SolverError(DfrcError):
    """求解器失败，附带迭代上下文"""

    exit_code = 3

    def __init__(self, solver: str, status: str, iteration: Optional[int] = None,
                 context: Optional[Dict[str, Any]] = None):
        message = f"求解器失败: {solver} 状态={status}"
        if iteration is not None:
            message += f" 迭代={iteration}"
        details = {'solver': solver, 'status': status, 'iteration': iteration}
        details.update(context or {})
        super().__init__(message, details)
        self.solver = solver
        self.status = status
        self.iteration = iteration


class InfeasibleError(DfrcError):
    """不可行：初始化不可行或找不到可行点"""

    exit_code = 2

    def __init__(self, stage: str, slacks: Optional[Dict[str, float]] = None):
        super().__init__(f"问题不可行: {stage}", {'stage': stage, 'slacks': slacks or {}})
        self.stage = stage
        self.slacks = slacks or {}


class RecoveryError(DfrcError):
    """秩一恢复失败，调用方可增加随机化次数后重试"""

    def __init__(self, n_candidates: int, reason: str = ""):
        super().__init__(f"秩一恢复失败: {n_candidates} 个候选均不可行 {reason}".strip(),
                         {'n_candidates': n_candidates, 'reason': reason})
        self.n_candidates = n_candidates


class GridTooLargeError(DfrcError):
    """穷举网格超过上限"""

    exit_code = 4

    def __init__(self, points: int, limit: int):
        super().__init__(f"网格点数 {points} 超过上限 {limit}", {'points': points, 'limit': limit})
        self.points = points
        self.limit = limit


class ErrorCollector:
    """错误收集器，用于聚合扫描点上的失败"""

    def __init__(self):
        self.errors: List[Exception] = []
        self.warnings: List[Dict[str, Any]] = []
        self.point_errors: Dict[str, List[Exception]] = {}

    def add_error(self, error: Exception, point: Optional[str] = None):
        """
        添加一个错误到收集器

        Args:
            error: 错误对象（通常为 DfrcError，任务异常终止时为原始异常）
            point: 关联的扫描点标识
        """
        self.errors.append(error)
        key = point or 'unknown'
        self.point_errors.setdefault(key, []).append(error)

    def add_warning(self, message: str, point: Optional[str] = None,
                    details: Optional[Dict[str, Any]] = None):
        """添加警告"""
        self.warnings.append({
            'timestamp': time.time(),
            'message': message,
            'point': point,
            'details': details or {},
        })
        logger.warning(f"Warning: {message}")

    def get_error_summary(self) -> Dict[str, Any]:
        """
        获取错误汇总

        Returns:
            Dict[str, Any]: 错误汇总信息
        """
        error_types: Dict[str, int] = {}
        for error in self.errors:
            name = type(error).__name__
            error_types[name] = error_types.get(name, 0) + 1

        return {
            'total_errors': len(self.errors),
            'total_warnings': len(self.warnings),
            'points_with_errors': len(self.point_errors),
            'error_types': error_types,
            'points_affected': list(self.point_errors.keys()),
        }

    def generate_error_report(self) -> Dict[str, Any]:
        """生成详细的错误报告"""
        from datetime import datetime

        return {
            'report_generated': datetime.now().isoformat(),
            'summary': self.get_error_summary(),
            'errors_by_point': {
                point: [
                    {
                        'timestamp': getattr(error, 'timestamp', None),
                        'message': getattr(error, 'message', str(error)),
                        'error_type': type(error).__name__,
                        'details': getattr(error, 'details', {}),
                    }
                    for error in errors
                ]
                for point, errors in self.point_errors.items()
            },
            'warnings': list(self.warnings),
        }

    def has_errors(self) -> bool:
        """检查是否有错误"""
        return len(self.errors) > 0

    def has_warnings(self) -> bool:
        """检查是否有警告"""
        return len(self.warnings) > 0

    def clear(self):
        """清除所有错误和警告"""
        self.errors.clear()
        self.warnings.clear()
        self.point_errors.clear()
