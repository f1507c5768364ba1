"""
单元测试: 错误处理
"""

import pytest

from rsma_dfrc.utils.errors import (
    ConfigError, DfrcError, ErrorCollector, GridTooLargeError, InfeasibleError, InvalidArgumentError,
    RecoveryError, SolverError,
)


class TestExitCodes:
    """退出码测试"""

    @pytest.mark.parametrize("error,code", [
        (InvalidArgumentError('n_tx', 0), 4),
        (ConfigError('a.cfg', 'n_tx', "未知的配置键"), 4),
        (GridTooLargeError(10 ** 8, 10 ** 7), 4),
        (SolverError('ipm', 'stalled', iteration=3), 3),
        (InfeasibleError('init'), 2),
        (RecoveryError(20), 3),
        (DfrcError("其他错误"), 3),
    ])
    def test_exit_code(self, error, code):
        """测试各异常对应的退出码"""
        assert error.exit_code == code
        assert isinstance(error, DfrcError)

    def test_details(self):
        """测试异常附带的上下文"""
        err = SolverError('admm', 'max_iterations', iteration=5, context={'r_norm': 0.1})
        assert err.details == {'solver': 'admm', 'status': 'max_iterations', 'iteration': 5, 'r_norm': 0.1}
        assert '迭代=5' in err.message
        cfg_err = ConfigError('a.cfg', 'bits', "值非法")
        assert 'bits' in cfg_err.message and 'a.cfg' in cfg_err.message


class TestErrorCollector:
    """错误收集器测试"""

    def setup_method(self):
        """测试前置设置"""
        self.collector = ErrorCollector()

    def test_summary(self):
        """测试按类型与扫描点汇总"""
        self.collector.add_error(InfeasibleError('init'), point='0/0')
        self.collector.add_error(InfeasibleError('init'), point='0/1')
        self.collector.add_error(SolverError('ipm', 'stalled'), point='0/1')
        self.collector.add_warning("超出时间预算", point='1/0')
        summary = self.collector.get_error_summary()
        assert summary['total_errors'] == 3
        assert summary['total_warnings'] == 1
        assert summary['points_with_errors'] == 2
        assert summary['error_types'] == {'InfeasibleError': 2, 'SolverError': 1}
        assert self.collector.has_errors() and self.collector.has_warnings()

    def test_report_and_clear(self):
        """测试详细报告与清除"""
        self.collector.add_error(GridTooLargeError(100, 10))
        report = self.collector.generate_error_report()
        assert report['errors_by_point']['unknown'][0]['error_type'] == 'GridTooLargeError'
        assert report['errors_by_point']['unknown'][0]['details'] == {'points': 100, 'limit': 10}
        self.collector.clear()
        assert not self.collector.has_errors()
        assert self.collector.get_error_summary()['total_errors'] == 0
