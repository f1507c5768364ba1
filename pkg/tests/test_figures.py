"""
单元测试: 图数据输出
使用手工构造的实验结果，不运行优化
"""

import math

import numpy as np
import pytest

from rsma_dfrc.core.models import SystemConfig
from rsma_dfrc.harness.experiment import Experiment, ExperimentResult, ExperimentRow
from rsma_dfrc.harness.figures import (
    FIGURE_COLUMNS, emit_figure_data, load_figure_csv, pareto_front, write_curve,
)
from rsma_dfrc.utils.errors import InvalidArgumentError


def _row(point, trial, ee, sum_rate, tau=None, p_d=None, crb=None, n_active=2, status='converged'):
    params = {} if tau is None else {'tau': tau}
    return ExperimentRow(point=point, trial=trial, params=params, scheme='rsma', mode='detection',
                         csit='perfect', bits=4, status=status, ee=ee, sum_rate=sum_rate,
                         n_active=n_active, p_d=p_d, crb=crb)


def _result(mode, rows, sweep=None) -> ExperimentResult:
    exp = Experiment(base=SystemConfig(n_tx=2, n_users=1, block_len=1), mode=mode, sweep=sweep or [])
    return ExperimentResult(experiment=exp, rows=rows)


class TestParetoFront:
    """帕累托前沿测试"""

    def test_dominated_removed(self):
        """测试被支配的点被去掉且按 x 升序"""
        points = [{'x': 0.9, 'ee': 1.0}, {'x': 0.5, 'ee': 2.0}, {'x': 0.4, 'ee': 1.5}, {'x': 0.95, 'ee': 0.5}]
        front = pareto_front(points, 'x', x_higher_better=True)
        assert [p['x'] for p in front] == [0.5, 0.9, 0.95]

    def test_lower_is_better(self):
        """测试 x 越小越好时的支配关系"""
        points = [{'x': 1.0, 'ee': 1.0}, {'x': 2.0, 'ee': 1.0}, {'x': 3.0, 'ee': 2.0}]
        front = pareto_front(points, 'x', x_higher_better=False)
        assert [p['x'] for p in front] == [1.0, 3.0]

    def test_duplicates_kept(self):
        """测试完全相同的点互不支配"""
        points = [{'x': 1.0, 'ee': 1.0}, {'x': 1.0, 'ee': 1.0}]
        assert len(pareto_front(points, 'x', True)) == 2


class TestEmitFigureData:
    """图CSV测试"""

    def test_fig2(self, temp_dir):
        """测试试验平均、侧约束筛选与前沿"""
        rows = [
            _row(0, 0, ee=2.0, sum_rate=12.0, tau=1.0, p_d=0.5),
            _row(0, 1, ee=4.0, sum_rate=12.0, tau=1.0, p_d=0.7),
            _row(1, 0, ee=2.5, sum_rate=11.0, tau=2.0, p_d=0.8),
            _row(1, 1, ee=2.5, sum_rate=11.0, tau=2.0, p_d=0.8),
            _row(2, 0, ee=9.0, sum_rate=4.0, tau=3.0, p_d=0.9),
            _row(2, 1, ee=9.0, sum_rate=4.0, tau=3.0, p_d=0.9),
        ]
        result = _result('detection', rows, sweep=[('tau', [1.0, 2.0, 3.0])])
        paths = emit_figure_data(result, 'fig2', temp_dir)
        assert [p.name for p in paths] == ['fig2.csv']
        data = load_figure_csv(paths[0])
        # 点2的和速率低于门限被筛掉；点0与点1互不支配
        assert [(d['x'], d['y']) for d in data] == [(pytest.approx(0.6), 3.0), (0.8, 2.5)]
        assert data[0]['scheme'] == 'rsma' and data[0]['b'] == 4 and data[0]['csit'] == 'perfect'

    def test_threshold_override(self, temp_dir):
        """测试覆盖侧约束门限"""
        rows = [_row(0, 0, ee=9.0, sum_rate=4.0, tau=1.0, p_d=0.9)]
        result = _result('detection', rows, sweep=[('tau', [1.0])])
        data = load_figure_csv(emit_figure_data(result, 'fig2', temp_dir, threshold=3.0)[0])
        assert len(data) == 1

    def test_failed_rows_ignored(self, temp_dir):
        """测试失败的行不参与平均"""
        rows = [_row(0, 0, ee=2.0, sum_rate=12.0, p_d=0.5),
                _row(0, 1, ee=math.nan, sum_rate=math.nan, status='failed')]
        data = load_figure_csv(emit_figure_data(_result('detection', rows), 'fig2', temp_dir)[0])
        assert [(d['x'], d['y']) for d in data] == [(0.5, 2.0)]

    def test_empty_results(self, temp_dir):
        """测试没有可用点时只写表头"""
        result = _result('detection', [])
        path = emit_figure_data(result, 'fig4', temp_dir)[0]
        assert path.read_text(encoding='utf-8') == ",".join(FIGURE_COLUMNS) + "\n"
        assert load_figure_csv(path) == []

    def test_fig5a(self, temp_dir):
        """测试EE按各 τ 的实际值写出，累计最大值单独成列，CRB单独成文件"""
        rows = [
            _row(0, 0, ee=3.0, sum_rate=6.0, tau=1.0, crb=0.3),
            _row(1, 0, ee=2.0, sum_rate=6.0, tau=2.0, crb=0.2),
            _row(2, 0, ee=4.0, sum_rate=6.0, tau=3.0, crb=0.1),
        ]
        result = _result('tracking', rows, sweep=[('tau', [1.0, 2.0, 3.0])])
        ee_path, crb_path = emit_figure_data(result, 'fig5a', temp_dir)
        assert ee_path.name == 'fig5a_ee.csv' and crb_path.name == 'fig5a_crb.csv'
        ee = load_figure_csv(ee_path)
        assert [d['y'] for d in ee] == [3.0, 2.0, 4.0]
        assert [d['y_envelope'] for d in ee] == [3.0, 3.0, 4.0]
        assert [d['y'] for d in load_figure_csv(crb_path)] == [0.3, 0.2, 0.1]

    def test_unknown_figure(self, temp_dir):
        """测试未知的图"""
        with pytest.raises(InvalidArgumentError):
            emit_figure_data(_result('detection', []), 'fig9', temp_dir)

    def test_mode_mismatch(self, temp_dir):
        """测试实验模式与图不匹配"""
        with pytest.raises(InvalidArgumentError):
            emit_figure_data(_result('detection', []), 'fig3', temp_dir)


class TestCurves:
    """曲线CSV测试"""

    def test_write_curve(self, temp_dir):
        """测试写出并读回方向图曲线"""
        thetas = np.linspace(-1.0, 1.0, 5)
        path = write_curve(f"{temp_dir}/curve.csv", thetas, np.cos(thetas))
        data = load_figure_csv(path)
        assert len(data) == 5
        assert data[2] == {'theta_rad': 0.0, 'value': 1.0}

    def test_not_a_figure(self, temp_dir):
        """测试列名不匹配的CSV"""
        path = f"{temp_dir}/other.csv"
        with open(path, 'w', encoding='utf-8') as f:
            f.write("a,b\n1,2\n")
        with pytest.raises(InvalidArgumentError):
            load_figure_csv(path)
