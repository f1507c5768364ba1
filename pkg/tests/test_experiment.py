"""
单元测试: 扫描实验
"""

import math
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest

from rsma_dfrc.core.models import RfSelection, SystemConfig
from rsma_dfrc.harness.experiment import (
    Experiment, average_detection, build_problem, load_experiment, run_experiment, run_trial,
)
from rsma_dfrc.optim.problem import init_precoders
from rsma_dfrc.utils.config import AlgorithmConfig
from rsma_dfrc.utils.errors import ConfigError, ErrorCollector, InvalidArgumentError


def _small_experiment(**kwargs) -> Experiment:
    base = dict(base=SystemConfig(n_tx=2, n_users=1, block_len=1),
                algo=AlgorithmConfig(eps_a=1e-3, eps_r=1e-3, max_outer=2, max_admm=10, max_sca=2, n_rand=4),
                mode='tracking', r_th=0.0, trials=1, seed=5)
    base.update(kwargs)
    return Experiment(**base)


class TestExperiment:
    """实验描述测试"""

    def test_points_cartesian(self):
        """测试扫描点为笛卡尔积"""
        exp = _small_experiment(sweep=[('bits', [2, 4]), ('tau', [0.5, 1.0, 2.0])])
        points = exp.points()
        assert len(points) == 6
        assert points[0] == {'bits': 2.0, 'tau': 0.5}
        assert points[-1] == {'bits': 4.0, 'tau': 2.0}

    def test_no_sweep(self):
        """测试没有扫描参数时只有一个点"""
        exp = _small_experiment()
        assert exp.points() == [{}]
        params = exp.params_at({})
        assert params['bits'] == 4
        assert params['tau'] == math.inf
        assert params['sigma_ce'] == exp.base.sigma_ce

    def test_params_at(self):
        """测试扫描点覆盖默认参数"""
        params = _small_experiment().params_at({'bits': 3.0, 'r_th': 0.5})
        assert params['bits'] == 3 and isinstance(params['bits'], int)
        assert params['r_th'] == 0.5

    def test_diag_only_default(self):
        """测试对角约束默认随模式决定"""
        assert _small_experiment(mode='detection').diag_only is True
        assert _small_experiment(mode='tracking').diag_only is False

    @pytest.mark.parametrize("kwargs", [
        {'mode': 'imaging'},
        {'scheme': 'noma'},
        {'csit': 'partial'},
        {'trials': 0},
        {'samples': 0},
        {'sweep': [('n_tx', [2.0])]},
        {'sweep': [('tau', [2.0, 1.0])]},
        {'sweep': [('tau', [])]},
        {'sweep': [('tau', [1.0, math.inf])]},
    ])
    def test_validation(self, kwargs):
        """测试非法实验描述"""
        with pytest.raises(InvalidArgumentError):
            _small_experiment(**kwargs)

    def test_common_random_numbers(self):
        """测试同一试验在各扫描点上信道与符号相同"""
        exp = _small_experiment(sweep=[('bits', [2, 6])])
        a, b = (build_problem(exp, pt, 0) for pt in exp.points())
        np.testing.assert_array_equal(a.channels.h, b.channels.h)
        np.testing.assert_array_equal(a.symbols, b.symbols)
        assert a.quant.bits[0] == 2 and b.quant.bits[0] == 6
        other = build_problem(exp, exp.points()[0], 1)
        assert not np.allclose(a.channels.h, other.channels.h)

    def test_imperfect_channels(self):
        """测试不完美CSIT时问题携带信道估计"""
        problem = build_problem(_small_experiment(csit='imperfect'), {}, 0)
        assert problem.channels.h_hat is not None

    def test_average_detection_range(self):
        """测试平均检测概率在 [p_f, 1] 内"""
        exp = _small_experiment(mode='detection')
        problem = build_problem(exp, {}, 0)
        block = init_precoders(problem)
        p_d = average_detection(block, problem, RfSelection.all_on(2), exp.alpha_r, exp.p_f)
        assert exp.p_f <= p_d <= 1.0


class TestLoadExperiment:
    """实验文件测试"""

    def test_load(self, temp_dir):
        """测试读取扫描与实验键"""
        path = f"{temp_dir}/exp.conf"
        with open(path, 'w', encoding='utf-8') as f:
            f.write("# 跟踪实验\n"
                    "mode = tracking\n"
                    "thetas = -0.5,0.5\n"
                    "n_tx = 4\n"
                    "trials = 2\n"
                    "sweep.tau = 1:3:1\n")
        exp = load_experiment(path)
        assert exp.mode == 'tracking'
        assert exp.thetas == [-0.5, 0.5]
        assert exp.base.n_tx == 4
        assert exp.trials == 2
        assert exp.sweep == [('tau', [1.0, 2.0, 3.0])]

    def test_overrides(self, temp_dir):
        """测试命令行覆盖"""
        path = f"{temp_dir}/exp.conf"
        with open(path, 'w', encoding='utf-8') as f:
            f.write("mode = detection\n")
        exp = load_experiment(path, scheme='sdma', workers=None)
        assert exp.scheme == 'sdma'

    def test_unknown_key(self, temp_dir):
        """测试未知键"""
        path = f"{temp_dir}/exp.conf"
        with open(path, 'w', encoding='utf-8') as f:
            f.write("antennas = 4\n")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_bad_sweep(self, temp_dir):
        """测试无法解析或非法的扫描"""
        path = f"{temp_dir}/exp.conf"
        with open(path, 'w', encoding='utf-8') as f:
            f.write("sweep.tau = a:b\n")
        with pytest.raises(ConfigError):
            load_experiment(path)
        with open(path, 'w', encoding='utf-8') as f:
            f.write("sweep.n_users = 1,2\n")
        with pytest.raises(ConfigError):
            load_experiment(path)

    def test_missing_file(self, temp_dir):
        """测试文件不存在"""
        with pytest.raises(ConfigError):
            load_experiment(f"{temp_dir}/missing.conf")


class TestTrialErrors:
    """任务异常处理测试"""

    def test_linalg_error_recorded_in_row(self):
        """测试数值失败记为 failed 行"""
        exp = _small_experiment()
        with patch('rsma_dfrc.harness.experiment.build_problem',
                   side_effect=np.linalg.LinAlgError("Singular matrix")):
            row = run_trial(exp, 0, {}, 0)
        assert row.status == 'failed'
        assert row.error.startswith('LinAlgError')

    def test_programming_error_propagates(self):
        """测试程序错误不被当作失败行，而是记入收集器并抛出"""
        exp = _small_experiment(sweep=[('bits', [2, 4])])
        collector = ErrorCollector()
        with patch('rsma_dfrc.harness.experiment.build_problem', side_effect=ValueError("shape mismatch")):
            with pytest.raises(ValueError, match="shape mismatch"):
                run_experiment(exp, show_progress=False, error_collector=collector)
        summary = collector.get_error_summary()
        assert summary['error_types'] == {'ValueError': 1}
        assert summary['points_affected'] == ['0/0']
        report = collector.generate_error_report()
        assert report['errors_by_point']['0/0'][0]['message'] == "shape mismatch"


@pytest.mark.slow
class TestRunExperiment:
    """实验运行测试"""

    def test_run(self):
        """测试每行成功且能效可由保存的解复现"""
        exp = _small_experiment(sweep=[('bits', [2, 4])])
        result = run_experiment(exp, show_progress=False)
        assert len(result.rows) == 2
        assert [(r.point, r.trial) for r in result.rows] == [(0, 0), (1, 0)]
        for row in result.rows:
            assert row.ok, row.error
            assert row.crb is not None and row.crb > 0
            assert row.p_d is None
            assert result.recompute_ee(row) == pytest.approx(row.ee, rel=1e-9)
        summary = result.summary()
        assert summary['rows'] == 2 and summary['failed'] == 0
        assert result.errors['total_errors'] == 0

    def test_failures_recorded(self):
        """测试求解失败的任务被记录而不中断扫描"""
        exp = _small_experiment(r_th=1000.0)
        result = run_experiment(exp, show_progress=False)
        assert len(result.failed) == 1
        assert 'InfeasibleError' in result.failed[0].error
        assert result.errors['total_errors'] == 1


class TestShippedExperiments:
    """随项目提供的实验文件测试"""

    @pytest.mark.parametrize("name,mode,n_points", [
        ('detection.cfg', 'detection', 30),
        ('tracking.cfg', 'tracking', 15),
        ('imperfect_csit.cfg', 'detection', 4),
    ])
    def test_load(self, name, mode, n_points):
        """测试实验文件可读取且扫描点数正确"""
        exp = load_experiment(Path(__file__).resolve().parent.parent / 'experiments' / name)
        assert exp.mode == mode
        assert len(exp.points()) == n_points
