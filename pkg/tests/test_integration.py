#!/usr/bin/env python3
"""
集成测试: 端到端优化流程
从实例生成、联合优化到报告落盘与图数据导出
"""

import math
import shutil
import tempfile
from pathlib import Path

import pytest

from rsma_dfrc.core.models import SystemConfig
from rsma_dfrc.harness.experiment import Experiment, run_experiment
from rsma_dfrc.harness.figures import FIGURE_COLUMNS, emit_figure_data, load_figure_csv
from rsma_dfrc.optim.ao import ao_full
from rsma_dfrc.optim.problem import Validator
from rsma_dfrc.optim.report import SolveReport
from rsma_dfrc.oracle.search import exhaustive_selection, selection_key
from rsma_dfrc.utils.config import AlgorithmConfig
from tests.conftest import make_problem


@pytest.mark.slow
class TestIntegration:
    """端到端集成测试"""

    def setup_method(self):
        """测试前置设置"""
        self.output_dir = Path(tempfile.mkdtemp())
        self.cfg = SystemConfig(n_tx=2, n_users=1, block_len=1)
        self.algo = AlgorithmConfig(eps_a=1e-3, eps_r=1e-3, max_outer=3, max_admm=15, max_sca=3, n_rand=4)

    def teardown_method(self):
        """测试后清理"""
        shutil.rmtree(self.output_dir, ignore_errors=True)

    def test_report_round_trip(self):
        """测试报告落盘后重新计算的EE与记录一致"""
        problem = make_problem(self.cfg, self.algo, seed=21)
        report = ao_full(problem)
        path = report.save_json(self.output_dir / 'report.json')
        loaded = SolveReport.load_json(path)
        block, sel = loaded.precoder_block(), loaded.rf_selection()
        assert Validator(problem).check(block, sel)
        assert problem.ee(block, sel) == pytest.approx(report.ee, rel=1e-9)
        assert loaded.ee_trace == pytest.approx(report.ee_trace)

    def test_oracle_covers_ao_selection(self):
        """测试穷举基线覆盖联合优化选中的射频链组合"""
        problem = make_problem(self.cfg, self.algo, seed=21)
        report = ao_full(problem)
        oracle = exhaustive_selection(problem, solver='admm')
        assert oracle.feasible
        assert Validator(problem).check(oracle.precoder_block(), oracle.rf_selection())
        chosen = oracle.candidate_ee[selection_key(report.selection)]
        assert math.isfinite(chosen)
        assert oracle.best_ee >= chosen

    def test_sweep_to_figure(self):
        """测试检测模式扫描导出帕累托数据"""
        exp = Experiment(base=self.cfg, algo=self.algo, mode='detection', sweep=[('bits', [2, 4])],
                         r_th=0.0, trials=1, seed=4)
        result = run_experiment(exp, show_progress=False)
        assert not result.failed
        for row in result.rows:
            assert 0.0 < row.p_d <= 1.0
            assert result.recompute_ee(row) == pytest.approx(row.ee, rel=1e-9)
        # 默认门限 10 bit/s/Hz 对该小实例不可达，放宽后输出非空
        path = emit_figure_data(result, 'fig2', self.output_dir, threshold=0.0)[0]
        assert path.read_text(encoding='utf-8').splitlines()[0] == ",".join(FIGURE_COLUMNS)
        data = load_figure_csv(path)
        assert 1 <= len(data) <= 2
        assert {d['b'] for d in data} <= {2, 4}

    def test_imperfect_csit(self):
        """测试不完美CSIT下记录的EE为样本平均EE"""
        exp = Experiment(base=self.cfg, algo=self.algo, mode='tracking', csit='imperfect', samples=2,
                         r_th=0.0, trials=1, seed=4)
        result = run_experiment(exp, show_progress=False)
        row = result.rows[0]
        assert row.ok, row.error
        assert result.recompute_ee(row) == pytest.approx(row.ee, rel=1e-9)
