"""
单元测试: ADMM预编码
测试状态打包、单步迭代与固定选择下的AO-ADMM
"""

import math

import numpy as np
import pytest

from rsma_dfrc.core.models import RfSelection
from rsma_dfrc.core.radar import reference_detection
from rsma_dfrc.optim.admm import (
    admm_step, ao_admm, build_wmse_model, initial_state, pack_precoders, unpack_precoders,
)
from rsma_dfrc.optim.problem import Validator, init_precoders
from rsma_dfrc.optim.report import STATUSES
from rsma_dfrc.utils.errors import InfeasibleError
from tests.conftest import make_problem


class TestAdmmState:
    """ADMM状态测试"""

    def test_pack_layout(self, small_problem):
        """测试行向量布局与公共速率单位"""
        sel = RfSelection.all_on(small_problem.cfg.n_tx)
        block = init_precoders(small_problem, sel)
        rows = pack_precoders(block)
        cfg = small_problem.cfg
        assert rows.shape == (cfg.block_len, 1 + 2 * cfg.n_tx * cfg.n_streams)
        np.testing.assert_allclose(rows[:, 0], math.log(2.0) * block.c)
        back = unpack_precoders(rows, block.s)
        np.testing.assert_allclose(back.p, block.p)
        np.testing.assert_allclose(back.c, block.c)

    def test_initial_state(self, small_problem):
        """测试初始状态 u = v 且 w = 0"""
        block = init_precoders(small_problem)
        state = initial_state(block, 1.0)
        np.testing.assert_array_equal(state.u, state.v)
        assert np.all(state.w == 0)
        assert state.iteration == 0
        assert not state.converged(1e-3)

    def test_single_step(self, small_problem):
        """测试一次迭代更新残差与计数"""
        sel = RfSelection.all_on(small_problem.cfg.n_tx)
        block = init_precoders(small_problem, sel)
        model = build_wmse_model(small_problem, block, sel)
        state = admm_step(initial_state(block, small_problem.algo.zeta), small_problem, sel, model)
        assert state.iteration == 1
        assert state.r >= 0 and state.q >= 0
        np.testing.assert_allclose(state.w, state.v - state.u, atol=1e-12)

    def test_wmse_model_targets(self, small_cfg, fast_algo):
        """测试和速率目标按符号分摊后的平均值等于门限"""
        problem = make_problem(small_cfg, fast_algo, r_th=0.5)
        sel = RfSelection.all_on(small_cfg.n_tx)
        block = init_precoders(problem, sel)
        model = build_wmse_model(problem, block, sel)
        assert model.targets is not None
        assert np.mean(model.targets) == pytest.approx(math.log(2.0) * 0.5)
        assert len(model.private) == small_cfg.block_len


class TestAoAdmm:
    """固定选择下的交替优化测试"""

    def _check(self, problem, report):
        block, sel = report.precoder_block(), report.rf_selection()
        assert report.status in STATUSES
        assert report.is_monotone()
        assert len(report.trace) == len(report.ee_trace)
        assert Validator(problem).check(block, sel)
        assert report.ee == pytest.approx(problem.ee(block, sel), rel=1e-10)
        assert report.ee >= report.ee_trace[0] - 1e-9

    def test_all_on(self, small_problem):
        """测试全部激活时EE单调且结果可行"""
        self._check(small_problem, ao_admm(small_problem))

    def test_fixed_selection(self, small_problem):
        """测试只激活一条链"""
        sel = RfSelection(np.array([1.0, 0.0]))
        report = ao_admm(small_problem, sel)
        self._check(small_problem, report)
        np.testing.assert_array_equal(report.selection, [1.0, 0.0])
        assert report.n_active == 1

    def test_sdma(self, small_cfg, fast_algo):
        """测试SDMA结果没有公共流"""
        problem = make_problem(small_cfg, fast_algo, scheme='sdma')
        report = ao_admm(problem)
        self._check(problem, report)
        assert np.all(report.precoders[:, :, 0] == 0)
        assert np.all(report.common_alloc == 0)

    def test_loose_radar_constraint(self, small_cfg, fast_algo):
        """测试宽松的相似度约束下结果满足约束"""
        ref = reference_detection(small_cfg, tau=1.0)
        problem = make_problem(small_cfg, fast_algo, ref=ref)
        report = ao_admm(problem)
        self._check(problem, report)
        assert report.similarity <= 1.0 + 1e-6

    def test_infeasible_start(self, small_cfg, fast_algo):
        """测试不可达的和速率门限"""
        problem = make_problem(small_cfg, fast_algo, r_th=1000.0)
        with pytest.raises(InfeasibleError):
            ao_admm(problem)
