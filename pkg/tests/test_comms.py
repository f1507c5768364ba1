"""
单元测试: 通信模型
测试SINR、速率、样本平均速率、WMSE变换与能效
"""

import math

import numpy as np
import pytest

from rsma_dfrc.core.comms import (
    RateReport, energy_efficiency, mmse_state, rates, saa_rates, sinr, total_power, wmse_quadratics,
)
from rsma_dfrc.core.models import (
    ChannelSet, PrecoderBlock, QuantConfig, RfSelection, SystemConfig, complex_normal,
    draw_channels, draw_symbols,
)
from rsma_dfrc.utils.errors import InvalidArgumentError

LN2 = math.log(2.0)


class TestRates:
    """速率计算测试"""

    def setup_method(self):
        """测试前置设置"""
        self.rng = np.random.default_rng(11)
        self.cfg = SystemConfig(n_tx=4, n_users=2, block_len=3)
        self.channels = draw_channels(self.cfg, self.rng)
        self.quant = QuantConfig.from_bits(4, self.cfg.n_tx)
        self.sel = RfSelection.all_on(self.cfg.n_tx)
        self.p = PrecoderBlock(complex_normal(self.rng, (3, 4, 3), 0.05), np.zeros(3),
                               draw_symbols(3, 3, self.rng))

    def test_sinr_matches_rates(self):
        """测试单点SINR与速率矩阵一致"""
        report = rates(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        value = sinr(self.p, self.channels.h, self.quant, self.sel, 1, 2, 'private', self.cfg.noise_power)
        assert math.log2(1 + value) == pytest.approx(report.r_p[1, 2])
        value = sinr(self.p, self.channels.h, self.quant, self.sel, 0, 0, 'common', self.cfg.noise_power)
        assert math.log2(1 + value) == pytest.approx(report.r_c[0, 0])

    def test_sinr_invalid_arguments(self):
        """测试越界序号与非法流类型"""
        with pytest.raises(InvalidArgumentError):
            sinr(self.p, self.channels.h, self.quant, self.sel, 5, 0, 'private', 1e-3)
        with pytest.raises(InvalidArgumentError):
            sinr(self.p, self.channels.h, self.quant, self.sel, 0, 0, 'other', 1e-3)

    def test_common_allocation_capped(self):
        """测试公共速率分配截断到 c_cap"""
        big = self.p.with_c(np.full(3, 100.0))
        report = rates(big, self.channels, self.quant, self.sel, self.cfg.noise_power)
        np.testing.assert_allclose(report.c_used, report.c_cap)
        expected = np.mean(report.c_cap + np.sum(report.r_p, axis=0))
        assert report.sum_rate == pytest.approx(expected)

    def test_zero_allocation(self):
        """测试公共速率分配为零时和速率只含私有速率"""
        report = rates(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        assert report.sum_rate == pytest.approx(np.mean(np.sum(report.r_p, axis=0)))
        assert isinstance(report, RateReport)

    def test_inactive_chain_ignored(self):
        """测试关闭的射频链不影响速率"""
        sel = RfSelection(np.array([1.0, 1.0, 0.0, 1.0]))
        p2 = self.p.p.copy()
        p2[:, 2, :] *= 10.0
        a = rates(self.p, self.channels, self.quant, sel, self.cfg.noise_power)
        b = rates(self.p.with_p(p2), self.channels, self.quant, sel, self.cfg.noise_power)
        np.testing.assert_allclose(a.r_p, b.r_p)
        np.testing.assert_allclose(a.r_c, b.r_c)

    def test_saa_with_identical_samples(self):
        """测试样本全部相同时样本平均速率等于真实信道速率"""
        samples = np.repeat(self.channels.h[None], 3, axis=0)
        saa = saa_rates(self.p, ChannelSet(h=self.channels.h, samples=samples), self.quant, self.sel,
                        self.cfg.noise_power)
        exact = rates(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        assert saa.sum_rate == pytest.approx(exact.sum_rate)
        np.testing.assert_allclose(saa.r_p, exact.r_p)

    def test_saa_requires_samples(self):
        """测试没有样本时报错"""
        with pytest.raises(InvalidArgumentError):
            saa_rates(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)


class TestWmse:
    """WMSE变换测试"""

    def setup_method(self):
        """测试前置设置"""
        self.rng = np.random.default_rng(3)
        self.cfg = SystemConfig(n_tx=3, n_users=2, block_len=2)
        self.channels = draw_channels(self.cfg, self.rng)
        self.quant = QuantConfig.from_bits(3, self.cfg.n_tx)
        self.sel = RfSelection(np.array([1.0, 0.6, 1.0]))
        self.p = PrecoderBlock(complex_normal(self.rng, (2, 3, 3), 0.1), np.zeros(2),
                               draw_symbols(2, 3, self.rng))

    def test_optimal_weights_recover_rates(self):
        """测试最优均衡器与权重下 ξ + R·ln2 = 1"""
        state = mmse_state(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        report = rates(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        np.testing.assert_allclose(state.xi_p[0] + LN2 * report.r_p, 1.0, atol=1e-9)
        np.testing.assert_allclose(state.xi_c[0] + LN2 * report.r_c, 1.0, atol=1e-9)

    def test_quadratics_match_state(self):
        """测试二次型在当前点的取值等于增广WMSE"""
        state = mmse_state(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        private, common = wmse_quadratics(state, self.channels, self.quant, self.sel,
                                          self.cfg.noise_power, self.cfg.n_streams, self.cfg.block_len)
        for l in range(self.cfg.block_len):
            vec = self.p.p[l].T.reshape(-1)
            assert private[l].value(vec) == pytest.approx(np.sum(state.xi_p[0, :, l]), abs=1e-9)
            for k in range(self.cfg.n_users):
                assert common[l][k].value(vec) == pytest.approx(state.xi_c[0, k, l], abs=1e-9)

    def test_quadratic_is_upper_bound(self):
        """测试固定权重时二次型给出速率下界"""
        state = mmse_state(self.p, self.channels, self.quant, self.sel, self.cfg.noise_power)
        private, _ = wmse_quadratics(state, self.channels, self.quant, self.sel,
                                     self.cfg.noise_power, self.cfg.n_streams, self.cfg.block_len)
        other = self.p.with_p(complex_normal(self.rng, (2, 3, 3), 0.1))
        report = rates(other, self.channels, self.quant, self.sel, self.cfg.noise_power)
        for l in range(self.cfg.block_len):
            vec = other.p[l].T.reshape(-1)
            bound = (self.cfg.n_users - private[l].value(vec)) / LN2
            assert bound <= np.sum(report.r_p[:, l]) + 1e-9


class TestEnergyEfficiency:
    """功耗与能效测试"""

    def test_total_power_formula(self):
        """测试总功耗的各项"""
        cfg = SystemConfig(n_tx=2, n_users=1, block_len=1)
        quant = QuantConfig.from_bits(4, 2)
        sel = RfSelection(np.array([1.0, 0.0]))
        expected = (cfg.p_ant / cfg.eta_pa + cfg.p_circ + cfg.p_syn + cfg.p_dac * 2 ** 4
                    + cfg.p_int * 2 * cfg.s_dac * 4 + cfg.p_bb)
        assert total_power(sel, quant, cfg) == pytest.approx(expected, rel=1e-12)

    def test_power_grows_with_active_chains(self, table1):
        """测试激活链越多功耗越大"""
        quant = QuantConfig.from_bits(4, table1.n_tx)
        powers = [total_power(RfSelection(np.r_[np.ones(n), np.zeros(table1.n_tx - n)]), quant, table1)
                  for n in range(1, table1.n_tx + 1)]
        assert all(a < b for a, b in zip(powers, powers[1:]))

    def test_energy_efficiency(self, rng):
        """测试能效等于和速率除以总功耗"""
        cfg = SystemConfig(n_tx=2, n_users=1, block_len=2)
        channels = draw_channels(cfg, rng)
        quant = QuantConfig.from_bits(4, 2)
        sel = RfSelection.all_on(2)
        p = PrecoderBlock(complex_normal(rng, (2, 2, 2), 0.1), np.zeros(2), draw_symbols(2, 2, rng))
        report = rates(p, channels, quant, sel, cfg.noise_power)
        ee = energy_efficiency(p, channels, quant, sel, cfg)
        assert ee == pytest.approx(report.sum_rate / total_power(sel, quant, cfg))
