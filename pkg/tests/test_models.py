"""
单元测试: 系统模型
测试量化模型、功耗模型、信道与预编码数据结构以及逐元素功率缩放
"""

import math

import numpy as np
import pytest

from rsma_dfrc.core.models import (
    ChannelSet, PrecoderBlock, QuantConfig, RfSelection, SystemConfig, complex_normal,
    dac_power, draw_csit_samples, draw_symbols, element_power, enforce_element_power,
    quant_delta, quant_noise_var, quantize_signal, rescale_row, stream_power,
)
from rsma_dfrc.utils.errors import InvalidArgumentError


class TestQuantization:
    """量化模型测试"""

    def test_delta_formula(self):
        """测试 δ 的闭式表达"""
        for b in (1, 2, 4, 8):
            expected = math.sqrt(1.0 - math.pi * math.sqrt(3.0) / 2.0 * 2.0 ** (-2 * b))
            assert quant_delta(b) == pytest.approx(expected, abs=1e-15)

    def test_delta_increases_with_bits(self):
        """测试比特数越多失真越小"""
        deltas = [quant_delta(b) for b in range(1, 12)]
        assert all(a < b for a, b in zip(deltas, deltas[1:]))
        assert deltas[-1] < 1.0

    def test_invalid_bits(self):
        """测试非法比特数"""
        with pytest.raises(InvalidArgumentError):
            quant_delta(0)

    def test_dac_power_identity(self):
        """测试 P(δ(b)) = P_DAC·2^b"""
        for b in range(1, 21):
            assert dac_power(quant_delta(b), 1e-3) == pytest.approx(1e-3 * 2 ** b, rel=1e-12)

    def test_dac_power_continuous(self):
        """测试非整数比特对应的 δ 按连续公式计算"""
        delta = math.sqrt(1.0 - math.pi * math.sqrt(3.0) / 2.0 * 2.0 ** (-5.0))
        assert dac_power(delta, 1e-3) == pytest.approx(1e-3 * 2 ** 2.5, rel=1e-9)
        assert dac_power(0.5, 1.0) == pytest.approx(math.sqrt(math.pi * math.sqrt(3.0) / 2.0 / 0.75), rel=1e-12)

    def test_dac_power_zero(self):
        """测试 P_DAC = 0 时功耗为零"""
        assert dac_power(quant_delta(3), 0.0) == 0.0

    def test_noise_variance_forms(self):
        """测试两种量化噪声方差形式"""
        d = quant_delta(2)
        assert quant_noise_var(d, 'squared') == pytest.approx(d ** 2 * (1 - d ** 2) ** 2)
        assert quant_noise_var(d, 'standard') == pytest.approx(d ** 2 * (1 - d ** 2))
        with pytest.raises(InvalidArgumentError):
            quant_noise_var(d, 'other')

    def test_from_bits(self):
        """测试由比特数构造量化配置"""
        quant = QuantConfig.from_bits([1, 4, 8])
        assert quant.n_tx == 3
        assert np.all(np.diff(quant.delta) > 0)
        assert np.all(quant.sigma_e >= 0)
        with pytest.raises(InvalidArgumentError):
            QuantConfig.from_bits(4)
        with pytest.raises(InvalidArgumentError):
            QuantConfig.from_bits([4, 4], n_tx=3)

    def test_ideal_quantizer(self, rng):
        """测试理想量化器不改变信号"""
        quant = QuantConfig.ideal(3)
        x = complex_normal(rng, (5, 3))
        y = quantize_signal(x, quant, RfSelection.all_on(3), rng)
        np.testing.assert_allclose(y, x)

    def test_quantize_signal_masks_inactive(self, rng):
        """测试未激活链输出为零"""
        quant = QuantConfig.from_bits(3, 3)
        sel = RfSelection(np.array([1.0, 0.0, 1.0]))
        y = quantize_signal(complex_normal(rng, (4, 3)), quant, sel, rng)
        assert np.all(y[:, 1] == 0)


class TestSystemConfig:
    """系统配置测试"""

    def test_defaults(self, table1):
        """测试默认参数表"""
        assert table1.n_tx == 8
        assert table1.n_users == 2
        assert table1.block_len == 10
        assert table1.n_streams == 3
        assert table1.p_ant == pytest.approx(0.125)

    def test_with_replaces_fields(self, table1):
        """测试修改字段返回新配置"""
        cfg = table1.with_(n_tx=4)
        assert cfg.n_tx == 4
        assert table1.n_tx == 8

    @pytest.mark.parametrize("changes", [
        {'n_tx': 0}, {'p_ant': -1.0}, {'eta_pa': 0.0}, {'sigma_ce': 1.0},
    ])
    def test_invalid_values(self, changes):
        """测试非法参数"""
        with pytest.raises(InvalidArgumentError):
            SystemConfig(**changes)


class TestDataStructures:
    """信道、选择与预编码数据结构测试"""

    def test_selection_requires_active_chain(self):
        """测试全零选择被拒绝"""
        with pytest.raises(InvalidArgumentError):
            RfSelection(np.zeros(3))

    def test_selection_properties(self):
        """测试硬选择属性与提升矩阵"""
        sel = RfSelection(np.array([1.0, 0.0, 1.0]))
        assert sel.is_hard
        assert sel.n_active == 2
        np.testing.assert_array_equal(sel.upsilon, np.outer(sel.lam, sel.lam))
        assert not RfSelection(np.array([0.5, 1.0])).is_hard

    def test_selection_range(self):
        """测试超出 [0, 1] 的选择被拒绝"""
        with pytest.raises(InvalidArgumentError):
            RfSelection(np.array([1.5, 0.0]))

    def test_precoder_shapes(self, rng):
        """测试预编码块维度检查"""
        s = draw_symbols(2, 3, rng)
        block = PrecoderBlock(np.zeros((2, 4, 3)), np.zeros(2), s)
        assert (block.block_len, block.n_tx, block.n_users) == (2, 4, 2)
        with pytest.raises(InvalidArgumentError):
            PrecoderBlock(np.zeros((2, 4, 3)), np.zeros(3), s)
        with pytest.raises(InvalidArgumentError):
            PrecoderBlock(np.zeros((2, 4, 3)), -np.ones(2), s)

    def test_symbols_unit_power(self, rng):
        """测试QPSK符号为单位功率"""
        s = draw_symbols(10, 3, rng)
        np.testing.assert_allclose(np.abs(s), 1.0)

    def test_channel_set_ensemble(self, rng):
        """测试无样本时集合为真实信道"""
        h = complex_normal(rng, (2, 4))
        channels = ChannelSet(h=h)
        assert channels.n_samples == 0
        assert channels.ensemble().shape == (1, 2, 4)
        with pytest.raises(InvalidArgumentError):
            ChannelSet(h=h, samples=np.zeros((3, 2, 5)))

    def test_csit_samples_without_error(self, rng):
        """测试 σ_ce = 0 时样本等于估计"""
        h_hat = complex_normal(rng, (2, 4))
        channels = draw_csit_samples(h_hat, 0.0, 5, rng)
        assert channels.n_samples == 5
        np.testing.assert_allclose(channels.samples, np.broadcast_to(h_hat, (5, 2, 4)))

    def test_csit_samples_invalid(self, rng):
        """测试非法样本参数"""
        h_hat = complex_normal(rng, (1, 2))
        with pytest.raises(InvalidArgumentError):
            draw_csit_samples(h_hat, 0.1, 0, rng)
        with pytest.raises(InvalidArgumentError):
            draw_csit_samples(h_hat, 1.5, 2, rng)


class TestElementPower:
    """逐元素功率缩放测试"""

    def setup_method(self):
        """测试前置设置"""
        self.rng = np.random.default_rng(5)
        self.quant = QuantConfig.from_bits(3, 4)
        self.s = draw_symbols(3, 3, self.rng)
        self.p = PrecoderBlock(complex_normal(self.rng, (3, 4, 3)), np.zeros(3), self.s)

    def test_enforce_element_power(self):
        """测试缩放后每个元素功率等于 P_ant 且流功率不超过 P_ant"""
        block = enforce_element_power(self.p, self.quant, 0.125)
        np.testing.assert_allclose(element_power(block, self.quant), 0.125, rtol=1e-10)
        assert np.all(stream_power(block, self.quant) <= 0.125 * (1 + 1e-10))

    def test_enforce_with_columns(self):
        """测试未参与的列被置零"""
        block = enforce_element_power(self.p, self.quant, 0.125, columns=[1, 2])
        assert np.all(block.p[:, :, 0] == 0)
        np.testing.assert_allclose(element_power(block, self.quant), 0.125, rtol=1e-10)

    def test_rescale_row_keeps_phase(self):
        """测试缩放保持 row·s 的相位"""
        row = self.p.p[0, 0]
        out = rescale_row(row, self.s[0], 2.0)
        before = np.dot(row, self.s[0])
        after = np.dot(out, self.s[0])
        assert abs(after) == pytest.approx(2.0)
        assert np.angle(after) == pytest.approx(np.angle(before))
        assert np.linalg.norm(out) <= 2.0 + 1e-12
