"""
RSMA-DFRC 核心模型
==================

- **models**: 系统配置、DAC量化、信道、射频链选择与预编码块
- **comms**:  SINR、速率、MMSE/WMSE、功耗与能效
- **radar**:  发射协方差、参考矩阵、相似度、检测概率、CRB与方向图
"""

from rsma_dfrc.core.comms import RateReport, energy_efficiency, rates, saa_rates, total_power
from rsma_dfrc.core.models import (
    ChannelSet, PrecoderBlock, QuantConfig, RfSelection, SystemConfig,
    dac_power, quant_delta, quant_noise_var,
)
from rsma_dfrc.core.radar import RadarReference, covariance_model, detection_probability, similarity

__all__ = [
    'SystemConfig', 'QuantConfig', 'ChannelSet', 'RfSelection', 'PrecoderBlock',
    'quant_delta', 'quant_noise_var', 'dac_power',
    'RateReport', 'rates', 'saa_rates', 'total_power', 'energy_efficiency',
    'RadarReference', 'covariance_model', 'similarity', 'detection_probability',
]
