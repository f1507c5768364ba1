"""
非完美CSIT模块
用条件信道样本的样本平均近似各速率期望，再运行联合交替优化
"""

import logging
from typing import Optional

import numpy as np

from rsma_dfrc.core.models import ChannelSet, draw_csit_samples
from rsma_dfrc.optim.ao import ao_full
from rsma_dfrc.optim.problem import DfrcProblem
from rsma_dfrc.optim.report import SolveReport
from rsma_dfrc.utils.errors import InvalidArgumentError
from rsma_dfrc.utils.resource_manager import PointBudget

logger = logging.getLogger(__name__)


def saa_channels(h_hat: np.ndarray, sigma_ce: float, m: int, rng: np.random.Generator) -> ChannelSet:
    """
    生成样本集合；所有样本相同（σ_ce = 0）时退化为单个样本

    Returns:
        ChannelSet: h 与 h_hat 为估计信道，samples 形状 (M, K, N_t)
    """
    channels = draw_csit_samples(h_hat, sigma_ce, m, rng)
    if m > 1 and np.allclose(channels.samples, channels.samples[:1], rtol=0.0, atol=1e-15):
        logger.info("信道样本全部相同，按单样本处理")
        channels = ChannelSet(h=channels.h, h_hat=channels.h_hat, samples=channels.samples[:1])
    return channels


def ao_full_saa(problem: DfrcProblem, m: int, rng: Optional[np.random.Generator] = None,
                budget: Optional[PointBudget] = None) -> SolveReport:
    """
    非完美CSIT下的联合优化

    速率、均衡器/权重与选择子问题中的矩阵都逐样本计算后取平均。

    Args:
        problem: 优化问题，信道取 h_hat（缺省时取 h）作为估计
        m: 样本数 M ≥ 1
        rng: 样本生成器（默认使用问题自带的生成器）
        budget: 时间预算

    Returns:
        SolveReport: 报告中的速率为样本平均速率
    """
    if m < 1:
        raise InvalidArgumentError('M', m, "样本数必须 ≥ 1")
    estimate = problem.channels.h_hat if problem.channels.h_hat is not None else problem.channels.h
    channels = saa_channels(estimate, problem.cfg.sigma_ce, m, rng or problem.rng)
    logger.info(f"样本平均近似: M={channels.n_samples}, σ_ce={problem.cfg.sigma_ce}")
    report = ao_full(problem.with_channels(channels), budget=budget)
    report.stats['samples'] = channels.n_samples
    return report
