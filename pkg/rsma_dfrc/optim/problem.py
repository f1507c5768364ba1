"""
问题描述模块
把系统配置、信道、量化、雷达参考和符号打包成一个优化问题，
并提供优化器与穷举基线共用的可行性检查和初始预编码
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional

import numpy as np

from rsma_dfrc.conic.program import ConeProgram, svec_dim, svec_index
from rsma_dfrc.core.comms import RateReport, ensemble_rates, total_power
from rsma_dfrc.core.models import (
    ChannelSet, PrecoderBlock, QuantConfig, RfSelection, SystemConfig,
    draw_symbols, element_power, enforce_element_power, stream_power,
)
from rsma_dfrc.core.radar import RadarReference, covariance_model, similarity
from rsma_dfrc.utils.config import AlgorithmConfig
from rsma_dfrc.utils.errors import InvalidArgumentError, InvalidStateError

logger = logging.getLogger(__name__)

SCHEMES = ('rsma', 'sdma')

# 可行性检查的默认容差
FEASIBILITY_TOL = 1e-6


@dataclass(eq=False)
class DfrcProblem:
    """
    一次能效优化的全部输入

    symbols 为每个符号时刻的流符号 s_l（形状 (L, K+1)），
    未给出时由 rng 生成单位功率QPSK符号。
    """
    cfg: SystemConfig
    channels: ChannelSet
    quant: QuantConfig
    ref: RadarReference
    r_th: float = 0.0
    scheme: str = 'rsma'
    symbols: Optional[np.ndarray] = None
    algo: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    rng: Optional[np.random.Generator] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError('scheme', self.scheme, f"可选 {SCHEMES}")
        if self.r_th < 0:
            raise InvalidArgumentError('r_th', self.r_th, "和速率门限不能为负")
        if self.channels.n_tx != self.cfg.n_tx or self.quant.n_tx != self.cfg.n_tx:
            raise InvalidArgumentError('n_tx', (self.channels.n_tx, self.quant.n_tx), f"应为 {self.cfg.n_tx}")
        if self.channels.n_users != self.cfg.n_users:
            raise InvalidArgumentError('n_users', self.channels.n_users, f"应为 {self.cfg.n_users}")
        if self.ref.u.shape != (self.cfg.n_tx, self.cfg.n_tx):
            raise InvalidArgumentError('ref', self.ref.u.shape, "参考矩阵维度与天线数不一致")
        if self.rng is None:
            self.rng = np.random.default_rng(0)
        if self.symbols is None:
            self.symbols = draw_symbols(self.cfg.block_len, self.cfg.n_streams, self.rng)
        self.symbols = np.asarray(self.symbols, dtype=complex)
        if self.symbols.shape != (self.cfg.block_len, self.cfg.n_streams):
            raise InvalidArgumentError('symbols', self.symbols.shape,
                                       f"应为 ({self.cfg.block_len}, {self.cfg.n_streams})")

    @property
    def is_sdma(self) -> bool:
        return self.scheme == 'sdma'

    @property
    def columns(self) -> List[int]:
        """参与优化的流列；SDMA关闭第0列（公共流）"""
        start = 1 if self.is_sdma else 0
        return list(range(start, self.cfg.n_streams))

    @property
    def n_samples(self) -> int:
        return max(self.channels.n_samples, 1)

    def with_channels(self, channels: ChannelSet) -> 'DfrcProblem':
        return replace(self, channels=channels)

    def with_ref(self, ref: RadarReference) -> 'DfrcProblem':
        return replace(self, ref=ref)

    def rates(self, p: PrecoderBlock, sel: RfSelection) -> RateReport:
        return ensemble_rates(p, self.channels, self.quant, sel, self.cfg.noise_power)

    def power(self, sel: RfSelection) -> float:
        return total_power(sel, self.quant, self.cfg)

    def ee(self, p: PrecoderBlock, sel: RfSelection) -> float:
        p_tot = self.power(sel)
        if p_tot <= 0:
            raise InvalidStateError('total_power', f"总功耗为 {p_tot}")
        return self.rates(p, sel).sum_rate / p_tot

    def similarity(self, p: PrecoderBlock, sel: RfSelection) -> float:
        return similarity(covariance_model(p, self.quant, sel), self.ref)

    def polish(self, p: PrecoderBlock, sel: RfSelection) -> PrecoderBlock:
        """公共速率分配取上限 c_cap（SDMA取0）"""
        if self.is_sdma:
            return p.with_c(np.zeros(p.block_len))
        return p.with_c(self.rates(p, sel).c_cap)


class Validator:
    """可行性检查：所有松弛量均为违反量，≤ 容差视为满足"""

    SLACKS = ('common_rate', 'element_power', 'stream_power', 'similarity', 'sum_rate', 'sdma_common')

    def __init__(self, problem: DfrcProblem, tol: float = FEASIBILITY_TOL):
        self.problem = problem
        self.tol = tol

    def slacks(self, p: PrecoderBlock, sel: RfSelection) -> Dict[str, float]:
        """
        计算各约束的违反量

        Returns:
            Dict[str, float]: 约束名 → 违反量（功率为相对值）
        """
        prob = self.problem
        p_ant = prob.cfg.p_ant
        report = prob.rates(p, sel)
        active = sel.lam > 0
        elem = element_power(p, prob.quant)[:, active]
        rows = stream_power(p, prob.quant)[:, active]
        out = {
            'common_rate': float(max(np.max(p.c - report.c_cap), 0.0)),
            'element_power': float(np.max(np.abs(elem - p_ant)) / p_ant) if elem.size else 0.0,
            'stream_power': float(max(np.max(rows - p_ant), 0.0) / p_ant) if rows.size else 0.0,
            'similarity': 0.0,
            'sum_rate': float(max(prob.r_th - report.sum_rate, 0.0)),
            'sdma_common': 0.0,
        }
        if prob.ref.constrained:
            out['similarity'] = float(max(prob.similarity(p, sel) - prob.ref.tau, 0.0))
        if prob.is_sdma:
            out['sdma_common'] = float(np.max(np.abs(p.p[:, :, 0])) + np.max(p.c))
        return out

    def check(self, p: PrecoderBlock, sel: RfSelection) -> bool:
        return self.is_feasible(self.slacks(p, sel))

    def is_feasible(self, slacks: Dict[str, float]) -> bool:
        return all(v <= self.tol for v in slacks.values())

    def worst(self, slacks: Dict[str, float]) -> str:
        return max(slacks, key=slacks.get)


def mean_channel(channels: ChannelSet) -> np.ndarray:
    """样本平均信道（完美CSIT时即真实信道）"""
    return np.mean(channels.ensemble(), axis=0)


def init_precoders(problem: DfrcProblem, sel: Optional[RfSelection] = None) -> PrecoderBlock:
    """
    初始预编码

    私有流取各用户信道方向（匹配滤波），公共流取堆叠信道矩阵的主左奇异向量，
    再逐天线缩放到逐元素功率约束，公共速率分配取 c_cap。

    Args:
        problem: 优化问题
        sel: 射频链选择（默认全部激活）

    Returns:
        PrecoderBlock: 满足功率约束的初始预编码
    """
    cfg = problem.cfg
    sel = sel or RfSelection.all_on(cfg.n_tx)
    h = mean_channel(problem.channels)
    base = np.zeros((cfg.n_tx, cfg.n_streams), dtype=complex)
    if not problem.is_sdma:
        u, _, _ = np.linalg.svd(h.T, full_matrices=False)
        base[:, 0] = u[:, 0]
    norms = np.linalg.norm(h, axis=1)
    norms[norms == 0] = 1.0
    base[:, 1:] = (h / norms[:, None]).T
    p = np.repeat(base[None], cfg.block_len, axis=0) * math.sqrt(cfg.p_ant)
    block = PrecoderBlock(p, np.zeros(cfg.block_len), problem.symbols)
    block = enforce_element_power(block, problem.quant, cfg.p_ant, problem.columns)
    block = problem.polish(block, sel)
    logger.debug(f"初始预编码: EE={problem.ee(block, sel):.6f}, 激活 {sel.n_active}")
    return block


def add_similarity_constraint(prog: ConeProgram, re_c: np.ndarray, re_0: np.ndarray,
                              im_c: np.ndarray, im_0: np.ndarray, ref: RadarReference):
    """
    向锥规划加入 ‖R − U‖² ≤ τ

    D = R − U 的实部为 re_c·x + re_0，虚部为 im_c·x + im_0（系数形状 (N, N, n_vars)）。
    Frobenius距离写成二阶锥；谱范数写成 √τI ∓ D ⪰ 0 的实嵌入；
    只看对角线时退化为对角元上的二阶锥或逐元素上下界。
    """
    n = re_0.shape[0]
    root_tau = math.sqrt(ref.tau)
    diag = range(n)
    if ref.diag_only and ref.norm == 'spectral':
        for a in diag:
            prog.add_nonneg(np.vstack([-re_c[a, a], re_c[a, a]]),
                            [root_tau - re_0[a, a], root_tau + re_0[a, a]], name=f'radar_{a}')
        return
    if ref.norm == 'frobenius':
        rows = [np.zeros(prog.n_vars)]
        consts = [root_tau]
        for a in diag:
            rows.append(re_c[a, a])
            consts.append(re_0[a, a])
        if not ref.diag_only:
            for a in range(n):
                for b in range(a):
                    rows.extend([math.sqrt(2.0) * re_c[a, b], math.sqrt(2.0) * im_c[a, b]])
                    consts.extend([math.sqrt(2.0) * re_0[a, b], math.sqrt(2.0) * im_0[a, b]])
        prog.add_soc(np.vstack(rows), np.array(consts), name='radar')
        return
    order = 2 * n
    idx = svec_index(order)
    for sign in (1.0, -1.0):
        f_mat = np.zeros((svec_dim(order), prog.n_vars))
        f_vec = np.zeros(svec_dim(order))
        for (r, c), k in idx.items():
            scale = 1.0 if r == c else math.sqrt(2.0)
            if (r < n) == (c < n):
                a, b = r % n, c % n
                coef, const = -sign * re_c[a, b], -sign * re_0[a, b] + (root_tau if a == b else 0.0)
            else:
                a, b = r - n, c
                coef, const = -sign * im_c[a, b], -sign * im_0[a, b]
            f_mat[k] = scale * coef
            f_vec[k] = scale * const
        prog.add_psd(f_mat, f_vec, name=f'radar_{"upper" if sign > 0 else "lower"}')
