"""
通信指标模块
计算SINR、速率、公共速率上限、和速率、MMSE均衡器、增广加权MSE、总功耗与能效
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from dataclasses_json import config, dataclass_json

from rsma_dfrc.core.models import (
    ChannelSet, PrecoderBlock, QuantConfig, RfSelection, SystemConfig,
)
from rsma_dfrc.utils.errors import InvalidArgumentError, InvalidStateError
from rsma_dfrc.utils.helpers import decode_real, encode_real

logger = logging.getLogger(__name__)

_ARRAY = config(encoder=encode_real, decoder=decode_real)


@dataclass_json
@dataclass
class RateReport:
    """速率报告（单位 bit/s/Hz），r_c 与 r_p 形状为 (K, L)"""
    r_c: np.ndarray = field(metadata=_ARRAY)
    r_p: np.ndarray = field(metadata=_ARRAY)
    c_cap: np.ndarray = field(metadata=_ARRAY)
    sum_rate: float = 0.0
    c_used: Optional[np.ndarray] = field(default=None, metadata=_ARRAY)


@dataclass
class WmseState:
    """
    MMSE均衡器、MSE、权重与增广WMSE

    所有数组形状为 (M, K, L)，M 为信道样本数（完美CSIT时 M=1）。
    变换中的对数取自然对数，因此 ξ_opt = 1 − R·ln2（R 单位为 bit），
    且对任意固定的均衡器与权重，(1 − ξ)/ln2 都是速率的下界。
    """
    g_c: np.ndarray
    g_p: np.ndarray
    eps_c: np.ndarray
    eps_p: np.ndarray
    w_c: np.ndarray
    w_p: np.ndarray
    xi_c: np.ndarray
    xi_p: np.ndarray


def effective_channels(h: np.ndarray, quant: QuantConfig, sel: RfSelection) -> np.ndarray:
    """等效信道 ΛΔh_k，使得 h_kᴴΔΛp = eff_kᴴ p；h 形状 (..., K, N_t)"""
    return (quant.delta * sel.lam) * h


def quant_noise_terms(h: np.ndarray, quant: QuantConfig, sel: RfSelection) -> np.ndarray:
    """h_kᴴΛΣΛh_k，形状 (..., K)"""
    return np.sum((sel.lam ** 2 * quant.sigma_e) * np.abs(h) ** 2, axis=-1)


def _stream_gains(p: PrecoderBlock, h: np.ndarray, quant: QuantConfig, sel: RfSelection) -> np.ndarray:
    """G[..., k, l, j] = h_kᴴΔΛp_{j,l}"""
    eff = effective_channels(h, quant, sel)
    return np.einsum('...kn,lnj->...klj', np.conj(eff), p.p)


def _check_dims(p: PrecoderBlock, h: np.ndarray, quant: QuantConfig, sel: RfSelection):
    n = p.n_tx
    if h.shape[-1] != n or quant.n_tx != n or len(sel.lam) != n:
        raise InvalidArgumentError('dims', (h.shape, quant.n_tx, len(sel.lam), n), "天线维度不一致")
    if h.shape[-2] != p.n_users:
        raise InvalidArgumentError('n_users', h.shape[-2], f"预编码用户数为 {p.n_users}")


def _sinr_arrays(p: PrecoderBlock, h: np.ndarray, quant: QuantConfig, sel: RfSelection,
                 noise_power: float):
    """返回公共/私有SINR，形状 (..., K, L)"""
    _check_dims(p, h, quant, sel)
    gains = np.abs(_stream_gains(p, h, quant, sel)) ** 2
    base = noise_power + quant_noise_terms(h, quant, sel)[..., None]
    private_total = np.sum(gains[..., 1:], axis=-1)
    n_users = p.n_users
    own = gains[..., np.arange(n_users), :, np.arange(n_users) + 1]
    # 高级索引把用户维移到最前
    own = np.moveaxis(own, 0, -2)
    sinr_c = gains[..., 0] / (base + private_total)
    sinr_p = own / (base + private_total - own)
    return sinr_c, sinr_p


def sinr(p: PrecoderBlock, h_k: np.ndarray, quant: QuantConfig, sel: RfSelection,
         k: int, l: int, which: str, noise_power: float) -> float:
    """
    单个用户、单个符号的SINR

    Args:
        p: 预编码块
        h_k: 全部用户信道 (K, N_t)
        quant: 量化配置
        sel: 射频链选择
        k: 用户序号
        l: 符号序号
        which: 'common' 或 'private'
        noise_power: σ_n²

    Returns:
        float: SINR ≥ 0
    """
    h = np.atleast_2d(np.asarray(h_k, dtype=complex))
    if not 0 <= k < h.shape[0] or not 0 <= l < p.block_len:
        raise InvalidArgumentError('index', (k, l), "用户或符号序号越界")
    if which not in ('common', 'private'):
        raise InvalidArgumentError('which', which, "可选 common/private")
    sinr_c, sinr_p = _sinr_arrays(p, h, quant, sel, noise_power)
    return float((sinr_c if which == 'common' else sinr_p)[k, l])


def _report(p: PrecoderBlock, r_c: np.ndarray, r_p: np.ndarray) -> RateReport:
    c_cap = np.min(r_c, axis=0)
    c_used = np.minimum(p.c, c_cap)
    sum_rate = float(np.mean(c_used + np.sum(r_p, axis=0)))
    return RateReport(r_c=r_c, r_p=r_p, c_cap=c_cap, sum_rate=sum_rate, c_used=c_used)


def rates(p: PrecoderBlock, channels: ChannelSet, quant: QuantConfig, sel: RfSelection,
          noise_power: float) -> RateReport:
    """
    公共/私有速率（bit/s/Hz）和和速率

    Args:
        p: 预编码块
        channels: 信道集合（使用真实信道 h）
        quant: 量化配置
        sel: 射频链选择
        noise_power: σ_n²

    Returns:
        RateReport: 速率报告
    """
    sinr_c, sinr_p = _sinr_arrays(p, channels.h, quant, sel, noise_power)
    return _report(p, np.log2(1.0 + sinr_c), np.log2(1.0 + sinr_p))


def saa_rates(p: PrecoderBlock, samples: ChannelSet, quant: QuantConfig, sel: RfSelection,
              noise_power: float) -> RateReport:
    """样本平均速率：逐样本速率取算术平均，c_cap 取平均公共速率的最小值"""
    if samples.samples is None or samples.n_samples < 1:
        raise InvalidArgumentError('samples', None, "样本集合为空")
    sinr_c, sinr_p = _sinr_arrays(p, samples.samples, quant, sel, noise_power)
    r_c = np.mean(np.log2(1.0 + sinr_c), axis=0)
    r_p = np.mean(np.log2(1.0 + sinr_p), axis=0)
    return _report(p, r_c, r_p)


def ensemble_rates(p: PrecoderBlock, channels: ChannelSet, quant: QuantConfig, sel: RfSelection,
                   noise_power: float) -> RateReport:
    """有样本时用样本平均速率，否则用真实信道速率"""
    if channels.samples is not None:
        return saa_rates(p, channels, quant, sel, noise_power)
    return rates(p, channels, quant, sel, noise_power)


def mmse_state(p: PrecoderBlock, channels: ChannelSet, quant: QuantConfig, sel: RfSelection,
               noise_power: float) -> WmseState:
    """
    最优MMSE均衡器、MSE、权重 ω=1/ε 与增广WMSE ξ = ωε − ln ω

    信道集合含样本时逐样本计算（M 维在最前）。
    """
    h = channels.ensemble()
    _check_dims(p, h, quant, sel)
    raw = _stream_gains(p, h, quant, sel)
    gains = np.abs(raw) ** 2
    base = noise_power + quant_noise_terms(h, quant, sel)[..., None]
    total = base + np.sum(gains, axis=-1)
    n_users = p.n_users
    idx = np.arange(n_users)
    own_raw = np.moveaxis(raw[..., idx, :, idx + 1], 0, -2)
    own = np.abs(own_raw) ** 2
    t_c = total
    t_p = total - gains[..., 0]
    g_c = np.conj(raw[..., 0]) / t_c
    g_p = np.conj(own_raw) / t_p
    eps_c = 1.0 - gains[..., 0] / t_c
    eps_p = 1.0 - own / t_p
    w_c = 1.0 / eps_c
    w_p = 1.0 / eps_p
    xi_c = w_c * eps_c - np.log(w_c)
    xi_p = w_p * eps_p - np.log(w_p)
    return WmseState(g_c=g_c, g_p=g_p, eps_c=eps_c, eps_p=eps_p,
                     w_c=w_c, w_p=w_p, xi_c=xi_c, xi_p=xi_p)


@dataclass
class MseQuadratic:
    """
    复二次型 f(p) = pᴴHp − 2Re(qᴴp) + const

    p 为按列堆叠的 vec(P_l)，长度 N_t·(K+1)。
    """
    hessian: np.ndarray
    linear: np.ndarray
    const: float

    def value(self, vec: np.ndarray) -> float:
        return float(np.real(np.vdot(vec, self.hessian @ vec)) - 2 * np.real(np.vdot(self.linear, vec)) + self.const)

    def __add__(self, other: 'MseQuadratic') -> 'MseQuadratic':
        return MseQuadratic(self.hessian + other.hessian, self.linear + other.linear, self.const + other.const)

    def scaled(self, factor: float) -> 'MseQuadratic':
        return MseQuadratic(self.hessian * factor, self.linear * factor, self.const * factor)


def _mse_form(eff: np.ndarray, g: complex, omega: float, base: float, stream: int,
              streams: np.ndarray, n_tx: int, n_cols: int) -> MseQuadratic:
    """ω·ε(p) − ln ω，其中 ε = |g|²(base + Σ_{j∈streams}|effᴴp_j|²) − 2Re(g effᴴp_stream) + 1"""
    dim = n_tx * n_cols
    hess = np.zeros((dim, dim), dtype=complex)
    block = omega * abs(g) ** 2 * np.outer(eff, np.conj(eff))
    for j in streams:
        sl = slice(j * n_tx, (j + 1) * n_tx)
        hess[sl, sl] += block
    lin = np.zeros(dim, dtype=complex)
    lin[stream * n_tx:(stream + 1) * n_tx] = omega * np.conj(g) * eff
    const = omega * (abs(g) ** 2 * base + 1.0) - np.log(omega)
    return MseQuadratic(hess, lin, float(const))


def wmse_quadratics(state: WmseState, channels: ChannelSet, quant: QuantConfig, sel: RfSelection,
                    noise_power: float, n_streams: int, block_len: int):
    """
    固定均衡器与权重时，组装每个符号 l 的二次型

    Returns:
        (private, common): private[l] 为 Σ_k ξ_{k,l} 的样本平均二次型；
        common[l][k] 为 ξ_{c,k,l} 的样本平均二次型。
    """
    h = channels.ensemble()
    eff = effective_channels(h, quant, sel)
    base = noise_power + quant_noise_terms(h, quant, sel)
    n_samples, n_users, n_tx = h.shape
    all_streams = np.arange(n_streams)
    private_streams = np.arange(1, n_streams)
    private = []
    common = []
    for l in range(block_len):
        acc = None
        com_l = []
        for k in range(n_users):
            com_k = None
            for m in range(n_samples):
                qp = _mse_form(eff[m, k], state.g_p[m, k, l], state.w_p[m, k, l], base[m, k],
                               k + 1, private_streams, n_tx, n_streams)
                qc = _mse_form(eff[m, k], state.g_c[m, k, l], state.w_c[m, k, l], base[m, k],
                               0, all_streams, n_tx, n_streams)
                acc = qp if acc is None else acc + qp
                com_k = qc if com_k is None else com_k + qc
            com_l.append(com_k.scaled(1.0 / n_samples))
        private.append(acc.scaled(1.0 / n_samples))
        common.append(com_l)
    return private, common


def total_power(sel: RfSelection, quant: QuantConfig, cfg: SystemConfig) -> float:
    """
    总功耗
    tr(Λ)P_ant/η + tr(Λ)P_circ + P_syn + tr(ΛP_Δ) + p_int·2·S_DAC·tr(ΛB) + P_BB
    """
    lam = sel.lam
    tr_lam = float(np.sum(lam))
    p_delta = float(np.dot(lam, quant.dac_powers(cfg.p_dac)))
    interface = cfg.p_int * 2.0 * cfg.s_dac * float(np.dot(lam, quant.bits))
    return (tr_lam * cfg.p_ant / cfg.eta_pa + tr_lam * cfg.p_circ + cfg.p_syn
            + p_delta + interface + cfg.p_bb)


def energy_efficiency(p: PrecoderBlock, channels: ChannelSet, quant: QuantConfig,
                      sel: RfSelection, cfg: SystemConfig) -> float:
    """
    能效 = 和速率 / 总功耗（bit/J/Hz），公共速率分配截断到 c_cap

    信道集合含样本时使用样本平均速率。
    """
    p_tot = total_power(sel, quant, cfg)
    if p_tot <= 0:
        raise InvalidStateError('total_power', f"总功耗为 {p_tot}")
    report = ensemble_rates(p, channels, quant, sel, cfg.noise_power)
    return report.sum_rate / p_tot
