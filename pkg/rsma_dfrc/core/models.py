"""
数据模型模块
定义系统配置、量化、信道、射频链选择与预编码的数据结构，以及由它们导出的量化/功率公式
"""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from rsma_dfrc.utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

# π·√3/2，出现在AQNM失真因子和DAC功耗公式中
_AQNM_CONST = math.pi * math.sqrt(3.0) / 2.0
# 由 δ 反解比特数时允许的偏差（b ≤ 20 时浮点误差约 1e-4 比特）
_BITS_SNAP_TOL = 1e-3

VARIANCE_FORMS = ('squared', 'standard')


@dataclass(frozen=True)
class SystemConfig:
    """系统配置（功率单位均为瓦特）"""
    n_tx: int = 8
    n_users: int = 2
    block_len: int = 10
    p_ant: float = 0.125
    noise_power: float = 1e-3
    eta_pa: float = 0.39
    p_circ: float = 1.0
    p_syn: float = 2.0
    p_bb: float = 1.0
    p_dac: float = 1e-3
    p_int: float = 25e-3
    s_dac: float = 0.125
    d_norm: float = 0.5
    sigma_ce: float = 0.2

    def __post_init__(self):
        for name in ('n_tx', 'n_users', 'block_len'):
            if int(getattr(self, name)) < 1:
                raise InvalidArgumentError(name, getattr(self, name), "必须 ≥ 1")
        for name in ('p_ant', 'noise_power', 'p_circ', 'p_syn', 'p_bb', 'p_dac', 'p_int', 's_dac'):
            if getattr(self, name) < 0:
                raise InvalidArgumentError(name, getattr(self, name), "功率参数不能为负")
        if not 0.0 < self.eta_pa <= 1.0:
            raise InvalidArgumentError('eta_pa', self.eta_pa, "必须在 (0, 1] 内")
        if not 0.0 <= self.sigma_ce < 1.0:
            raise InvalidArgumentError('sigma_ce', self.sigma_ce, "必须在 [0, 1) 内")

    @classmethod
    def table1(cls) -> 'SystemConfig':
        """默认仿真参数表"""
        return cls()

    def with_(self, **changes) -> 'SystemConfig':
        """返回修改部分字段后的新配置"""
        return replace(self, **changes)

    @property
    def n_streams(self) -> int:
        return self.n_users + 1


def quant_delta(b: Union[int, float]) -> float:
    """
    计算b比特DAC的线性失真因子 δ

    Args:
        b: 量化比特数（≥1）

    Returns:
        float: δ ∈ (0, 1)
    """
    if b < 1:
        raise InvalidArgumentError('b', b, "量化比特数必须 ≥ 1")
    return math.sqrt(1.0 - _AQNM_CONST * 2.0 ** (-2.0 * b))


def quant_noise_var(delta: float, form: str = 'squared') -> float:
    """
    量化噪声方差

    'squared' 形式为 δ²(1−δ²)²，'standard' 形式为 δ²(1−δ²)。

    Args:
        delta: 失真因子 δ ∈ (0, 1)
        form: 方差形式

    Returns:
        float: σ_e ≥ 0
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError('delta', delta, "δ 必须在 (0, 1) 内")
    if form not in VARIANCE_FORMS:
        raise InvalidArgumentError('form', form, f"可选: {VARIANCE_FORMS}")
    d2 = delta * delta
    if form == 'squared':
        return d2 * (1.0 - d2) ** 2
    return d2 * (1.0 - d2)


def dac_power(delta: float, p_dac: float) -> float:
    """
    DAC功耗 P(δ) = P_DAC·sqrt(π√3 / (2(1−δ²)))

    1−δ² 在 b 较大时只剩少数有效位，因此反解出的比特数与整数相差不超过
    _BITS_SNAP_TOL 时直接返回 P_DAC·2^b，δ = quant_delta(b) 时结果与 P_DAC·2^b 逐位一致；
    其余 δ 按连续公式计算。
    """
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError('delta', delta, "δ 必须在 (0, 1) 内（δ→1 时功耗发散）")
    if p_dac == 0:
        return 0.0
    one_minus = (1.0 - delta) * (1.0 + delta)
    bits = 0.5 * math.log2(_AQNM_CONST / one_minus)
    nearest = round(bits)
    if nearest >= 1 and abs(bits - nearest) <= _BITS_SNAP_TOL:
        return p_dac * 2.0 ** nearest
    return p_dac * math.sqrt(_AQNM_CONST / one_minus)


@dataclass(frozen=True, eq=False)
class QuantConfig:
    """每条射频链的DAC量化配置"""
    bits: np.ndarray
    delta: np.ndarray
    sigma_e: np.ndarray
    variance_form: str = 'squared'

    def __post_init__(self):
        n = len(self.bits)
        if len(self.delta) != n or len(self.sigma_e) != n:
            raise InvalidArgumentError('quant', n, "bits/delta/sigma_e 长度不一致")
        if np.any(self.delta <= 0) or np.any(self.delta > 1):
            raise InvalidArgumentError('delta', self.delta, "δ 必须在 (0, 1] 内")
        if np.any(self.sigma_e < 0):
            raise InvalidArgumentError('sigma_e', self.sigma_e, "方差不能为负")

    @classmethod
    def from_bits(cls, bits: Union[int, Sequence[int]], n_tx: Optional[int] = None,
                  variance_form: str = 'squared') -> 'QuantConfig':
        """
        由比特数构造量化配置

        Args:
            bits: 全部链相同的比特数，或每条链的比特数序列
            n_tx: 天线数（bits为标量时必须给出）
            variance_form: 噪声方差形式

        Returns:
            QuantConfig: 量化配置
        """
        if np.isscalar(bits):
            if n_tx is None:
                raise InvalidArgumentError('n_tx', n_tx, "标量比特数需要天线数")
            b = np.full(n_tx, int(bits), dtype=int)
        else:
            b = np.asarray(bits, dtype=int)
            if n_tx is not None and len(b) != n_tx:
                raise InvalidArgumentError('bits', bits, f"长度应为 {n_tx}")
        delta = np.array([quant_delta(int(x)) for x in b])
        sigma = np.array([quant_noise_var(d, variance_form) for d in delta])
        return cls(bits=b, delta=delta, sigma_e=sigma, variance_form=variance_form)

    @classmethod
    def ideal(cls, n_tx: int) -> 'QuantConfig':
        """无量化误差的极限情形（δ=1, σ_e=0）"""
        return cls(bits=np.full(n_tx, 32, dtype=int), delta=np.ones(n_tx),
                   sigma_e=np.zeros(n_tx))

    @property
    def n_tx(self) -> int:
        return len(self.bits)

    def dac_powers(self, p_dac: float) -> np.ndarray:
        """每条链的DAC功耗 P_Δ 对角元"""
        out = np.empty(self.n_tx)
        for i, (d, b) in enumerate(zip(self.delta, self.bits)):
            out[i] = dac_power(d, p_dac) if d < 1.0 else p_dac * 2.0 ** int(b)
        return out


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """用户信道集合，h 形状为 (K, N_t)，samples 形状为 (M, K, N_t)"""
    h: np.ndarray
    h_hat: Optional[np.ndarray] = None
    samples: Optional[np.ndarray] = None

    def __post_init__(self):
        h = np.atleast_2d(np.asarray(self.h, dtype=complex))
        object.__setattr__(self, 'h', h)
        if self.h_hat is not None and np.shape(self.h_hat) != h.shape:
            raise InvalidArgumentError('h_hat', np.shape(self.h_hat), f"应为 {h.shape}")
        if self.samples is not None:
            samples = np.asarray(self.samples, dtype=complex)
            if samples.ndim != 3 or samples.shape[1:] != h.shape:
                raise InvalidArgumentError('samples', samples.shape, f"应为 (M, {h.shape[0]}, {h.shape[1]})")
            object.__setattr__(self, 'samples', samples)

    @property
    def n_users(self) -> int:
        return self.h.shape[0]

    @property
    def n_tx(self) -> int:
        return self.h.shape[1]

    @property
    def n_samples(self) -> int:
        return 0 if self.samples is None else self.samples.shape[0]

    def ensemble(self) -> np.ndarray:
        """用于速率计算的信道集合：有样本时返回样本，否则返回 (1, K, N_t) 的真实信道"""
        if self.samples is not None:
            return self.samples
        return self.h[None, :, :]


@dataclass(frozen=True, eq=False)
class RfSelection:
    """射频链选择向量 λ 及其提升矩阵 Υ"""
    lam: np.ndarray
    lifted: Optional[np.ndarray] = None

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float).ravel()
        if np.any(lam < -1e-9) or np.any(lam > 1 + 1e-9):
            raise InvalidArgumentError('lambda', lam, "元素必须在 [0, 1] 内")
        lam = np.clip(lam, 0.0, 1.0)
        if not np.any(lam > 0):
            raise InvalidArgumentError('lambda', lam, "至少需要一条激活的射频链")
        object.__setattr__(self, 'lam', lam)
        if self.lifted is not None:
            lifted = np.asarray(self.lifted, dtype=float)
            if lifted.shape != (len(lam), len(lam)):
                raise InvalidArgumentError('lifted', lifted.shape, "Υ 维度与 λ 不一致")
            object.__setattr__(self, 'lifted', lifted)

    @classmethod
    def all_on(cls, n_tx: int) -> 'RfSelection':
        return cls(np.ones(n_tx))

    @property
    def is_hard(self) -> bool:
        return bool(np.all((self.lam == 0.0) | (self.lam == 1.0)))

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.lam > 0.5))

    @property
    def upsilon(self) -> np.ndarray:
        """Υ：若未给出提升矩阵则取 λλᵀ"""
        if self.lifted is not None:
            return self.lifted
        return np.outer(self.lam, self.lam)


@dataclass(frozen=True, eq=False)
class PrecoderBlock:
    """L 个预编码矩阵（第0列为公共流）、公共速率分配 C_l 与符号向量 s_l"""
    p: np.ndarray
    c: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        p = np.asarray(self.p, dtype=complex)
        c = np.asarray(self.c, dtype=float).ravel()
        s = np.asarray(self.s, dtype=complex)
        if p.ndim != 3:
            raise InvalidArgumentError('p', p.shape, "应为 (L, N_t, K+1)")
        n_blocks, _, n_streams = p.shape
        if c.shape != (n_blocks,):
            raise InvalidArgumentError('c', c.shape, f"应为 ({n_blocks},)")
        if s.shape != (n_blocks, n_streams):
            raise InvalidArgumentError('s', s.shape, f"应为 ({n_blocks}, {n_streams})")
        if np.any(c < -1e-9):
            raise InvalidArgumentError('c', c, "公共速率分配不能为负")
        object.__setattr__(self, 'p', p)
        object.__setattr__(self, 'c', np.maximum(c, 0.0))
        object.__setattr__(self, 's', s)

    @property
    def block_len(self) -> int:
        return self.p.shape[0]

    @property
    def n_tx(self) -> int:
        return self.p.shape[1]

    @property
    def n_users(self) -> int:
        return self.p.shape[2] - 1

    def with_c(self, c: np.ndarray) -> 'PrecoderBlock':
        return PrecoderBlock(self.p, c, self.s)

    def with_p(self, p: np.ndarray) -> 'PrecoderBlock':
        return PrecoderBlock(p, self.c, self.s)

    def transmitted(self, quant: QuantConfig) -> np.ndarray:
        """每个符号的无噪发射向量 ΔP_l s_l，形状 (L, N_t)"""
        return quant.delta[None, :] * np.einsum('lnj,lj->ln', self.p, self.s)


def quantize_signal(x: np.ndarray, quant: QuantConfig, sel: RfSelection,
                    rng: np.random.Generator) -> np.ndarray:
    """
    AQNM量化输出 ΔΛx + Λε

    Args:
        x: 复向量，末维长度 N_t（可带前导批维）
        quant: 量化配置
        sel: 射频链选择
        rng: 随机数生成器

    Returns:
        np.ndarray: 与 x 同形状的量化信号
    """
    x = np.asarray(x, dtype=complex)
    if x.shape[-1] != quant.n_tx or len(sel.lam) != quant.n_tx:
        raise InvalidArgumentError('x', x.shape, f"末维应为 {quant.n_tx}")
    scale = np.sqrt(quant.sigma_e / 2.0)
    eps = scale * (rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape))
    return sel.lam * (quant.delta * x + eps)


def complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    """循环对称复高斯样本"""
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def draw_channels(cfg: SystemConfig, rng: np.random.Generator) -> ChannelSet:
    """i.i.d. 单位方差瑞利信道"""
    return ChannelSet(h=complex_normal(rng, (cfg.n_users, cfg.n_tx)))


def draw_symbols(block_len: int, n_streams: int, rng: np.random.Generator) -> np.ndarray:
    """单位功率QPSK符号，形状 (L, K+1)"""
    bits = rng.integers(0, 4, size=(block_len, n_streams))
    return np.exp(1j * (np.pi / 4 + np.pi / 2 * bits))


def draw_csit_samples(h_hat: np.ndarray, sigma_ce: float, m: int,
                      rng: np.random.Generator) -> ChannelSet:
    """
    按误差模型生成条件信道样本 h = √(1−σ²)ĥ + σ·e

    Args:
        h_hat: 信道估计，形状 (K, N_t)
        sigma_ce: 估计误差尺度
        m: 样本数
        rng: 随机数生成器

    Returns:
        ChannelSet: h 与 h_hat 均为估计值，samples 形状 (M, K, N_t)
    """
    if m < 1:
        raise InvalidArgumentError('M', m, "样本数必须 ≥ 1")
    if not 0.0 <= sigma_ce <= 1.0:
        raise InvalidArgumentError('sigma_ce', sigma_ce, "必须在 [0, 1] 内")
    h_hat = np.atleast_2d(np.asarray(h_hat, dtype=complex))
    err = complex_normal(rng, (m,) + h_hat.shape)
    samples = math.sqrt(1.0 - sigma_ce ** 2) * h_hat[None] + sigma_ce * err
    return ChannelSet(h=h_hat, h_hat=h_hat, samples=samples)


def element_power(p: PrecoderBlock, quant: QuantConfig) -> np.ndarray:
    """每个符号、每根天线的发射功率 |(ΔP_l s_l)_i|²，形状 (L, N_t)"""
    return np.abs(p.transmitted(quant)) ** 2


def stream_power(p: PrecoderBlock, quant: QuantConfig) -> np.ndarray:
    """每根天线的期望功率 δ_i²‖row_i(P_l)‖²，形状 (L, N_t)"""
    return (quant.delta[None, :] ** 2) * np.sum(np.abs(p.p) ** 2, axis=2)


def rescale_rows(rows: np.ndarray, s: np.ndarray, amplitude) -> np.ndarray:
    """
    将预编码行缩放到逐元素功率约束上（可批量）

    沿 s* 方向的分量被缩放到 |row·s| = amplitude，正交分量被收缩到
    ‖row‖ ≤ amplitude 以内。

    Args:
        rows: 各天线在各流上的系数，形状 (..., J)
        s: 对应的符号，可广播到 rows
        amplitude: 目标幅度 √P_ant/δ_i，可广播到 rows[..., 0]
    """
    rows = np.asarray(rows, dtype=complex)
    s = np.broadcast_to(np.asarray(s, dtype=complex), rows.shape)
    amp = np.asarray(amplitude, dtype=float)[..., None]
    s_norm = np.linalg.norm(s, axis=-1, keepdims=True)
    if np.any(s_norm == 0):
        raise InvalidArgumentError('s', None, "符号向量为零")
    u = np.conj(s) / s_norm
    mu = np.sum(np.conj(u) * rows, axis=-1, keepdims=True)
    perp = rows - mu * u
    abs_mu = np.abs(mu)
    phase = np.where(abs_mu > 1e-300, mu / np.where(abs_mu > 1e-300, abs_mu, 1.0), 1.0)
    mu_new = phase * amp / s_norm
    budget = np.maximum(amp ** 2 - np.abs(mu_new) ** 2, 0.0)
    perp_norm = np.linalg.norm(perp, axis=-1, keepdims=True)
    shrink = perp_norm ** 2 > budget
    factor = np.where(shrink, np.sqrt(budget) / np.where(perp_norm > 0, perp_norm, 1.0), 1.0)
    return mu_new * u + perp * factor


def rescale_row(row: np.ndarray, s: np.ndarray, amplitude: float) -> np.ndarray:
    """单行版本的 rescale_rows"""
    return rescale_rows(np.asarray(row)[None, :], np.asarray(s)[None, :], [amplitude])[0]


def enforce_element_power(p: PrecoderBlock, quant: QuantConfig, p_ant: float,
                          columns: Optional[Sequence[int]] = None) -> PrecoderBlock:
    """
    逐天线、逐符号满足 |(ΔP_l s_l)_i|² = P_ant 以及 δ_i²‖row_i‖² ≤ P_ant

    Args:
        p: 预编码块
        quant: 量化配置
        p_ant: 每天线功率
        columns: 参与的流列（SDMA时不含第0列），其余列置零
    """
    cols = list(range(p.p.shape[2])) if columns is None else list(columns)
    out = np.zeros_like(p.p)
    amp = np.sqrt(p_ant) / quant.delta
    rows = p.p[:, :, cols]
    sym = p.s[:, None, cols]
    out[:, :, cols] = rescale_rows(rows, sym, np.broadcast_to(amp, rows.shape[:2]))
    return PrecoderBlock(out, p.c, p.s)
