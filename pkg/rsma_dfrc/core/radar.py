"""
雷达指标模块
导向矢量、发射协方差（精确/模型/提升形式）、参考协方差、相似度、检测概率、DOA的CRB与波束方向图
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import special, stats

from rsma_dfrc.core.models import PrecoderBlock, QuantConfig, RfSelection, SystemConfig
from rsma_dfrc.utils.errors import InvalidArgumentError, SingularGeometryError

logger = logging.getLogger(__name__)

SIMILARITY_NORMS = ('frobenius', 'spectral')

# ab 超过该值时改用大参数路径
_MARCUM_LARGE_ARG = 2.0e3


@dataclass(frozen=True, eq=False)
class RadarReference:
    """雷达参考协方差 U、相似度门限 τ 与距离形式"""
    u: np.ndarray
    tau: float = math.inf
    mode: str = 'detection'
    diag_only: bool = True
    norm: str = 'frobenius'
    thetas: Optional[np.ndarray] = None

    def __post_init__(self):
        u = np.asarray(self.u, dtype=complex)
        if u.ndim != 2 or u.shape[0] != u.shape[1]:
            raise InvalidArgumentError('u', u.shape, "参考矩阵必须为方阵")
        if not np.allclose(u, u.conj().T, atol=1e-10):
            raise InvalidArgumentError('u', None, "参考矩阵必须为Hermitian")
        if self.tau < 0:
            raise InvalidArgumentError('tau', self.tau, "τ 必须 ≥ 0")
        if self.mode not in ('detection', 'tracking'):
            raise InvalidArgumentError('mode', self.mode, "可选 detection/tracking")
        if self.norm not in SIMILARITY_NORMS:
            raise InvalidArgumentError('norm', self.norm, f"可选 {SIMILARITY_NORMS}")
        object.__setattr__(self, 'u', u)

    def with_tau(self, tau: float) -> 'RadarReference':
        return RadarReference(self.u, tau, self.mode, self.diag_only, self.norm, self.thetas)

    @property
    def constrained(self) -> bool:
        return math.isfinite(self.tau)


def steering(theta: float, n: int, d: float = 0.5) -> np.ndarray:
    """导向矢量 a(θ)_m = exp(j2π·sinθ·d·(m−1))"""
    if n < 1:
        raise InvalidArgumentError('n', n, "天线数必须 ≥ 1")
    return np.exp(1j * 2.0 * np.pi * np.sin(theta) * d * np.arange(n))


def steering_derivative(theta: float, n: int, d: float = 0.5) -> np.ndarray:
    """∂a/∂θ"""
    m = np.arange(n)
    return 1j * 2.0 * np.pi * d * np.cos(theta) * m * steering(theta, n, d)


def covariance_exact(xs: np.ndarray) -> np.ndarray:
    """Σ_l x_l x_lᴴ，xs 形状 (L, N_t)"""
    xs = np.atleast_2d(np.asarray(xs, dtype=complex))
    if xs.shape[0] < 1:
        raise InvalidArgumentError('xs', xs.shape, "至少需要一个样本")
    return xs.T @ xs.conj()


def covariance_model(p: PrecoderBlock, quant: QuantConfig, sel: RfSelection) -> np.ndarray:
    """大L近似 R̄ = Σ_l ΔΛP_l s_l s_lᴴP_lᴴΛΔ + L·ΛΣΛ"""
    x = sel.lam * p.transmitted(quant)
    noise = p.block_len * np.diag(sel.lam ** 2 * quant.sigma_e)
    return covariance_exact(x) + noise


def lifted_coefficient(p: PrecoderBlock, quant: QuantConfig) -> np.ndarray:
    """
    提升形式的系数矩阵 K，使 R̄(Υ) = K ∘ Υ

    A_l = ΔP_l s_l s_lᴴP_lᴴΔ 为秩一矩阵，其唯一非零特征对为 (‖a_l‖², a_l/‖a_l‖)，
    因此 Σ_l μ_l F_l Υ F_lᴴ = (Σ_l a_l a_lᴴ) ∘ Υ，噪声项贡献 L·diag(σ_e)。
    """
    a = p.transmitted(quant)
    return covariance_exact(a) + p.block_len * np.diag(quant.sigma_e)


def covariance_lifted(p: PrecoderBlock, quant: QuantConfig, upsilon: np.ndarray) -> np.ndarray:
    """由提升变量 Υ 表示的协方差"""
    ups = np.asarray(upsilon, dtype=float)
    if ups.shape != (p.n_tx, p.n_tx):
        raise InvalidArgumentError('upsilon', ups.shape, f"应为 ({p.n_tx}, {p.n_tx})")
    min_eig = float(np.min(np.linalg.eigvalsh((ups + ups.T) / 2)))
    if min_eig < -1e-8:
        raise InvalidArgumentError('upsilon', min_eig, "Υ 必须半正定")
    return lifted_coefficient(p, quant) * ups


def similarity(r: np.ndarray, ref: RadarReference) -> float:
    """
    协方差与参考矩阵的平方距离 ‖R−U‖²

    diag_only 时只计对角元；norm 为 spectral 时取最大奇异值的平方。
    """
    r = np.asarray(r, dtype=complex)
    if r.shape != ref.u.shape:
        raise InvalidArgumentError('r', r.shape, f"应为 {ref.u.shape}")
    diff = r - ref.u
    if ref.diag_only:
        d = np.abs(np.diag(diff))
        if ref.norm == 'spectral':
            return float(np.max(d) ** 2)
        return float(np.sum(d ** 2))
    if ref.norm == 'spectral':
        return float(np.linalg.norm(diff, 2) ** 2)
    return float(np.sum(np.abs(diff) ** 2))


def reference_detection(cfg: SystemConfig, tau: float = math.inf, diag_only: bool = True,
                        norm: str = 'frobenius') -> RadarReference:
    """检测参考 U_det = P_ant·L·I"""
    u = cfg.p_ant * cfg.block_len * np.eye(cfg.n_tx)
    return RadarReference(u=u, tau=tau, mode='detection', diag_only=diag_only, norm=norm)


def reference_tracking(thetas: Sequence[float], cfg: SystemConfig, tau: float = math.inf,
                       diag_only: bool = False, norm: str = 'frobenius') -> RadarReference:
    """
    跟踪参考 U_est = P_ant·L·F_rad F_radᴴ

    F_rad 为块对角矩阵，第 m 块是长度 N_t/N_tar 的子阵导向矢量 v_m。
    """
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    n_tar = len(thetas)
    if n_tar < 1 or n_tar > cfg.n_tx or cfg.n_tx % n_tar != 0:
        raise InvalidArgumentError('thetas', n_tar, f"目标数须整除天线数 {cfg.n_tx}")
    n_sub = cfg.n_tx // n_tar
    f_rad = np.zeros((cfg.n_tx, n_tar), dtype=complex)
    for m, theta in enumerate(thetas):
        f_rad[m * n_sub:(m + 1) * n_sub, m] = steering(theta, n_sub, cfg.d_norm)
    u = cfg.p_ant * cfg.block_len * (f_rad @ f_rad.conj().T)
    return RadarReference(u=u, tau=tau, mode='tracking', diag_only=diag_only, norm=norm, thetas=thetas)


def marcum_q1(a: float, b: float) -> float:
    """
    一阶Marcum Q函数 Q_1(a, b)

    a ≤ b 时用 Q_1 = e^{-(a²+b²)/2} Σ_{k≥0} (a/b)^k I_k(ab)，
    a > b 时用 Q_1 = 1 − e^{-(a²+b²)/2} Σ_{k≥1} (b/a)^k I_k(ab)；
    I_k 以 ive 计算以避免溢出。ab 很大时改用非中心χ²生存函数。
    """
    if a < 0 or b < 0:
        raise InvalidArgumentError('marcum', (a, b), "参数必须非负")
    if b == 0:
        return 1.0
    if a == 0:
        return math.exp(-b * b / 2.0)
    x = a * b
    if x > _MARCUM_LARGE_ARG:
        return float(stats.ncx2.sf(b * b, 2, a * a))
    scale = math.exp(-(a - b) ** 2 / 2.0)
    if a <= b:
        ratio, k, total = a / b, 0, 0.0
    else:
        ratio, k, total = b / a, 1, 0.0
    power = ratio ** k
    for _ in range(5000):
        term = power * special.ive(k, x)
        total += term
        if term < 1e-18 * max(total, 1e-300) and k > x:
            break
        k += 1
        power *= ratio
    else:
        logger.warning(f"Marcum Q级数未收敛 (a={a}, b={b})，改用大参数路径")
        return float(stats.ncx2.sf(b * b, 2, a * a))
    value = scale * total
    return float(min(max(value if a <= b else 1.0 - value, 0.0), 1.0))


def detection_probability(rho: float, p_f: float) -> float:
    """
    检测概率 P_D = Q_1(√ρ, √(−2 ln P_F))

    两自由度时 F⁻¹_{χ²₂}(1−P_F) = −2 ln P_F，非中心χ²₂(ρ)的生存函数即 Q_1(√ρ, ·)。
    """
    if not 0.0 < p_f < 1.0:
        raise InvalidArgumentError('p_f', p_f, "虚警概率必须在 (0, 1) 内")
    if rho < 0:
        raise InvalidArgumentError('rho', rho, "非中心参数必须 ≥ 0")
    if rho == 0:
        return float(p_f)
    return marcum_q1(math.sqrt(rho), math.sqrt(-2.0 * math.log(p_f)))


def radar_snr(alpha_r: complex, cfg: SystemConfig) -> float:
    """SNR = |α_r|²P_ant L/σ_n²"""
    return abs(alpha_r) ** 2 * cfg.p_ant * cfg.block_len / cfg.noise_power


def detection_rho(p: PrecoderBlock, quant: QuantConfig, sel: RfSelection, theta: float,
                  alpha_r: complex, cfg: SystemConfig) -> float:
    """量化发射下的非中心参数 ρ = SNR·|a(θ)ᴴR_x̆ᵀa(θ)|²，R_x̆ = R̄/(P_ant L)"""
    r_norm = covariance_model(p, quant, sel) / (cfg.p_ant * cfg.block_len)
    return rho_from_covariance(r_norm, theta, alpha_r, cfg)


def rho_from_covariance(r_norm: np.ndarray, theta: float, alpha_r: complex, cfg: SystemConfig) -> float:
    a = steering(theta, r_norm.shape[0], cfg.d_norm)
    quad = np.vdot(a, r_norm.T @ a)
    return float(radar_snr(alpha_r, cfg) * abs(quad) ** 2)


def crb_doa(r_norm: np.ndarray, theta: float, snr: float, cfg: SystemConfig) -> float:
    """
    DOA的CRB

    CRB = tr(ARAᴴ) / (2·SNR·(tr(ȦRȦᴴ)tr(ARAᴴ) − |tr(ARȦᴴ)|²))，A = a aᵀ。
    """
    r_norm = np.asarray(r_norm, dtype=complex)
    n = r_norm.shape[0]
    a = steering(theta, n, cfg.d_norm)
    da = steering_derivative(theta, n, cfg.d_norm)
    big_a = np.outer(a, a)
    big_da = np.outer(da, a) + np.outer(a, da)
    t_a = np.real(np.trace(big_a @ r_norm @ big_a.conj().T))
    t_da = np.real(np.trace(big_da @ r_norm @ big_da.conj().T))
    cross = np.trace(big_a @ r_norm @ big_da.conj().T)
    denom = t_da * t_a - abs(cross) ** 2
    if abs(denom) < 1e-14 or snr <= 0:
        raise SingularGeometryError("CRB分母退化", float(denom))
    return float(t_a / (2.0 * snr * denom))


def beampattern(r: np.ndarray, thetas: Sequence[float], d: float = 0.5) -> np.ndarray:
    """每个角度上的 a(θ)ᴴ R a(θ)"""
    thetas = np.atleast_1d(np.asarray(thetas, dtype=float))
    if thetas.size == 0:
        raise InvalidArgumentError('thetas', thetas, "角度网格为空")
    r = np.asarray(r, dtype=complex)
    n = r.shape[0]
    steer = np.exp(1j * 2.0 * np.pi * d * np.outer(np.sin(thetas), np.arange(n)))
    values = np.einsum('tn,nm,tm->t', steer.conj(), r, steer)
    residue = np.max(np.abs(values.imag) / np.maximum(1.0, np.abs(values.real)))
    if residue > 1e-9:
        logger.warning(f"方向图虚部残差 {residue:.2e}")
    return values.real
