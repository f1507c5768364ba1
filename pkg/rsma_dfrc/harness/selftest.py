"""
自检模块
快速不变量检查：代数恒等式、MSE-速率变换、Marcum Q 与数值积分、
提升协方差等式以及小型锥规划
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, List, Tuple

import numpy as np
from scipy import integrate, stats

from rsma_dfrc.conic.ipm import solve_cone
from rsma_dfrc.conic.program import ConeProgram, svec
from rsma_dfrc.core.comms import mmse_state, rates
from rsma_dfrc.core.models import (
    PrecoderBlock, QuantConfig, RfSelection, SystemConfig, complex_normal, dac_power,
    draw_channels, draw_symbols, quant_delta,
)
from rsma_dfrc.core.radar import covariance_lifted, covariance_model, detection_probability
from rsma_dfrc.optim.rf_select import hadamard_stack

logger = logging.getLogger(__name__)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0


@dataclass
class SelftestReport:
    checks: List[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def failed(self) -> List[CheckResult]:
        return [c for c in self.checks if not c.passed]


def check_dac_identity(rng: np.random.Generator) -> Tuple[bool, str]:
    p_dac = 1e-3
    worst = max(abs(dac_power(quant_delta(b), p_dac) / (p_dac * 2 ** b) - 1.0) for b in range(1, 21))
    return worst <= 1e-12, f"最大相对误差 {worst:.2e}"


def check_hadamard_identity(rng: np.random.Generator) -> Tuple[bool, str]:
    worst = 0.0
    for _ in range(1000):
        n = int(rng.choice([2, 4, 8, 16]))
        a, c = complex_normal(rng, n), complex_normal(rng, n)
        b = rng.standard_normal(n)
        lhs = np.vdot(a, b * c)
        rhs = np.dot(b, hadamard_stack(a, c))
        worst = max(worst, abs(lhs - rhs))
    return worst <= 1e-12, f"最大误差 {worst:.2e}"


def check_mse_rate_transform(rng: np.random.Generator) -> Tuple[bool, str]:
    cfg = SystemConfig(n_tx=4, n_users=2, block_len=2)
    worst = 0.0
    for _ in range(1000 // cfg.block_len):
        channels = draw_channels(cfg, rng)
        quant = QuantConfig.from_bits(int(rng.integers(1, 9)), cfg.n_tx)
        sel = RfSelection(rng.uniform(0.2, 1.0, cfg.n_tx))
        p = PrecoderBlock(complex_normal(rng, (cfg.block_len, cfg.n_tx, cfg.n_streams), 0.1),
                          np.zeros(cfg.block_len), draw_symbols(cfg.block_len, cfg.n_streams, rng))
        state = mmse_state(p, channels, quant, sel, cfg.noise_power)
        report = rates(p, channels, quant, sel, cfg.noise_power)
        worst = max(worst,
                    float(np.max(np.abs(state.xi_c[0] + math.log(2.0) * report.r_c - 1.0))),
                    float(np.max(np.abs(state.xi_p[0] + math.log(2.0) * report.r_p - 1.0))))
    return worst <= 1e-9, f"最大误差 {worst:.2e}"


def _pd_quadrature(rho: float, p_f: float) -> float:
    threshold = -2.0 * math.log(p_f)
    if rho == 0:
        return float(stats.chi2.sf(threshold, 2))
    # 质量集中在均值 ρ+2 附近（标准差 2√(1+ρ)），取有限区间并在峰值附近分段
    mean, sd = rho + 2.0, 2.0 * math.sqrt(1.0 + rho)
    upper = max(threshold, mean) + 50.0 * sd
    points = [p for p in (mean - 10.0 * sd, mean, mean + 10.0 * sd) if threshold < p < upper] or None
    value, _ = integrate.quad(lambda x: stats.ncx2.pdf(x, 2, rho), threshold, upper,
                              points=points, epsabs=1e-12, limit=200)
    return float(value)


def check_marcum_quadrature(rng: np.random.Generator) -> Tuple[bool, str]:
    worst = 0.0
    for p_f in (1e-3, 1e-7):
        if detection_probability(0.0, p_f) != p_f:
            return False, f"ρ=0 时 P_D ≠ P_F ({p_f})"
        for rho in (0.0, 1.0, 10.0, 100.0, 800.0):
            worst = max(worst, abs(detection_probability(rho, p_f) - _pd_quadrature(rho, p_f)))
    return worst <= 1e-6, f"最大误差 {worst:.2e}"


def check_lifted_covariance(rng: np.random.Generator) -> Tuple[bool, str]:
    cfg = SystemConfig(n_tx=4, n_users=2, block_len=3)
    worst = 0.0
    for _ in range(100):
        lam = rng.integers(0, 2, cfg.n_tx).astype(float)
        if not lam.any():
            lam[int(rng.integers(cfg.n_tx))] = 1.0
        sel = RfSelection(lam)
        quant = QuantConfig.from_bits(int(rng.integers(1, 9)), cfg.n_tx)
        p = PrecoderBlock(complex_normal(rng, (cfg.block_len, cfg.n_tx, cfg.n_streams)),
                          np.zeros(cfg.block_len), draw_symbols(cfg.block_len, cfg.n_streams, rng))
        diff = covariance_model(p, quant, sel) - covariance_lifted(p, quant, np.outer(lam, lam))
        worst = max(worst, float(np.linalg.norm(diff)))
    return worst <= 1e-8, f"最大Frobenius误差 {worst:.2e}"


def check_conic_toys(rng: np.random.Generator) -> Tuple[bool, str]:
    errors = []
    # min x, x ≥ 1
    lp = ConeProgram()
    lp.add_variable('x', 1)
    lp.set_objective(np.array([1.0]))
    lp.add_nonneg(np.array([[1.0]]), [-1.0])
    errors.append(abs(solve_cone(lp).objective - 1.0))
    # min t, ‖(1, 1)‖ ≤ t
    soc = ConeProgram()
    soc.add_variable('t', 1)
    soc.set_objective(np.array([1.0]))
    soc.add_soc(np.array([[1.0], [0.0], [0.0]]), [0.0, 1.0, 1.0])
    errors.append(abs(solve_cone(soc).objective - math.sqrt(2.0)))
    # min t, tI − A ⪰ 0
    a = rng.standard_normal((3, 3))
    a = (a + a.T) / 2.0
    sdp = ConeProgram()
    sdp.add_variable('t', 1)
    sdp.set_objective(np.array([1.0]))
    sdp.add_psd(svec(np.eye(3))[:, None], -svec(a))
    errors.append(abs(solve_cone(sdp).objective - float(np.max(np.linalg.eigvalsh(a)))))
    worst = max(errors)
    return worst <= 1e-5, f"最大目标误差 {worst:.2e}"


CHECKS: List[Tuple[str, Callable[[np.random.Generator], Tuple[bool, str]]]] = [
    ('dac_identity', check_dac_identity),
    ('hadamard_identity', check_hadamard_identity),
    ('mse_rate_transform', check_mse_rate_transform),
    ('marcum_quadrature', check_marcum_quadrature),
    ('lifted_covariance', check_lifted_covariance),
    ('conic_toys', check_conic_toys),
]


def run_selftest(seed: int = 0) -> SelftestReport:
    """依次运行全部检查；单项检查抛出的异常记为失败"""
    report = SelftestReport()
    for name, check in CHECKS:
        start = time.time()
        try:
            passed, detail = check(np.random.default_rng(seed))
        except Exception as e:
            logger.error(f"自检 {name} 异常: {e}", exc_info=True)
            passed, detail = False, f"{type(e).__name__}: {e}"
        result = CheckResult(name, passed, detail, time.time() - start)
        (logger.info if passed else logger.error)(f"自检 {name}: {'通过' if passed else '失败'} ({detail})")
        report.checks.append(result)
    return report
