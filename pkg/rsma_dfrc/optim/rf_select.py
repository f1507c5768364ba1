"""
射频链选择模块
固定预编码时，以提升变量 Υ = λλᵀ 的半定松弛和逐次凸近似求解松弛的射频链选择，
再按门限取整
"""

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from rsma_dfrc.conic.ipm import solve_cone
from rsma_dfrc.conic.program import ConeProgram, smat, svec, svec_index
from rsma_dfrc.core.models import PrecoderBlock, RfSelection
from rsma_dfrc.core.radar import lifted_coefficient
from rsma_dfrc.optim.problem import DfrcProblem, add_similarity_constraint
from rsma_dfrc.utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# α 展开点的下限，避免 α⁰ = 0 时分式约束退化
_ALPHA_FLOOR = 1e-6


def hadamard_stack(a: np.ndarray, c: np.ndarray) -> np.ndarray:
    """
    返回 a* ∘ c，使得对任意 b 有 aᴴ D_b c = bᵀ(a* ∘ c)

    末维必须等长，前导维按广播规则处理。

    Raises:
        InvalidArgumentError: 长度不一致
    """
    a = np.asarray(a, dtype=complex)
    c = np.asarray(c, dtype=complex)
    if a.shape[-1:] != c.shape[-1:]:
        raise InvalidArgumentError('shape', (a.shape, c.shape), "两个向量长度必须一致")
    return np.conj(a) * c


@dataclass
class ScaState:
    """
    逐次凸近似的状态

    gamma/omega/nu/kappa 形状为 (M, K, L)，alpha 与 c_nat 形状为 (L,)；
    SDMA 下 omega/nu 为 None，c_nat 为零。
    """
    upsilon: np.ndarray
    alpha: np.ndarray
    beta: float
    gamma: np.ndarray
    kappa: np.ndarray
    omega: Optional[np.ndarray]
    nu: Optional[np.ndarray]
    c_nat: np.ndarray
    t: float = 0.0
    ee_history: List[float] = field(default_factory=list)
    iterations: int = 0
    status: str = 'converged'
    solve_time: float = 0.0

    @property
    def relaxed_lambda(self) -> np.ndarray:
        return np.sqrt(np.clip(np.diag(self.upsilon), 0.0, 1.0))


@dataclass
class RateMatrices:
    """
    速率下界中的二次型矩阵（实部），形状 (M, K, L, N, N)

    gamma_mat: 公共流干扰 σ²I + Φ + Σ_私有
    xi_mat:    公共流总接收功率 σ²/N·I + Φ + Σ_全部
    psi_mat:   私有流干扰 σ²I + Φ + Σ_{私有, j≠k}
    omega_mat: 私有流总接收功率 σ²/N·I + Φ + Σ_私有
    """
    gamma_mat: np.ndarray
    xi_mat: np.ndarray
    psi_mat: np.ndarray
    omega_mat: np.ndarray


def rate_matrices(problem: DfrcProblem, p: PrecoderBlock) -> RateMatrices:
    """由固定预编码构造各速率下界矩阵，c_j = δ ∘ h_k* ∘ p_j"""
    cfg = problem.cfg
    quant = problem.quant
    h = problem.channels.ensemble()
    n = cfg.n_tx
    coef = quant.delta * hadamard_stack(h[:, :, None, None, :], np.transpose(p.p, (0, 2, 1))[None, None])
    # outer[m, k, l, j] = Re(c cᴴ)
    outer = np.real(coef[..., :, None] * np.conj(coef[..., None, :]))
    phi = np.einsum('mkn,nq->mknq', quant.sigma_e * np.abs(h) ** 2, np.eye(n))[:, :, None]
    eye = np.eye(n)
    private_sum = np.sum(outer[:, :, :, 1:], axis=3)
    own = np.stack([outer[:, k, :, k + 1] for k in range(cfg.n_users)], axis=1)
    sigma2 = cfg.noise_power
    return RateMatrices(
        gamma_mat=sigma2 * eye + phi + private_sum,
        xi_mat=sigma2 / n * eye + phi + private_sum + outer[:, :, :, 0],
        psi_mat=sigma2 * eye + phi + private_sum - own,
        omega_mat=sigma2 / n * eye + phi + private_sum,
    )


def _svec_rows(mats: np.ndarray) -> np.ndarray:
    """对末两维做 svec，(…, N, N) → (…, N(N+1)/2)"""
    lead = mats.shape[:-2]
    flat = mats.reshape((-1,) + mats.shape[-2:])
    return np.array([svec(m) for m in flat]).reshape(lead + (-1,))


def _power_weights(problem: DfrcProblem) -> Tuple[np.ndarray, float]:
    """P_tot = const + Σ_i w_i Υ_ii"""
    cfg = problem.cfg
    quant = problem.quant
    weights = (cfg.p_ant / cfg.eta_pa + cfg.p_circ + quant.dac_powers(cfg.p_dac)
               + cfg.p_int * 2.0 * cfg.s_dac * quant.bits)
    return np.asarray(weights, dtype=float), cfg.p_syn + cfg.p_bb


class _ScaProgram:
    """一次逐次凸近似子问题的构造与求解"""

    def __init__(self, problem: DfrcProblem, p: PrecoderBlock, mats: RateMatrices):
        self.problem = problem
        self.p = p
        self.rsma = not problem.is_sdma
        self.n = problem.cfg.n_tx
        self.shape = mats.gamma_mat.shape[:3]
        self.svec_gamma = _svec_rows(mats.gamma_mat)
        self.svec_xi = _svec_rows(mats.xi_mat)
        self.svec_psi = _svec_rows(mats.psi_mat)
        self.svec_omega = _svec_rows(mats.omega_mat)
        self.power_w, self.power_c = _power_weights(problem)
        self.lifted = lifted_coefficient(p, problem.quant)

    def expansion(self, ups: np.ndarray) -> Dict[str, np.ndarray]:
        """在 Υ⁰ 处计算泰勒展开点"""
        sv = svec(ups)
        out = {
            'x_gamma': self.svec_gamma @ sv,
            'x_xi': self.svec_xi @ sv,
            'x_psi': self.svec_psi @ sv,
            'x_omega': self.svec_omega @ sv,
        }
        gamma0 = np.log(out['x_psi'])
        kappa0 = np.log(out['x_omega'])
        private = np.mean(np.sum(kappa0 - gamma0, axis=1), axis=0)
        if self.rsma:
            c0 = np.min(np.mean(np.log(out['x_xi']) - np.log(out['x_gamma']), axis=0), axis=0)
        else:
            c0 = np.zeros(self.shape[2])
        out['c0'] = c0
        out['alpha0'] = np.sqrt(np.maximum(c0 + private, _ALPHA_FLOOR ** 2))
        out['beta0'] = LN2 * (self.power_c + float(self.power_w @ np.clip(np.diag(ups), 0.0, 1.0)))
        return out

    def _inner_log(self, prog: ConeProgram, ups_sl: slice, var_sl: slice, svec_rows: np.ndarray,
                   x0: np.ndarray, name: str):
        """v ≤ ln x⁰ + 1 − x⁰/tr(ΥX)，写成 (tr(ΥX)/x⁰)·(ln x⁰ + 1 − v) ≥ 1"""
        flat_rows = svec_rows.reshape(-1, svec_rows.shape[-1])
        flat_x0 = x0.reshape(-1)
        for idx in range(flat_x0.size):
            a_row = prog.new_row()
            a_row[0, ups_sl] = flat_rows[idx] / flat_x0[idx]
            b_row = prog.new_row()
            b_row[0, var_sl.start + idx] = -1.0
            prog.add_rotated_soc(a_row, 0.0, b_row, math.log(flat_x0[idx]) + 1.0,
                                 prog.new_row(), [1.0], name=f'{name}_{idx}')

    def _linear_exp(self, prog: ConeProgram, ups_sl: slice, var_sl: slice, svec_rows: np.ndarray,
                    x0: np.ndarray, name: str):
        """tr(ΥX) ≤ e^{v⁰}(v − v⁰ + 1)，两边除以 e^{v⁰} = x⁰"""
        flat_rows = svec_rows.reshape(-1, svec_rows.shape[-1])
        flat_x0 = x0.reshape(-1)
        count = flat_x0.size
        f_mat = prog.new_row(count)
        f_mat[:, ups_sl] = -flat_rows / flat_x0[:, None]
        f_mat[np.arange(count), var_sl.start + np.arange(count)] = 1.0
        prog.add_nonneg(f_mat, 1.0 - np.log(flat_x0), name=name)

    def build(self, ups0: np.ndarray) -> Tuple[ConeProgram, Dict[str, slice], Dict[str, np.ndarray]]:
        problem = self.problem
        n_s, n_k, n_l = self.shape
        count = n_s * n_k * n_l
        exp0 = self.expansion(ups0)
        prog = ConeProgram()
        sl = {
            'ups': prog.add_psd_variable('upsilon', self.n),
            'gamma': prog.add_variable('gamma', count),
            'kappa': prog.add_variable('kappa', count),
            'alpha': prog.add_variable('alpha', n_l),
            'beta': prog.add_variable('beta', 1),
            't': prog.add_variable('t', 1),
        }
        if self.rsma:
            sl['omega'] = prog.add_variable('omega', count)
            sl['nu'] = prog.add_variable('nu', count)
            sl['c'] = prog.add_variable('c', n_l)
        objective = np.zeros(prog.n_vars)
        objective[sl['t']] = -1.0
        prog.set_objective(objective)
        ups = sl['ups']

        # 0 ≤ Υ_ij ≤ 1，tr(Υ) ≥ 1
        idx = svec_index(self.n)
        scales = np.array([1.0 if r == c else 1.0 / math.sqrt(2.0) for (r, c) in sorted(idx, key=idx.get)])
        box = prog.new_row(len(scales))
        box[:, ups] = np.diag(scales)
        prog.add_nonneg(np.vstack([box, -box]), np.concatenate([np.zeros(len(scales)), np.ones(len(scales))]),
                        name='upsilon_box')
        tr_row = prog.new_row()
        tr_row[0, ups] = svec(np.eye(self.n))
        prog.add_nonneg(tr_row, [-1.0], name='upsilon_trace')

        self._linear_exp(prog, ups, sl['gamma'], self.svec_psi, exp0['x_psi'], 'private_interference')
        self._inner_log(prog, ups, sl['kappa'], self.svec_omega, exp0['x_omega'], 'private_signal')
        if self.rsma:
            self._linear_exp(prog, ups, sl['omega'], self.svec_gamma, exp0['x_gamma'], 'common_interference')
            self._inner_log(prog, ups, sl['nu'], self.svec_xi, exp0['x_xi'], 'common_signal')

        # 变量按 (m, k, l) 展平
        grid = np.arange(count).reshape(n_s, n_k, n_l)
        sum_rows = []
        for l in range(n_l):
            s_row = prog.new_row()
            s_row[0, sl['gamma'].start + grid[:, :, l].ravel()] = -1.0 / n_s
            s_row[0, sl['kappa'].start + grid[:, :, l].ravel()] = 1.0 / n_s
            if self.rsma:
                s_row[0, sl['c'].start + l] = 1.0
                for k in range(n_k):
                    c_row = prog.new_row()
                    c_row[0, sl['nu'].start + grid[:, k, l]] = 1.0 / n_s
                    c_row[0, sl['omega'].start + grid[:, k, l]] = -1.0 / n_s
                    c_row[0, sl['c'].start + l] = -1.0
                    prog.add_nonneg(c_row, [0.0], name=f'common_{k}_{l}')
            alpha_row = prog.new_row()
            alpha_row[0, sl['alpha'].start + l] = 1.0
            prog.add_rotated_soc(s_row, 0.0, prog.new_row(), 1.0, alpha_row, [0.0], name=f'alpha_{l}')
            sum_rows.append(s_row)

        # t ≤ (1/L)Σ[(2α⁰/β⁰)α − (α⁰/β⁰)²β]
        alpha0, beta0 = exp0['alpha0'], exp0['beta0']
        t_row = prog.new_row()
        t_row[0, sl['alpha']] = 2.0 * alpha0 / beta0 / n_l
        t_row[0, sl['beta']] = -np.sum((alpha0 / beta0) ** 2) / n_l
        t_row[0, sl['t']] = -1.0
        prog.add_nonneg(t_row, [0.0], name='fractional')

        # β ≥ ln2·P_tot(Υ)
        p_row = prog.new_row()
        p_row[0, sl['beta']] = 1.0
        diag_pos = np.array([idx[(i, i)] for i in range(self.n)])
        p_row[0, ups.start + diag_pos] = -LN2 * self.power_w
        prog.add_nonneg(p_row, [-LN2 * self.power_c], name='power')

        if problem.r_th > 0:
            r_row = np.sum(np.vstack(sum_rows), axis=0, keepdims=True) / n_l
            prog.add_nonneg(r_row, [-LN2 * problem.r_th], name='sum_rate')

        if problem.ref.constrained:
            add_similarity_constraint(prog, *self._similarity_entries(prog.n_vars, ups, idx), problem.ref)
        return prog, sl, exp0

    def _similarity_entries(self, n_vars: int, ups: slice, idx):
        """R(Υ) = K ∘ Υ，Υ_ab 由 svec 元素按 1/√2 缩放得到"""
        n = self.n
        re_c = np.zeros((n, n, n_vars))
        im_c = np.zeros((n, n, n_vars))
        for a in range(n):
            for b in range(n):
                key = (a, b) if a >= b else (b, a)
                scale = 1.0 if a == b else 1.0 / math.sqrt(2.0)
                re_c[a, b, ups.start + idx[key]] = scale * self.lifted[a, b].real
                im_c[a, b, ups.start + idx[key]] = scale * self.lifted[a, b].imag
        diff0 = -self.problem.ref.u
        return re_c, diff0.real, im_c, diff0.imag


def _relaxed_ee(problem: DfrcProblem, p: PrecoderBlock, lam: np.ndarray) -> Optional[float]:
    if not np.any(lam > 0):
        return None
    sel = RfSelection(lam)
    return problem.ee(problem.polish(p, sel), sel)


def rf_select_sca(problem: DfrcProblem, p: PrecoderBlock, sel: Optional[RfSelection] = None
                  ) -> Tuple[RfSelection, ScaState]:
    """
    固定预编码的松弛射频链选择

    每次迭代在上一迭代点处线性化分式目标和指数界，求解一个半定锥规划；
    用松弛 λ = sqrt(diag Υ) 评价EE并保留最优点，|ΔEE| ≤ ε_r 时停止。

    Args:
        problem: 优化问题
        p: 固定的预编码
        sel: 起始选择（默认全部激活）

    Returns:
        (RfSelection, ScaState): 松弛选择（带提升矩阵）与最终状态；
        子问题不可行时返回上一个可行迭代点，状态为 infeasible
    """
    start = time.time()
    algo = problem.algo
    sel = sel or RfSelection.all_on(problem.cfg.n_tx)
    sca = _ScaProgram(problem, p, rate_matrices(problem, p))
    ups = np.outer(sel.lam, sel.lam)
    best_ups = ups
    best_ee = _relaxed_ee(problem, p, sel.lam)
    history = [best_ee]
    status = 'max_iterations'
    sol_vars: Dict[str, np.ndarray] = {}
    it = 0
    for it in range(1, algo.max_sca + 1):
        prog, sl, exp0 = sca.build(ups)
        sol = solve_cone(prog, tol=algo.conic_tol, max_iter=algo.conic_max_iter)
        if not sol.status.usable:
            logger.warning(f"射频链选择子问题第 {it} 次迭代状态 {sol.status.value}，返回上一迭代点")
            status = 'infeasible' if it == 1 else 'stalled'
            break
        ups = smat(sol.x[sl['ups']])
        ups = (ups + ups.T) / 2.0
        sol_vars = {name: sol.x[s] for name, s in sl.items()}
        lam = np.sqrt(np.clip(np.diag(ups), 0.0, 1.0))
        ee = _relaxed_ee(problem, p, lam)
        logger.debug(f"SCA it={it} t={-sol.objective:.6f} EE={ee} λ={np.round(lam, 3)}")
        if ee is None:
            status = 'stalled'
            break
        delta = ee - history[-1]
        history.append(max(ee, history[-1]))
        if ee >= best_ee:
            best_ee, best_ups = ee, ups
        if abs(delta) <= algo.eps_r:
            status = 'converged'
            break

    shape = sca.shape
    state = ScaState(
        upsilon=best_ups,
        alpha=sol_vars.get('alpha', np.zeros(shape[2])),
        beta=float(sol_vars['beta'][0]) if 'beta' in sol_vars else 0.0,
        gamma=sol_vars.get('gamma', np.zeros(int(np.prod(shape)))).reshape(shape),
        kappa=sol_vars.get('kappa', np.zeros(int(np.prod(shape)))).reshape(shape),
        omega=sol_vars['omega'].reshape(shape) if 'omega' in sol_vars else None,
        nu=sol_vars['nu'].reshape(shape) if 'nu' in sol_vars else None,
        c_nat=sol_vars.get('c', np.zeros(shape[2])),
        t=float(sol_vars['t'][0]) if 't' in sol_vars else 0.0,
        ee_history=history,
        iterations=it,
        status=status,
        solve_time=time.time() - start,
    )
    relaxed = RfSelection(state.relaxed_lambda, lifted=best_ups)
    logger.info(f"射频链选择: 状态 {status}, 迭代 {it}, EE={best_ee:.6f}, λ={np.round(relaxed.lam, 3)}")
    return relaxed, state


def round_selection(lam: np.ndarray, tau_prime: float = 0.5) -> RfSelection:
    """
    按门限取整：λ_i ≤ τ′ 取0，否则取1；全为0时保留最大元素

    Args:
        lam: 松弛选择，元素在 [0, 1]
        tau_prime: 门限 τ′ ∈ (0, 1)

    Returns:
        RfSelection: 硬选择
    """
    lam = np.asarray(lam, dtype=float).ravel()
    if not 0.0 < tau_prime < 1.0:
        raise InvalidArgumentError('tau_prime', tau_prime, "门限必须在 (0, 1) 内")
    hard = (lam > tau_prime).astype(float)
    if not np.any(hard):
        top = int(np.argmax(lam))
        logger.warning(f"取整后没有激活的射频链，保留最大元素 λ_{top}={lam[top]:.3f}")
        hard[top] = 1.0
    return RfSelection(hard)
