"""
ADMM预编码模块
固定射频链选择时的预编码更新：
v 步为WMSE二次规划，u 步为约束集上的半定松弛投影，w 步为缩放对偶更新；
外层循环在MMSE均衡器/权重刷新与ADMM之间交替
"""

import logging
import math
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from rsma_dfrc.conic.ipm import solve_cone
from rsma_dfrc.conic.qp import solve_wmse_qp
from rsma_dfrc.conic.sdr import (
    QuadraticConstraint, RealQuadratic, SdrLift, embed_hermitian, embed_vector,
    rank1_recover, sdr_lift, unembed_vector,
)
from rsma_dfrc.core.comms import MseQuadratic, mmse_state, wmse_quadratics
from rsma_dfrc.core.models import PrecoderBlock, RfSelection, rescale_rows
from rsma_dfrc.core.radar import similarity
from rsma_dfrc.optim.problem import DfrcProblem, Validator, add_similarity_constraint, init_precoders
from rsma_dfrc.optim.report import SolveReport, build_report
from rsma_dfrc.utils.errors import InfeasibleError, RecoveryError, SolverError
from rsma_dfrc.utils.progress import IterationMonitor
from rsma_dfrc.utils.resource_manager import PointBudget

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)

# 恢复候选的约束容差
_RECOVERY_TOL = 1e-9


@dataclass
class AdmmState:
    """
    ADMM状态

    v, u, w 形状均为 (L, 1 + 2·N_t·(K+1))，每行为 [C′_l, Re vec(P_l), Im vec(P_l)]，
    C′_l = ln2·C_l 为以nat计的公共速率分配。
    """
    v: np.ndarray
    u: np.ndarray
    w: np.ndarray
    zeta: float
    r: float = math.inf
    q: float = math.inf
    iteration: int = 0
    fallbacks: int = 0

    def converged(self, eps: float) -> bool:
        return self.r <= eps and self.q <= eps


def pack_precoders(p: PrecoderBlock) -> np.ndarray:
    """PrecoderBlock → ADMM行向量（vec 按列堆叠）"""
    vec = np.transpose(p.p, (0, 2, 1)).reshape(p.block_len, -1)
    return np.concatenate([LN2 * p.c[:, None], vec.real, vec.imag], axis=1)


def unpack_precoders(x: np.ndarray, symbols: np.ndarray) -> PrecoderBlock:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    n_blocks, n_streams = symbols.shape
    half = (x.shape[1] - 1) // 2
    vec = x[:, 1:1 + half] + 1j * x[:, 1 + half:]
    p = vec.reshape(n_blocks, n_streams, -1).transpose(0, 2, 1)
    return PrecoderBlock(p, np.maximum(x[:, 0], 0.0) / LN2, symbols)


def initial_state(p: PrecoderBlock, zeta: float) -> AdmmState:
    """u = v = 当前预编码，w = 0"""
    x = pack_precoders(p)
    return AdmmState(v=x.copy(), u=x.copy(), w=np.zeros_like(x), zeta=zeta)


@dataclass
class WmseModel:
    """
    固定均衡器与权重下的WMSE模型

    private[l] 为 Σ_k ξ_{k,l}，common[l][k] 为 ξ_{c,k,l}；
    targets[l] 为投影中逐符号的和速率下界（nat），None 表示不加该约束。
    """
    private: List[MseQuadratic]
    common: List[List[MseQuadratic]]
    targets: Optional[np.ndarray]
    n_users: int


def build_wmse_model(problem: DfrcProblem, p: PrecoderBlock, sel: RfSelection) -> WmseModel:
    """
    在当前预编码处刷新MMSE均衡器与权重，组装WMSE模型

    和速率约束按当前各符号的速率比例分摊到每个 l，使当前点满足每个分摊后的约束，
    且分摊目标的平均值等于 R_th。
    """
    cfg = problem.cfg
    state = mmse_state(p, problem.channels, problem.quant, sel, cfg.noise_power)
    private, common = wmse_quadratics(state, problem.channels, problem.quant, sel,
                                      cfg.noise_power, cfg.n_streams, cfg.block_len)
    targets = None
    need = LN2 * problem.r_th
    if problem.algo.sum_rate_in_projection and need > 0:
        vec = pack_precoders(p)
        c_nat = vec[:, 0] if not problem.is_sdma else np.zeros(cfg.block_len)
        current = np.array([
            c_nat[l] + cfg.n_users - private[l].value(_complex_vec(vec[l]))
            for l in range(cfg.block_len)
        ])
        mean = float(np.mean(current))
        if mean >= need and mean > 0:
            targets = need * current / mean
        else:
            targets = np.full(cfg.block_len, need)
    return WmseModel(private=private, common=common, targets=targets, n_users=cfg.n_users)


def _complex_vec(row: np.ndarray) -> np.ndarray:
    half = (row.shape[0] - 1) // 2
    return row[1:1 + half] + 1j * row[1 + half:]


def _restrict(quad: MseQuadratic, index: np.ndarray) -> RealQuadratic:
    """把复二次型限制到激活元素上并转为实二次型"""
    return RealQuadratic.from_complex(quad.hessian[np.ix_(index, index)], quad.linear[index], quad.const)


class Projector:
    """
    u 步投影：min ‖u_l − (v_l + w_l)‖² s.t. 公共速率MSE约束、和速率MSE约束、
    逐元素功率与行功率约束以及（需要时的）雷达协方差约束

    逐个符号块 l 做半定松弛并恢复秩一解；雷达约束把其余块固定在当前值上，
    恢复失败时保留旧的 u_l。
    """

    def __init__(self, problem: DfrcProblem, sel: RfSelection, model: WmseModel):
        self.problem = problem
        self.sel = sel
        self.model = model
        cfg = problem.cfg
        self.n_tx = cfg.n_tx
        self.n_streams = cfg.n_streams
        self.rsma = not problem.is_sdma
        self.active = np.flatnonzero(sel.lam > 0)
        self.cols = problem.columns
        self.index = np.array([j * self.n_tx + i for j in self.cols for i in self.active], dtype=int)
        self.dim = 2 * len(self.index)
        self.amp = math.sqrt(cfg.p_ant) / problem.quant.delta
        ref = problem.ref
        # 只看对角线时相似度仅由 λ 决定，投影中无需该约束
        self.radar = ref.constrained and not ref.diag_only
        self.noise_cov = cfg.block_len * np.diag(sel.lam ** 2 * problem.quant.sigma_e)
        self.private_forms = [_restrict(q, self.index) for q in model.private]
        self.common_forms = [[_restrict(q, self.index) for q in row] for row in model.common]
        self.fallbacks = 0

    # 坐标转换

    def _selector(self, s_l: np.ndarray, i: int) -> np.ndarray:
        """限制后向量上的 v，使 vᵀp = (P_l s_l)_i"""
        n_a = len(self.active)
        ii = int(np.flatnonzero(self.active == i)[0])
        v = np.zeros(len(self.index), dtype=complex)
        for jj, j in enumerate(self.cols):
            v[jj * n_a + ii] = s_l[j]
        return v

    def _to_matrix(self, z: np.ndarray) -> np.ndarray:
        full = np.zeros(self.n_tx * self.n_streams, dtype=complex)
        full[self.index] = unembed_vector(z)
        return full.reshape(self.n_streams, self.n_tx).T

    def _to_real(self, mat: np.ndarray) -> np.ndarray:
        return embed_vector(mat.T.reshape(-1)[self.index])

    def transmitted(self, mat: np.ndarray, s_l: np.ndarray) -> np.ndarray:
        """λ∘δ∘(P_l s_l)"""
        return self.sel.lam * self.problem.quant.delta * (mat @ s_l)

    def block_covariance(self, mat: np.ndarray, s_l: np.ndarray) -> np.ndarray:
        x = self.transmitted(mat, s_l)
        return np.outer(x, np.conj(x))

    # 约束构造

    def _power_constraints(self, s_l: np.ndarray) -> List[QuadraticConstraint]:
        p_ant = self.problem.cfg.p_ant
        delta = self.problem.quant.delta
        out = []
        n_a = len(self.active)
        for i in self.active:
            v = self._selector(s_l, i)
            elem = RealQuadratic.from_complex(delta[i] ** 2 * np.outer(np.conj(v), v), np.zeros_like(v))
            out.append(QuadraticConstraint(elem, 'eq', p_ant, name=f'element_{i}'))
            ii = int(np.flatnonzero(self.active == i)[0])
            mask = np.zeros(len(self.index))
            mask[ii::n_a] = 1.0
            row = RealQuadratic.from_complex(delta[i] ** 2 * np.diag(mask), np.zeros(len(self.index)))
            out.append(QuadraticConstraint(row, 'le', p_ant, name=f'row_{i}'))
        return out

    def _radar_entries(self, lift: SdrLift, n_vars: int, s_l: np.ndarray, r_other: np.ndarray):
        """D = R − U 各元素实部/虚部关于决策向量的仿射系数"""
        n = self.n_tx
        delta = self.problem.quant.delta
        diff0 = r_other - self.problem.ref.u
        re_c = np.zeros((n, n, n_vars))
        im_c = np.zeros((n, n, n_vars))
        zero = np.zeros(len(self.index))
        vs = {i: self._selector(s_l, i) for i in self.active}
        for a in self.active:
            for b in self.active:
                scale = self.sel.lam[a] * self.sel.lam[b] * delta[a] * delta[b]
                m = scale * np.outer(np.conj(vs[b]), vs[a])
                herm = (m + m.conj().T) / 2.0
                anti = (m - m.conj().T) / 2j
                re_c[a, b] = lift.coefficients(RealQuadratic.from_complex(herm, zero), n_vars)[0]
                im_c[a, b] = lift.coefficients(RealQuadratic.from_complex(anti, zero), n_vars)[0]
        return re_c, diff0.real, im_c, diff0.imag

    # 单块投影

    def _common_cap(self, l: int, z: np.ndarray) -> float:
        return min(1.0 - form.value(z) for form in self.common_forms[l])

    def _choose_c(self, l: int, z: np.ndarray, t_c: float) -> float:
        if not self.rsma:
            return 0.0
        return float(np.clip(t_c, 0.0, max(self._common_cap(l, z), 0.0)))

    def project_block(self, l: int, target: np.ndarray, u_old: np.ndarray, r_other: np.ndarray) -> np.ndarray:
        """
        投影第 l 个符号块

        Args:
            l: 符号序号
            target: v_l + w_l
            u_old: 旧的 u_l（恢复失败时返回）
            r_other: 其余块与量化噪声贡献的协方差

        Returns:
            np.ndarray: 新的 u_l
        """
        problem = self.problem
        algo = problem.algo
        s_l = problem.symbols[l]
        t_c = float(target[0])
        t_z = embed_vector(_complex_vec(target)[self.index])
        objective = RealQuadratic(np.eye(self.dim), -t_z, float(t_z @ t_z))
        lift, prog = sdr_lift(objective, self._power_constraints(s_l), name='X')

        cs = None
        if self.rsma:
            cs = prog.add_variable('c', 1)
            es = prog.add_variable('e', 1)
            obj = prog.objective.copy()
            obj[es] = 1.0
            prog.set_objective(obj)
            e_row = prog.new_row()
            e_row[0, es] = 1.0
            c_row = prog.new_row()
            c_row[0, cs] = 1.0
            prog.add_rotated_soc(e_row, 0.0, prog.new_row(), 1.0, c_row, [-t_c], name='c_epigraph')
            prog.add_nonneg(c_row, [0.0], name='c_nonneg')
            for k, form in enumerate(self.common_forms[l]):
                row = -lift.coefficients(form, prog.n_vars)
                row[0, cs] = -1.0
                prog.add_nonneg(row, [1.0], name=f'common_{k}')
        target_l = None if self.model.targets is None else float(self.model.targets[l])
        if target_l is not None:
            row = -lift.coefficients(self.private_forms[l], prog.n_vars)
            if cs is not None:
                row[0, cs] = 1.0
            prog.add_nonneg(row, [self.model.n_users - target_l], name='sum_rate')
        if self.radar:
            add_similarity_constraint(prog, *self._radar_entries(lift, prog.n_vars, s_l, r_other), problem.ref)

        sol = solve_cone(prog, tol=algo.conic_tol, max_iter=algo.conic_max_iter)
        if not sol.status.usable:
            logger.warning(f"投影子问题 l={l} 状态 {sol.status.value}，保留旧值")
            self.fallbacks += 1
            return u_old

        rows_act = self.active
        cols = self.cols

        def rescale(z: np.ndarray) -> np.ndarray:
            mat = self._to_matrix(z)
            mat[np.ix_(rows_act, cols)] = rescale_rows(mat[np.ix_(rows_act, cols)], s_l[cols], self.amp[rows_act])
            return self._to_real(mat)

        def value(z: np.ndarray) -> float:
            c = self._choose_c(l, z, t_c)
            return float(np.sum((z - t_z) ** 2) + (c - t_c) ** 2)

        def feasible(z: np.ndarray) -> bool:
            if target_l is not None:
                c = self._choose_c(l, z, t_c)
                if c + self.model.n_users - self.private_forms[l].value(z) < target_l - _RECOVERY_TOL:
                    return False
            if self.radar:
                r = r_other + self.block_covariance(self._to_matrix(z), s_l)
                if similarity(r, problem.ref) > problem.ref.tau + _RECOVERY_TOL:
                    return False
            return True

        try:
            z = rank1_recover(lift.matrix(sol.x), value, rescale, feasible,
                              rng=problem.rng, n_rand=algo.n_rand)
        except RecoveryError:
            logger.warning(f"投影子问题 l={l} 秩一恢复失败，保留旧值")
            self.fallbacks += 1
            return u_old
        mat = self._to_matrix(z)
        vec = mat.T.reshape(-1)
        return np.concatenate([[self._choose_c(l, z, t_c)], vec.real, vec.imag])

    def project(self, target: np.ndarray, u_old: np.ndarray) -> np.ndarray:
        """依次投影全部符号块，雷达约束中其余块取最新值"""
        symbols = self.problem.symbols
        out = u_old.copy()
        blocks = [self.block_covariance(unpack_precoders(out[l:l + 1], symbols[l:l + 1]).p[0], symbols[l])
                  for l in range(out.shape[0])]
        for l in range(out.shape[0]):
            r_other = self.noise_cov + sum(blocks[m] for m in range(len(blocks)) if m != l)
            out[l] = self.project_block(l, target[l], u_old[l], r_other)
            blocks[l] = self.block_covariance(unpack_precoders(out[l:l + 1], symbols[l:l + 1]).p[0], symbols[l])
        return out


def _row_budgets(problem: DfrcProblem) -> List[RealQuadratic]:
    """v 步可选的凸约束 δ_i²‖row_i‖² ≤ P_ant（实嵌入坐标）"""
    cfg = problem.cfg
    n, j = cfg.n_tx, cfg.n_streams
    out = []
    for i in range(n):
        mask = np.zeros(n * j)
        mask[i::n] = 1.0
        a = embed_hermitian(problem.quant.delta[i] ** 2 * np.diag(mask))
        out.append(RealQuadratic(a, np.zeros(2 * n * j), -cfg.p_ant))
    return out


def v_update(state: AdmmState, problem: DfrcProblem, model: WmseModel) -> np.ndarray:
    """
    v 步：min (1/L)Σ_l(ξ_l − C′_l) + (ζ/2)‖v − (u − w)‖²

    C′ 的闭式解为 center + 1/(Lζ)；预编码部分逐块求解WMSE二次规划。
    """
    cfg = problem.cfg
    n_blocks = cfg.block_len
    zeta = state.zeta
    center = state.u - state.w
    constraints = _row_budgets(problem) if problem.algo.constraints_in_v_update else None
    out = np.empty_like(center)
    for l in range(n_blocks):
        vec = solve_wmse_qp(model.private[l].scaled(1.0 / n_blocks), zeta, _complex_vec(center[l]),
                            constraints=constraints, tol=problem.algo.conic_tol,
                            max_iter=problem.algo.conic_max_iter)
        if problem.is_sdma:
            vec[:cfg.n_tx] = 0.0
            c_nat = 0.0
        else:
            c_nat = center[l, 0] + 1.0 / (n_blocks * zeta)
        out[l] = np.concatenate([[c_nat], vec.real, vec.imag])
    return out


def admm_step(state: AdmmState, problem: DfrcProblem, sel: RfSelection, model: WmseModel,
              projector: Optional[Projector] = None) -> AdmmState:
    """
    一次ADMM迭代：v 步、u 步（投影）与 w 步

    Args:
        state: 当前状态
        problem: 优化问题
        sel: 射频链选择
        model: 固定权重下的WMSE模型
        projector: 复用的投影器（None 时新建）

    Returns:
        AdmmState: 新状态，r = ‖v − u‖，q = ‖u_new − u_old‖

    Raises:
        SolverError: v 步的锥规划失败
    """
    projector = projector or Projector(problem, sel, model)
    try:
        v = v_update(state, problem, model)
    except SolverError as e:
        raise SolverError('admm_v_update', e.status, state.iteration, {'stage': 'v'})
    before = projector.fallbacks
    u = projector.project(v + state.w, state.u)
    w = state.w + v - u
    return AdmmState(
        v=v, u=u, w=w, zeta=state.zeta,
        r=float(np.linalg.norm(v - u)),
        q=float(np.linalg.norm(u - state.u)),
        iteration=state.iteration + 1,
        fallbacks=state.fallbacks + projector.fallbacks - before,
    )


def run_admm(problem: DfrcProblem, sel: RfSelection, model: WmseModel, p: PrecoderBlock,
             budget: Optional[PointBudget] = None) -> Tuple[PrecoderBlock, AdmmState]:
    """
    固定权重下运行ADMM直到残差低于 ε_a 或达到最大迭代次数

    Returns:
        (PrecoderBlock, AdmmState): 由 u 得到的预编码与最终状态
    """
    algo = problem.algo
    state = initial_state(p, algo.zeta)
    projector = Projector(problem, sel, model)
    for _ in range(algo.max_admm):
        state = admm_step(state, problem, sel, model, projector)
        logger.debug(f"ADMM it={state.iteration} r={state.r:.3e} q={state.q:.3e}")
        if state.converged(algo.eps_a):
            break
        if budget is not None and budget.expired():
            break
    else:
        logger.info(f"ADMM达到最大迭代次数 {algo.max_admm} (r={state.r:.2e}, q={state.q:.2e})")
    return unpack_precoders(state.u, problem.symbols), state


def ao_admm(problem: DfrcProblem, sel: Optional[RfSelection] = None, init: Optional[PrecoderBlock] = None,
            budget: Optional[PointBudget] = None) -> SolveReport:
    """
    固定射频链选择下的交替优化：刷新MMSE均衡器/权重，再运行ADMM

    只接受可行且EE不下降的迭代点，因此EE轨迹单调不减。

    Args:
        problem: 优化问题
        sel: 射频链选择（默认全部激活）
        init: 初始预编码（默认 init_precoders）
        budget: 时间预算

    Returns:
        SolveReport: 结果报告

    Raises:
        InfeasibleError: 初始点不可行且一轮ADMM后仍不可行
    """
    start = time.time()
    algo = problem.algo
    sel = sel or RfSelection.all_on(problem.cfg.n_tx)
    validator = Validator(problem)
    p = problem.polish(init if init is not None else init_precoders(problem, sel), sel)
    slacks = validator.slacks(p, sel)
    inner = 0
    if not validator.is_feasible(slacks):
        logger.warning(f"初始点不可行 ({validator.worst(slacks)}={slacks[validator.worst(slacks)]:.3e})，尝试一轮ADMM")
        cand, st = run_admm(problem, sel, build_wmse_model(problem, p, sel), p, budget)
        inner += st.iteration
        cand = problem.polish(cand, sel)
        if not validator.check(cand, sel):
            raise InfeasibleError('init', validator.slacks(cand, sel))
        p = cand

    best_ee = problem.ee(p, sel)
    ee_trace = [best_ee]
    trace = [[0, best_ee, 0.0, 0.0, sel.n_active]]
    status = 'max_iterations'
    fallbacks = 0
    monitor = IterationMonitor(algo.max_outer, "AO-ADMM", enabled=algo.show_progress)
    outer = 0
    for outer in range(1, algo.max_outer + 1):
        model = build_wmse_model(problem, p, sel)
        cand, st = run_admm(problem, sel, model, p, budget)
        inner += st.iteration
        fallbacks += st.fallbacks
        cand = problem.polish(cand, sel)
        ee_new = problem.ee(cand, sel) if validator.check(cand, sel) else -math.inf
        accepted = ee_new >= best_ee
        delta = ee_new - best_ee
        if accepted:
            p, best_ee = cand, ee_new
        ee_trace.append(best_ee)
        trace.append([outer, best_ee, st.r, st.q, sel.n_active])
        monitor.update(outer, best_ee, st.r, st.q, sel.n_active, accepted)
        if not accepted:
            logger.info(f"AO-ADMM 第 {outer} 轮候选未被接受 (ΔEE={delta:.3e})，停止")
            status = 'stalled'
            break
        if abs(delta) <= algo.eps_r:
            status = 'converged'
            break
        if budget is not None and budget.expired():
            status = 'max_iterations'
            break
    stats = monitor.finish()
    stats['projection_fallbacks'] = fallbacks
    logger.info(f"AO-ADMM 结束: EE={best_ee:.6f}, 状态 {status}, 外层 {outer}, ADMM {inner}")
    return build_report(problem, p, sel, status, ee_trace, trace, outer, inner,
                        time.time() - start, stats=stats)
