"""
联合优化模块
射频链选择与预编码的交替优化：从全部射频链激活开始，
交替执行松弛选择 + 取整与固定选择下的AO-ADMM
"""

import logging
import math
import time
from typing import Optional

from rsma_dfrc.core.models import PrecoderBlock, RfSelection, enforce_element_power
from rsma_dfrc.optim.admm import ao_admm
from rsma_dfrc.optim.problem import DfrcProblem, Validator, init_precoders
from rsma_dfrc.optim.report import SolveReport, build_report
from rsma_dfrc.optim.rf_select import rf_select_sca, round_selection
from rsma_dfrc.utils.errors import InfeasibleError, SolverError
from rsma_dfrc.utils.progress import IterationMonitor
from rsma_dfrc.utils.resource_manager import PointBudget

logger = logging.getLogger(__name__)


def carry_precoders(problem: DfrcProblem, p: PrecoderBlock, sel: RfSelection) -> PrecoderBlock:
    """
    把上一轮的预编码带到新的选择下作为初始点

    不满足新选择下的约束时退回 init_precoders。
    """
    block = problem.polish(enforce_element_power(p, problem.quant, problem.cfg.p_ant, problem.columns), sel)
    if Validator(problem).check(block, sel):
        return block
    logger.debug("沿用的预编码在新选择下不可行，重新初始化")
    return init_precoders(problem, sel)


def ao_full(problem: DfrcProblem, budget: Optional[PointBudget] = None) -> SolveReport:
    """
    射频链选择与预编码的联合交替优化

    Args:
        problem: 优化问题
        budget: 时间预算（耗尽时返回当前最优解，状态 max_iterations）

    Returns:
        SolveReport: 最终硬选择及其下重新优化的预编码

    Raises:
        InfeasibleError: 全部激活时找不到可行初始点
    """
    start = time.time()
    algo = problem.algo
    sel = RfSelection.all_on(problem.cfg.n_tx)
    first = ao_admm(problem, sel, budget=budget)
    p = first.precoder_block()
    best_ee = first.ee
    inner = first.inner_iterations
    ee_trace = [best_ee]
    trace = [[0, best_ee, 0.0, 0.0, sel.n_active]]
    relaxed_best = None
    status = 'converged' if problem.cfg.n_tx == 1 else 'max_iterations'
    monitor = IterationMonitor(algo.max_outer, "AO", enabled=algo.show_progress)
    outer = 0
    while status != 'converged' and outer < algo.max_outer:
        if budget is not None and budget.expired():
            status = 'max_iterations'
            break
        outer += 1
        relaxed, sca = rf_select_sca(problem, p, sel)
        hard = round_selection(relaxed.lam, algo.tau_prime)
        try:
            cand = ao_admm(problem, hard, init=carry_precoders(problem, p, hard), budget=budget)
            inner += cand.inner_iterations
            ee_new = cand.ee
        except (InfeasibleError, SolverError) as e:
            logger.info(f"选择 {hard.lam.astype(int).tolist()} 下求解失败，拒绝: {e}")
            cand, ee_new = None, -math.inf
        delta = ee_new - best_ee
        accepted = ee_new >= best_ee
        if accepted:
            sel, p, best_ee, relaxed_best = hard, cand.precoder_block(), ee_new, relaxed
        ee_trace.append(best_ee)
        trace.append([outer, best_ee, 0.0, 0.0, sel.n_active])
        monitor.update(outer, best_ee, 0.0, 0.0, sel.n_active, accepted)
        logger.debug(f"AO 第 {outer} 轮: SCA {sca.status}/{sca.iterations}, 选择 {hard.lam.astype(int).tolist()}, "
                     f"EE={ee_new:.6f}")
        if not accepted:
            status = 'stalled'
            break
        if abs(delta) <= algo.eps_r:
            status = 'converged'
    stats = monitor.finish()
    logger.info(f"AO 结束: EE={best_ee:.6f}, 激活 {sel.n_active}/{problem.cfg.n_tx}, 状态 {status}")
    return build_report(problem, p, sel, status, ee_trace, trace, outer, inner,
                        time.time() - start, relaxed=relaxed_best, stats=stats)
