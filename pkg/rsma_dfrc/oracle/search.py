"""
穷举基线模块
小规模实例上的暴力搜索：相位网格上的预编码搜索与全部射频链选择的枚举，
用于校验交替优化算法的结果
"""

import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from dataclasses_json import config, dataclass_json

from rsma_dfrc.core.comms import quant_noise_terms
from rsma_dfrc.core.models import PrecoderBlock, RfSelection, rescale_rows
from rsma_dfrc.optim.admm import ao_admm
from rsma_dfrc.optim.problem import FEASIBILITY_TOL, DfrcProblem, Validator
from rsma_dfrc.utils.errors import (
    GridTooLargeError, InfeasibleError, InvalidArgumentError, SolverError,
)
from rsma_dfrc.utils.helpers import decode_complex, decode_real, encode_complex, encode_real

logger = logging.getLogger(__name__)

_REAL = config(encoder=encode_real, decoder=decode_real)
_COMPLEX = config(encoder=encode_complex, decoder=decode_complex)

MAX_GRID_POINTS = 10 ** 7
MAX_ENUM_TX = 4
ORACLE_SOLVERS = ('admm', 'grid')

# 每批评估的网格点数
_CHUNK = 4096


@dataclass_json
@dataclass
class OracleResult:
    """穷举搜索结果；status 为 optimal 或 infeasible"""
    status: str
    best_ee: float = -math.inf
    best_selection: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    best_precoders: Optional[np.ndarray] = field(default=None, metadata=_COMPLEX)
    best_common: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    symbols: Optional[np.ndarray] = field(default=None, metadata=_COMPLEX)
    evaluations: int = 0
    grid_spec: Dict[str, Any] = field(default_factory=dict)
    candidate_ee: Dict[str, float] = field(default_factory=dict)

    @property
    def feasible(self) -> bool:
        return self.status == 'optimal'

    def precoder_block(self) -> PrecoderBlock:
        return PrecoderBlock(self.best_precoders, self.best_common, self.symbols)

    def rf_selection(self) -> RfSelection:
        return RfSelection(self.best_selection)


def selection_key(lam: np.ndarray) -> str:
    return ''.join('1' if v > 0.5 else '0' for v in lam)


class _BatchEvaluator:
    """
    一批相位网格点上的能效与可行性

    每个点给出激活天线 × 参与流 × 符号时刻上的相位，经 rescale_rows 落到
    逐元素功率约束上，公共速率分配取 c_cap。
    """

    def __init__(self, problem: DfrcProblem, sel: RfSelection):
        self.problem = problem
        self.sel = sel
        cfg = problem.cfg
        self.active = np.flatnonzero(sel.lam > 0)
        self.cols = np.asarray(problem.columns)
        self.shape = (cfg.block_len, len(self.active), len(self.cols))
        self.amp = math.sqrt(cfg.p_ant) / problem.quant.delta[self.active]
        self.sym = problem.symbols[None, :, None, self.cols]
        self.h = problem.channels.ensemble()
        self.eff = np.conj(problem.quant.delta * sel.lam * self.h)
        self.base = cfg.noise_power + quant_noise_terms(self.h, problem.quant, sel)
        self.p_tot = problem.power(sel)
        self.scale = sel.lam * problem.quant.delta
        self.noise_cov = cfg.block_len * np.diag(sel.lam ** 2 * problem.quant.sigma_e)

    @property
    def dims(self) -> int:
        return int(np.prod(self.shape))

    def precoders(self, phases: np.ndarray) -> np.ndarray:
        """相位 (G, D) → 预编码 (G, L, N_t, K+1)"""
        cfg = self.problem.cfg
        rows = np.exp(1j * phases.reshape((-1,) + self.shape))
        out = np.zeros((rows.shape[0], cfg.block_len, cfg.n_tx, cfg.n_streams), dtype=complex)
        out[:, :, self.active[:, None], self.cols[None, :]] = rescale_rows(rows, self.sym, self.amp)
        return out

    def evaluate(self, p: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """返回每个点的EE与可行性掩码"""
        prob = self.problem
        n_users = prob.cfg.n_users
        gains = np.abs(np.einsum('mkn,glnj->gmklj', self.eff, p)) ** 2
        base = self.base[None, :, :, None]
        private_total = np.sum(gains[..., 1:], axis=-1)
        own = np.stack([gains[:, :, k, :, k + 1] for k in range(n_users)], axis=2)
        r_c = np.mean(np.log2(1.0 + gains[..., 0] / (base + private_total)), axis=1)
        r_p = np.mean(np.log2(1.0 + own / (base + private_total - own)), axis=1)
        sum_rate = np.mean(np.min(r_c, axis=1) + np.sum(r_p, axis=1), axis=-1)
        ok = prob.r_th - sum_rate <= FEASIBILITY_TOL
        if prob.ref.constrained:
            ok &= self.similarity(p) - prob.ref.tau <= FEASIBILITY_TOL
        return sum_rate / self.p_tot, ok

    def similarity(self, p: np.ndarray) -> np.ndarray:
        ref = self.problem.ref
        x = self.scale * np.einsum('glnj,lj->gln', p, self.problem.symbols)
        diff = np.einsum('gln,glm->gnm', x, np.conj(x)) + self.noise_cov - ref.u
        if ref.diag_only:
            d = np.abs(np.diagonal(diff, axis1=1, axis2=2))
            return np.max(d, axis=1) ** 2 if ref.norm == 'spectral' else np.sum(d ** 2, axis=1)
        if ref.norm == 'spectral':
            return np.linalg.norm(diff, ord=2, axis=(1, 2)) ** 2
        return np.sum(np.abs(diff) ** 2, axis=(1, 2))


def grid_search(problem: DfrcProblem, sel: RfSelection, resolution: int,
                max_points: int = MAX_GRID_POINTS) -> OracleResult:
    """
    相位网格上的预编码穷举

    每个激活天线、每个参与流、每个符号时刻取 resolution 个等间隔相位之一，
    分辨率加倍得到的网格包含原网格，因此最优值不减。

    Args:
        problem: 优化问题
        sel: 固定的射频链选择
        resolution: 每个相位的取值个数
        max_points: 网格点数上限

    Returns:
        OracleResult: 可行点中EE最大者；没有可行点时状态为 infeasible

    Raises:
        GridTooLargeError: 网格点数超过上限
    """
    if resolution < 1:
        raise InvalidArgumentError('resolution', resolution, "分辨率必须 ≥ 1")
    ev = _BatchEvaluator(problem, sel)
    points = resolution ** ev.dims
    if points > max_points:
        raise GridTooLargeError(points, max_points)
    spec = {'resolution': resolution, 'dims': ev.dims, 'points': points, 'parameterization': 'phase'}
    logger.debug(f"网格搜索: 选择 {selection_key(sel.lam)}, {ev.dims} 维, {points} 个点")

    best_idx, best_ee = -1, -math.inf
    step = 2.0 * math.pi / resolution
    for lo in range(0, points, _CHUNK):
        idx = np.arange(lo, min(lo + _CHUNK, points))
        digits = np.stack(np.unravel_index(idx, (resolution,) * ev.dims), axis=1)
        ee, ok = ev.evaluate(ev.precoders(step * digits))
        ee = np.where(ok, ee, -math.inf)
        k = int(np.argmax(ee))
        # 严格大于：并列时保留下标最小的点
        if ee[k] > best_ee:
            best_ee, best_idx = float(ee[k]), int(idx[k])

    if best_idx < 0:
        logger.info(f"选择 {selection_key(sel.lam)} 的网格上没有可行点")
        return OracleResult(status='infeasible', best_selection=sel.lam, evaluations=points, grid_spec=spec)

    digits = np.array(np.unravel_index(best_idx, (resolution,) * ev.dims), dtype=float).reshape(1, -1)
    p = ev.precoders(step * digits)[0]
    block = problem.polish(PrecoderBlock(p, np.zeros(problem.cfg.block_len), problem.symbols), sel)
    return _finish(problem, block, sel, points, spec)


def _finish(problem: DfrcProblem, block: PrecoderBlock, sel: RfSelection, evaluations: int,
            spec: Dict[str, Any]) -> OracleResult:
    """用共享的可行性检查复核最优点，并重新计算EE"""
    validator = Validator(problem)
    slacks = validator.slacks(block, sel)
    if not validator.is_feasible(slacks):
        worst = validator.worst(slacks)
        logger.warning(f"穷举最优点复核不可行 ({worst}={slacks[worst]:.3e})")
        return OracleResult(status='infeasible', best_selection=sel.lam, evaluations=evaluations, grid_spec=spec)
    return OracleResult(
        status='optimal',
        best_ee=problem.ee(block, sel),
        best_selection=sel.lam,
        best_precoders=block.p,
        best_common=block.c,
        symbols=block.s,
        evaluations=evaluations,
        grid_spec=spec,
    )


def hard_selections(n_tx: int) -> List[np.ndarray]:
    """全部非零的0/1选择，按二进制字典序"""
    return [np.array(bits, dtype=float) for bits in itertools.product((0, 1), repeat=n_tx) if any(bits)]


def _solve_selection(problem: DfrcProblem, lam: np.ndarray, solver: str, resolution: int) -> OracleResult:
    sel = RfSelection(lam)
    if solver == 'grid':
        return grid_search(problem, sel, resolution)
    try:
        report = ao_admm(problem, sel)
    except (InfeasibleError, SolverError) as e:
        logger.info(f"选择 {selection_key(lam)} 下ADMM失败: {e}")
        return OracleResult(status='infeasible', best_selection=lam, evaluations=1)
    spec = {'solver': 'admm', 'status': report.status, 'inner_iterations': report.inner_iterations}
    return _finish(problem, report.precoder_block(), sel, 1, spec)


def exhaustive_selection(problem: DfrcProblem, solver: str = 'admm', resolution: int = 8,
                         workers: int = 1) -> OracleResult:
    """
    枚举全部非零硬选择，在每个选择下求解预编码，保留可行且EE最大的结果

    Args:
        problem: 优化问题（N_t ≤ 4）
        solver: 'admm' 用 ao_admm，'grid' 用 grid_search
        resolution: 网格分辨率（solver='grid' 时）
        workers: 并行进程数

    Returns:
        OracleResult: candidate_ee 记录每个选择的结果（不可行为 -inf）
    """
    n_tx = problem.cfg.n_tx
    if n_tx > MAX_ENUM_TX:
        raise InvalidArgumentError('n_tx', n_tx, f"穷举选择只支持 N_t ≤ {MAX_ENUM_TX}")
    if solver not in ORACLE_SOLVERS:
        raise InvalidArgumentError('solver', solver, f"可选 {ORACLE_SOLVERS}")
    lams = hard_selections(n_tx)
    logger.info(f"穷举 {len(lams)} 种射频链选择 (solver={solver})")
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_solve_selection, itertools.repeat(problem), lams,
                                    itertools.repeat(solver), itertools.repeat(resolution)))
    else:
        results = [_solve_selection(problem, lam, solver, resolution) for lam in lams]

    best: Optional[OracleResult] = None
    candidates: Dict[str, float] = {}
    evaluations = 0
    for lam, res in zip(lams, results):
        evaluations += res.evaluations
        candidates[selection_key(lam)] = res.best_ee if res.feasible else -math.inf
        if res.feasible and (best is None or res.best_ee > best.best_ee):
            best = res
    spec = {'solver': solver, 'selections': len(lams)}
    if solver == 'grid':
        spec['resolution'] = resolution
    if best is None:
        logger.warning("所有射频链选择均不可行")
        return OracleResult(status='infeasible', evaluations=evaluations, grid_spec=spec, candidate_ee=candidates)
    best.evaluations = evaluations
    best.grid_spec = spec
    best.candidate_ee = candidates
    logger.info(f"穷举最优: 选择 {selection_key(best.best_selection)}, EE={best.best_ee:.6f}")
    return best
