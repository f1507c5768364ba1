"""
求解报告模块
优化结果的JSON序列化与逐次迭代轨迹CSV
"""

import csv
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

import numpy as np
from dataclasses_json import config, dataclass_json

from rsma_dfrc.core.comms import RateReport
from rsma_dfrc.core.models import PrecoderBlock, RfSelection
from rsma_dfrc.optim.problem import DfrcProblem, Validator
from rsma_dfrc.utils.helpers import decode_complex, decode_real, encode_complex, encode_real

logger = logging.getLogger(__name__)

_REAL = config(encoder=encode_real, decoder=decode_real)
_COMPLEX = config(encoder=encode_complex, decoder=decode_complex)

STATUSES = ('converged', 'max_iterations', 'stalled', 'infeasible')

TRACE_COLUMNS = ('iter', 'ee', 'r_norm', 'q_norm', 'n_active')

# 轨迹允许的EE回退量
MONOTONE_TOL = 1e-6


@dataclass_json
@dataclass
class SolveReport:
    """一次优化运行的结果"""
    status: str
    ee: float
    ee_trace: List[float] = field(default_factory=list)
    precoders: Optional[np.ndarray] = field(default=None, metadata=_COMPLEX)
    common_alloc: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    symbols: Optional[np.ndarray] = field(default=None, metadata=_COMPLEX)
    selection: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    relaxed_selection: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    scheme: str = 'rsma'
    rates: Optional[RateReport] = None
    sum_rate: float = 0.0
    total_power: float = 0.0
    similarity: float = 0.0
    slacks: Dict[str, float] = field(default_factory=dict)
    outer_iterations: int = 0
    inner_iterations: int = 0
    solve_time: float = 0.0
    trace: List[List[float]] = field(default_factory=list)
    stats: Dict[str, Any] = field(default_factory=dict)

    def precoder_block(self) -> PrecoderBlock:
        return PrecoderBlock(self.precoders, self.common_alloc, self.symbols)

    def rf_selection(self) -> RfSelection:
        return RfSelection(self.selection)

    @property
    def feasible(self) -> bool:
        return self.status != 'infeasible'

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(np.asarray(self.selection) > 0.5)) if self.selection is not None else 0

    def is_monotone(self, tol: float = MONOTONE_TOL) -> bool:
        """EE轨迹是否单调不减"""
        return all(b >= a - tol for a, b in zip(self.ee_trace, self.ee_trace[1:]))

    def save_json(self, path: Union[str, Path]) -> Path:
        """写出JSON报告"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        try:
            with open(path, 'w', encoding='utf-8') as f:
                json.dump(self.to_dict(encode_json=True), f, indent=2, ensure_ascii=False)
            logger.info(f"JSON报告已生成: {path}")
            return path
        except OSError as e:
            logger.error(f"生成JSON报告失败: {e}")
            raise

    @classmethod
    def load_json(cls, path: Union[str, Path]) -> 'SolveReport':
        with open(path, 'r', encoding='utf-8') as f:
            return cls.from_dict(json.load(f))

    def write_trace_csv(self, path: Union[str, Path]) -> Path:
        """写出迭代轨迹 iter, ee, r_norm, q_norm, n_active"""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', newline='', encoding='utf-8') as f:
            writer = csv.writer(f)
            writer.writerow(TRACE_COLUMNS)
            for row in self.trace:
                it, ee, r_norm, q_norm, n_active = row
                writer.writerow([int(it), f"{ee:.12g}", f"{r_norm:.12g}", f"{q_norm:.12g}", int(n_active)])
        logger.info(f"迭代轨迹已写出: {path} ({len(self.trace)} 行)")
        return path

    def summary(self) -> Dict[str, Any]:
        return {
            'status': self.status,
            'scheme': self.scheme,
            'ee': round(self.ee, 6),
            'sum_rate': round(self.sum_rate, 6),
            'total_power': round(self.total_power, 6),
            'n_active': self.n_active,
            'similarity': round(self.similarity, 6),
            'outer_iterations': self.outer_iterations,
            'inner_iterations': self.inner_iterations,
            'solve_time': round(self.solve_time, 3),
        }


def build_report(problem: DfrcProblem, p: PrecoderBlock, sel: RfSelection, status: str,
                 ee_trace: List[float], trace: List[List[float]], outer: int, inner: int,
                 solve_time: float, relaxed: Optional[RfSelection] = None,
                 stats: Optional[Dict[str, Any]] = None) -> SolveReport:
    """
    由最终预编码与选择组装报告，所有指标都在返回前重新计算

    Args:
        problem: 优化问题
        p: 最终预编码
        sel: 最终（硬）选择
        status: 运行状态
        ee_trace: EE轨迹
        trace: 轨迹行
        outer: 外层迭代数
        inner: 内层迭代总数
        solve_time: 耗时（秒）
        relaxed: 松弛选择（若有）
        stats: 附加统计

    Returns:
        SolveReport: 报告
    """
    rates = problem.rates(p, sel)
    p_tot = problem.power(sel)
    return SolveReport(
        status=status,
        ee=rates.sum_rate / p_tot,
        ee_trace=list(ee_trace),
        precoders=p.p,
        common_alloc=p.c,
        symbols=p.s,
        selection=sel.lam,
        relaxed_selection=None if relaxed is None else relaxed.lam,
        scheme=problem.scheme,
        rates=rates,
        sum_rate=rates.sum_rate,
        total_power=p_tot,
        similarity=problem.similarity(p, sel),
        slacks=Validator(problem).slacks(p, sel),
        outer_iterations=outer,
        inner_iterations=inner,
        solve_time=solve_time,
        trace=[list(map(float, row)) for row in trace],
        stats=stats or {},
    )
