"""
图数据模块
把实验结果聚合成整洁的CSV：按 (方案, 比特数, CSIT) 分组，
对每个扫描点取试验平均，再按侧约束筛选并保留帕累托最优点
"""

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from rsma_dfrc.core.models import PrecoderBlock, QuantConfig, RfSelection
from rsma_dfrc.core.radar import beampattern, covariance_model
from rsma_dfrc.harness.experiment import ExperimentResult, ExperimentRow
from rsma_dfrc.utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

FIGURE_COLUMNS = ('x', 'y', 'n_active', 'scheme', 'b', 'csit')
# fig5a_ee.csv 额外给出 EE 随 τ 的累计最大值
ENVELOPE_COLUMNS = FIGURE_COLUMNS + ('y_envelope',)
PATTERN_COLUMNS = ('theta_rad', 'value')

# 方向图角度网格点数
PATTERN_GRID = 361


@dataclass(frozen=True)
class FigureSpec:
    """x 为横轴指标；side 为 (指标, 门限)，要求平均值大于门限"""
    mode: str
    x: str
    side: Optional[Tuple[str, float]]
    x_higher_better: bool = True


FIGURES: Dict[str, FigureSpec] = {
    'fig2': FigureSpec('detection', 'p_d', ('sum_rate', 10.0)),
    'fig3': FigureSpec('tracking', 'crb', ('sum_rate', 5.0), x_higher_better=False),
    'fig4': FigureSpec('detection', 'sum_rate', ('p_d', 0.8)),
    'fig5a': FigureSpec('tracking', 'tau', ('sum_rate', 5.0)),
    'fig5b': FigureSpec('tracking', 'tau', None),
}


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def _metric(row: ExperimentRow, name: str) -> Optional[float]:
    if name == 'tau':
        return row.params.get('tau')
    value = getattr(row, name)
    return None if value is None else float(value)


def aggregate(results: Sequence[ExperimentResult], metrics: Sequence[str]) -> Dict[tuple, List[Dict[str, float]]]:
    """
    按 (方案, 比特数, CSIT) 分组，每个扫描点对成功试验取平均

    Returns:
        Dict[tuple, List[Dict[str, float]]]: 分组 → 按扫描点顺序的平均指标
    """
    groups: Dict[tuple, Dict[Tuple[int, int], List[ExperimentRow]]] = defaultdict(lambda: defaultdict(list))
    for res in results:
        for row in res.rows:
            if row.ok:
                groups[(row.scheme, row.bits, row.csit)][(id(res), row.point)].append(row)
    out: Dict[tuple, List[Dict[str, float]]] = {}
    for key in sorted(groups):
        points = []
        for rows in groups[key].values():
            entry = {'ee': float(np.mean([r.ee for r in rows])),
                     'n_active': float(np.mean([r.n_active for r in rows])),
                     'tau': rows[0].params.get('tau', math.nan)}
            for name in metrics:
                values = [_metric(r, name) for r in rows]
                entry[name] = float(np.mean(values)) if all(v is not None for v in values) else math.nan
            points.append(entry)
        out[key] = points
    return out


def pareto_front(points: List[Dict[str, float]], x: str, x_higher_better: bool) -> List[Dict[str, float]]:
    """保留在 (x, EE) 上不被支配的点，按 x 升序"""
    sign = 1.0 if x_higher_better else -1.0
    front = []
    for p in points:
        dominated = any(
            sign * q[x] >= sign * p[x] and q['ee'] >= p['ee'] and (sign * q[x] > sign * p[x] or q['ee'] > p['ee'])
            for q in points
        )
        if not dominated:
            front.append(p)
    return sorted(front, key=lambda p: (p[x], p['ee']))


def _passes(entry: Dict[str, float], side: Optional[Tuple[str, float]], threshold: Optional[float]) -> bool:
    if side is None:
        return True
    name, default = side
    value = entry.get(name, math.nan)
    return math.isfinite(value) and value > (default if threshold is None else threshold)


def _write_rows(path: Path, columns: Sequence[str], rows: List[List[Any]]) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', newline='', encoding='utf-8') as f:
        writer = csv.writer(f, lineterminator='\n')
        writer.writerow(columns)
        writer.writerows(rows)
    logger.info(f"图数据已写出: {path} ({len(rows)} 行)")
    return path


def _figure_rows(key: tuple, points: List[Dict[str, float]], x: str) -> List[List[Any]]:
    scheme, bits, csit = key
    return [[_fmt(p[x]), _fmt(p['ee']), _fmt(p['n_active']), scheme, bits, csit] for p in points]


def emit_figure_data(results: Union[ExperimentResult, Sequence[ExperimentResult]], which: str,
                     out_dir: Union[str, Path], threshold: Optional[float] = None) -> List[Path]:
    """
    写出某幅图的CSV

    fig2/fig3/fig4 为帕累托前沿；fig5a 写出 EE（各 τ 的平均值及累计最大值）与 CRB 两个文件；
    fig5b 对每个 τ 取第一个成功试验的协方差写出方向图。

    Args:
        results: 一个或多个同模式的实验结果
        which: fig2 | fig3 | fig4 | fig5a | fig5b
        out_dir: 输出目录
        threshold: 覆盖默认的侧约束门限

    Returns:
        List[Path]: 写出的文件

    Raises:
        InvalidArgumentError: 未知的图或实验模式不匹配
    """
    if which not in FIGURES:
        raise InvalidArgumentError('which', which, f"可选 {tuple(FIGURES)}")
    spec = FIGURES[which]
    results = [results] if isinstance(results, ExperimentResult) else list(results)
    for res in results:
        if res.experiment.mode != spec.mode:
            raise InvalidArgumentError('mode', res.experiment.mode, f"{which} 需要 {spec.mode} 模式的实验")
    out_dir = Path(out_dir)
    if which == 'fig5b':
        return _emit_beampatterns(results, out_dir)

    metrics = [spec.x] + ([spec.side[0]] if spec.side else [])
    if which == 'fig5a':
        metrics.append('crb')
    grouped = aggregate(results, metrics)
    if which == 'fig5a':
        return _emit_vs_tau(grouped, spec, threshold, out_dir)

    rows: List[List[Any]] = []
    for key, points in grouped.items():
        kept = [p for p in points if _passes(p, spec.side, threshold) and math.isfinite(p[spec.x])]
        rows.extend(_figure_rows(key, pareto_front(kept, spec.x, spec.x_higher_better), spec.x))
    return [_write_rows(out_dir / f"{which}.csv", FIGURE_COLUMNS, rows)]


def _emit_vs_tau(grouped: Dict[tuple, List[Dict[str, float]]], spec: FigureSpec,
                 threshold: Optional[float], out_dir: Path) -> List[Path]:
    ee_rows: List[List[Any]] = []
    crb_rows: List[List[Any]] = []
    for key, points in grouped.items():
        kept = sorted((p for p in points if _passes(p, spec.side, threshold) and math.isfinite(p['tau'])),
                      key=lambda p: p['tau'])
        best = -math.inf
        for p in kept:
            # τ 越大可行集越大，已达到的EE在更大的 τ 下仍可达到
            best = max(best, p['ee'])
            ee_rows.append(_figure_rows(key, [p], 'tau')[0] + [_fmt(best)])
            crb_rows.append(_figure_rows(key, [dict(p, ee=p['crb'])], 'tau')[0])
    return [_write_rows(out_dir / "fig5a_ee.csv", ENVELOPE_COLUMNS, ee_rows),
            _write_rows(out_dir / "fig5a_crb.csv", FIGURE_COLUMNS, crb_rows)]


def pattern_from_row(result: ExperimentResult, row: ExperimentRow,
                     thetas: Optional[np.ndarray] = None) -> Tuple[np.ndarray, np.ndarray]:
    """由行中保存的预编码计算归一化协方差的方向图"""
    exp = result.experiment
    cfg = exp.base
    thetas = np.linspace(-math.pi / 2, math.pi / 2, PATTERN_GRID) if thetas is None else np.asarray(thetas)
    quant = QuantConfig.from_bits(row.bits, cfg.n_tx, variance_form=exp.algo.variance_form)
    block = PrecoderBlock(row.precoders, row.common_alloc, row.symbols)
    r_norm = covariance_model(block, quant, RfSelection(row.selection)) / (cfg.p_ant * cfg.block_len)
    return thetas, beampattern(r_norm, thetas, cfg.d_norm)


def _emit_beampatterns(results: List[ExperimentResult], out_dir: Path) -> List[Path]:
    paths = []
    for res in results:
        seen = set()
        for row in res.rows:
            if not row.ok or row.point in seen:
                continue
            seen.add(row.point)
            thetas, values = pattern_from_row(res, row)
            tau = row.params.get('tau', res.experiment.tau)
            name = f"fig5b_{row.scheme}_b{row.bits}_{row.csit}_tau{_fmt(tau)}.csv"
            paths.append(_write_rows(out_dir / name, PATTERN_COLUMNS,
                                     [[_fmt(t), _fmt(v)] for t, v in zip(thetas, values)]))
    return paths


def write_curve(path: Union[str, Path], thetas: Sequence[float], values: Sequence[float]) -> Path:
    """写出 theta_rad, value 两列的曲线"""
    return _write_rows(Path(path), PATTERN_COLUMNS, [[_fmt(t), _fmt(v)] for t, v in zip(thetas, values)])


def load_figure_csv(path: Union[str, Path]) -> List[Dict[str, Any]]:
    """
    读取图数据CSV，按列类型还原

    Returns:
        List[Dict[str, Any]]: 每行一个字典
    """
    rows = []
    with open(path, 'r', newline='', encoding='utf-8') as f:
        reader = csv.DictReader(f)
        columns = tuple(reader.fieldnames or ())
        if columns not in (FIGURE_COLUMNS, ENVELOPE_COLUMNS, PATTERN_COLUMNS):
            raise InvalidArgumentError('columns', columns, "不是图数据CSV")
        for rec in reader:
            if columns == PATTERN_COLUMNS:
                rows.append({'theta_rad': float(rec['theta_rad']), 'value': float(rec['value'])})
            else:
                rows.append({'x': float(rec['x']), 'y': float(rec['y']), 'n_active': float(rec['n_active']),
                             'scheme': rec['scheme'], 'b': int(rec['b']), 'csit': rec['csit']})
                if columns == ENVELOPE_COLUMNS:
                    rows[-1]['y_envelope'] = float(rec['y_envelope'])
    return rows
