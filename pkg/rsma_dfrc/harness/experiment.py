"""
实验模块
蒙特卡洛扫描：按 (扫描点, 试验) 分发任务到进程池，
每个任务生成实例、运行联合优化并计算通信与雷达指标
"""

import itertools
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from dataclasses_json import config, dataclass_json

from rsma_dfrc.core.comms import energy_efficiency
from rsma_dfrc.core.models import (
    ChannelSet, PrecoderBlock, QuantConfig, RfSelection, SystemConfig, complex_normal,
)
from rsma_dfrc.core.radar import (
    RadarReference, covariance_model, crb_doa, detection_probability, detection_rho,
    radar_snr, reference_detection, reference_tracking,
)
from rsma_dfrc.optim.ao import ao_full
from rsma_dfrc.optim.problem import SCHEMES, DfrcProblem
from rsma_dfrc.optim.saa import ao_full_saa, saa_channels
from rsma_dfrc.utils.config import AlgorithmConfig, Config, RunConfig, parse_config_text
from rsma_dfrc.utils.errors import ConfigError, DfrcError, ErrorCollector, InvalidArgumentError
from rsma_dfrc.utils.helpers import (
    decode_complex, decode_real, encode_complex, encode_real, float_range, format_duration,
    is_sorted, spawn_rng,
)
from rsma_dfrc.utils.resource_manager import PointBudget

logger = logging.getLogger(__name__)

_REAL = config(encoder=encode_real, decoder=decode_real)
_COMPLEX = config(encoder=encode_complex, decoder=decode_complex)

MODES = ('detection', 'tracking')
CSIT_MODES = ('perfect', 'imperfect')
SWEEP_PARAMETERS = ('tau', 'bits', 'r_th', 'sigma_ce')

# 平均检测概率所用的角度网格点数
DETECTION_GRID = 37


@dataclass
class Experiment:
    """
    一次扫描实验

    sweep 为 (参数, 取值列表) 的列表，扫描点取各参数取值的笛卡尔积。
    同一试验序号在所有扫描点上使用相同的信道、符号与信道样本。
    """
    base: SystemConfig = field(default_factory=SystemConfig.table1)
    algo: AlgorithmConfig = field(default_factory=AlgorithmConfig)
    mode: str = 'detection'
    scheme: str = 'rsma'
    csit: str = 'perfect'
    samples: int = 16
    sweep: List[Tuple[str, List[float]]] = field(default_factory=list)
    trials: int = 1
    seed: int = 0
    bits: int = 4
    r_th: float = 0.0
    tau: float = math.inf
    thetas: List[float] = field(default_factory=lambda: [math.pi / 4])
    diag_only: Optional[bool] = None
    norm: str = 'frobenius'
    p_f: float = 1e-7
    alpha_r: float = 0.1
    point_budget_s: float = 600.0
    workers: int = 1

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidArgumentError('mode', self.mode, f"可选 {MODES}")
        if self.scheme not in SCHEMES:
            raise InvalidArgumentError('scheme', self.scheme, f"可选 {SCHEMES}")
        if self.csit not in CSIT_MODES:
            raise InvalidArgumentError('csit', self.csit, f"可选 {CSIT_MODES}")
        if self.trials < 1:
            raise InvalidArgumentError('trials', self.trials, "试验次数必须 ≥ 1")
        if self.samples < 1:
            raise InvalidArgumentError('samples', self.samples, "样本数必须 ≥ 1")
        self.sweep = [(name, [float(v) for v in values]) for name, values in self.sweep]
        for name, values in self.sweep:
            if name not in SWEEP_PARAMETERS:
                raise InvalidArgumentError('sweep', name, f"可扫描参数 {SWEEP_PARAMETERS}")
            if not values or not all(math.isfinite(v) for v in values) or not is_sorted(values):
                raise InvalidArgumentError('sweep', name, "扫描取值必须有限、非空且升序")
        if self.diag_only is None:
            self.diag_only = self.mode == 'detection'

    @classmethod
    def from_config(cls, cfg: Config, **overrides) -> 'Experiment':
        run = cfg.run
        base = dict(base=cfg.system, algo=cfg.algorithm, trials=run.trials, seed=run.seed,
                    samples=run.samples, bits=run.bits, r_th=run.r_th, tau=run.tau,
                    p_f=run.p_f, alpha_r=run.alpha_r, point_budget_s=run.point_budget_s,
                    workers=run.workers)
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)

    def points(self) -> List[Dict[str, float]]:
        """全部扫描点；没有扫描参数时只有一个空点"""
        names = [name for name, _ in self.sweep]
        return [dict(zip(names, combo)) for combo in itertools.product(*(v for _, v in self.sweep))]

    def params_at(self, point: Dict[str, float]) -> Dict[str, Any]:
        """扫描点上的实际参数"""
        return {
            'tau': point.get('tau', self.tau),
            'bits': int(point.get('bits', self.bits)),
            'r_th': point.get('r_th', self.r_th),
            'sigma_ce': point.get('sigma_ce', self.base.sigma_ce),
        }

    def reference(self, cfg: SystemConfig, tau: float) -> RadarReference:
        if self.mode == 'detection':
            return reference_detection(cfg, tau, diag_only=self.diag_only, norm=self.norm)
        return reference_tracking(self.thetas, cfg, tau, diag_only=self.diag_only, norm=self.norm)


@dataclass_json
@dataclass
class ExperimentRow:
    """单个 (扫描点, 试验) 的结果；失败的任务 status 为 failed"""
    point: int
    trial: int
    params: Dict[str, float]
    scheme: str
    mode: str
    csit: str
    bits: int
    status: str
    ee: float = math.nan
    sum_rate: float = math.nan
    n_active: int = 0
    p_d: Optional[float] = None
    crb: Optional[float] = None
    similarity: float = math.nan
    solve_time: float = 0.0
    truncated: bool = False
    error: Optional[str] = None
    precoders: Optional[np.ndarray] = field(default=None, metadata=_COMPLEX)
    common_alloc: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    symbols: Optional[np.ndarray] = field(default=None, metadata=_COMPLEX)
    selection: Optional[np.ndarray] = field(default=None, metadata=_REAL)
    resources: Dict[str, Any] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status != 'failed'


@dataclass
class ExperimentResult:
    """扫描结果：行按 (扫描点, 试验) 排序"""
    experiment: Experiment
    rows: List[ExperimentRow] = field(default_factory=list)
    errors: Dict[str, Any] = field(default_factory=dict)
    elapsed: float = 0.0

    @property
    def failed(self) -> List[ExperimentRow]:
        return [r for r in self.rows if not r.ok]

    def problem_for(self, row: ExperimentRow) -> DfrcProblem:
        point = self.experiment.points()[row.point]
        return build_problem(self.experiment, point, row.trial)

    def recompute_ee(self, row: ExperimentRow) -> float:
        """由行中保存的预编码与选择重新计算能效"""
        problem = self.problem_for(row)
        block = PrecoderBlock(row.precoders, row.common_alloc, row.symbols)
        sel = RfSelection(row.selection)
        channels = problem.channels
        if self.experiment.csit == 'imperfect':
            channels = _saa_channels(self.experiment, problem, row.trial)
        return energy_efficiency(block, channels, problem.quant, sel, problem.cfg)

    def summary(self) -> Dict[str, Any]:
        ok = [r for r in self.rows if r.ok]
        return {
            'points': len(self.experiment.points()),
            'trials': self.experiment.trials,
            'rows': len(self.rows),
            'failed': len(self.rows) - len(ok),
            'mean_ee': float(np.mean([r.ee for r in ok])) if ok else math.nan,
            'elapsed': format_duration(self.elapsed),
        }


def build_problem(exp: Experiment, point: Dict[str, float], trial: int) -> DfrcProblem:
    """
    生成某个 (扫描点, 试验) 的优化问题

    信道与符号只由 (seed, trial) 决定；不完美CSIT时生成的是信道估计 ĥ。
    """
    params = exp.params_at(point)
    cfg = exp.base.with_(sigma_ce=params['sigma_ce'])
    rng = spawn_rng(exp.seed, trial)
    h = complex_normal(rng, (cfg.n_users, cfg.n_tx))
    channels = ChannelSet(h=h, h_hat=h if exp.csit == 'imperfect' else None)
    quant = QuantConfig.from_bits(params['bits'], cfg.n_tx, variance_form=exp.algo.variance_form)
    return DfrcProblem(cfg=cfg, channels=channels, quant=quant, ref=exp.reference(cfg, params['tau']),
                       r_th=params['r_th'], scheme=exp.scheme, algo=exp.algo, rng=rng)


def _saa_rng(exp: Experiment, trial: int) -> np.random.Generator:
    # 独立于扫描点的样本子流
    return spawn_rng(exp.seed, trial, 1)


def _saa_channels(exp: Experiment, problem: DfrcProblem, trial: int) -> ChannelSet:
    return saa_channels(problem.channels.h, problem.cfg.sigma_ce, exp.samples, _saa_rng(exp, trial))


def average_detection(p: PrecoderBlock, problem: DfrcProblem, sel: RfSelection,
                      alpha_r: float, p_f: float, n_grid: int = DETECTION_GRID) -> float:
    """在 [−π/2, π/2] 的角度网格上平均的检测概率"""
    thetas = np.linspace(-math.pi / 2, math.pi / 2, n_grid)
    return float(np.mean([
        detection_probability(detection_rho(p, problem.quant, sel, th, alpha_r, problem.cfg), p_f)
        for th in thetas
    ]))


def worst_crb(p: PrecoderBlock, problem: DfrcProblem, sel: RfSelection, thetas: Sequence[float],
              alpha_r: float) -> float:
    """各目标角度上的CRB取最大值"""
    cfg = problem.cfg
    r_norm = covariance_model(p, problem.quant, sel) / (cfg.p_ant * cfg.block_len)
    snr = radar_snr(alpha_r, cfg)
    return max(crb_doa(r_norm, th, snr, cfg) for th in thetas)


def run_trial(exp: Experiment, point_index: int, point: Dict[str, float], trial: int) -> ExperimentRow:
    """
    单个任务的工作函数（用于多进程执行）

    求解器失败（DfrcError 与线性代数错误）记录在行中；其他异常属于程序错误，向上抛出。
    """
    start = time.time()
    params = exp.params_at(point)
    row = ExperimentRow(point=point_index, trial=trial, params=dict(point), scheme=exp.scheme,
                        mode=exp.mode, csit=exp.csit, bits=params['bits'], status='failed')
    budget = PointBudget(wall_time_s=exp.point_budget_s)
    try:
        with budget:
            problem = build_problem(exp, point, trial)
            if exp.csit == 'imperfect':
                report = ao_full_saa(problem, exp.samples, rng=_saa_rng(exp, trial), budget=budget)
            else:
                report = ao_full(problem, budget=budget)
        p, sel = report.precoder_block(), report.rf_selection()
        row.status = report.status
        row.ee = report.ee
        row.sum_rate = report.sum_rate
        row.n_active = report.n_active
        row.similarity = report.similarity
        row.precoders, row.common_alloc = report.precoders, report.common_alloc
        row.symbols, row.selection = report.symbols, report.selection
        if exp.mode == 'detection':
            row.p_d = average_detection(p, problem, sel, exp.alpha_r, exp.p_f)
        else:
            row.crb = worst_crb(p, problem, sel, exp.thetas, exp.alpha_r)
        logger.info(f"完成 点 {point_index} 试验 {trial}: EE={row.ee:.4f}, SR={row.sum_rate:.3f}, "
                    f"激活 {row.n_active} ({time.time() - start:.2f}s)")
    except (DfrcError, np.linalg.LinAlgError) as e:
        row.error = f"{type(e).__name__}: {getattr(e, 'message', e)}"
        logger.error(f"点 {point_index} 试验 {trial} 失败: {row.error}")
    row.solve_time = time.time() - start
    row.truncated = budget.truncated
    row.resources = budget.summary()
    return row


def _record_crash(collector: ErrorCollector, error: Exception, point_index: int, trial: int):
    """程序错误不进入结果行，记入收集器后由调用方重新抛出"""
    logger.critical(f"任务 (点 {point_index}, 试验 {trial}) 异常终止: {type(error).__name__}: {error}",
                    exc_info=error)
    collector.add_error(error, point=f"{point_index}/{trial}")


def run_experiment(exp: Experiment, show_progress: bool = True,
                   error_collector: Optional[ErrorCollector] = None) -> ExperimentResult:
    """
    运行扫描实验

    Args:
        exp: 实验描述
        show_progress: 是否显示rich进度条
        error_collector: 错误收集器（默认新建）

    Returns:
        ExperimentResult: 失败的任务标记为 failed，其余任务照常完成

    Raises:
        Exception: 任务中出现 DfrcError / LinAlgError 以外的异常时记入收集器并重新抛出
    """
    start = time.time()
    collector = error_collector or ErrorCollector()
    points = exp.points()
    tasks = [(i, pt, t) for i, pt in enumerate(points) for t in range(exp.trials)]
    logger.info(f"开始实验: {len(points)} 个扫描点 × {exp.trials} 次试验, "
                f"{exp.mode}/{exp.scheme}/{exp.csit}, 进程数 {exp.workers}")
    rows: List[ExperimentRow] = []

    from rich.progress import BarColumn, Progress, SpinnerColumn, TextColumn, TimeRemainingColumn

    with Progress(
        SpinnerColumn(),
        TextColumn("[progress.description]{task.description}", justify="right"),
        BarColumn(),
        TextColumn("[progress.percentage]{task.percentage:>3.0f}%"),
        TimeRemainingColumn(),
        TextColumn("({task.completed}/{task.total} 任务)"),
        disable=not show_progress,
    ) as progress:
        overall = progress.add_task("[bold blue]总进度", total=len(tasks))
        if exp.workers <= 1:
            for i, pt, t in tasks:
                try:
                    rows.append(run_trial(exp, i, pt, t))
                except Exception as e:
                    _record_crash(collector, e, i, t)
                    raise
                progress.update(overall, advance=1)
        else:
            with ProcessPoolExecutor(max_workers=exp.workers) as executor:
                future_to_task = {executor.submit(run_trial, exp, i, pt, t): (i, t) for i, pt, t in tasks}
                for future in as_completed(future_to_task):
                    i, t = future_to_task[future]
                    try:
                        rows.append(future.result())
                    except Exception as e:
                        _record_crash(collector, e, i, t)
                        executor.shutdown(wait=False, cancel_futures=True)
                        raise
                    progress.update(overall, advance=1)

    rows.sort(key=lambda r: (r.point, r.trial))
    for row in rows:
        if not row.ok:
            collector.add_error(DfrcError(row.error or "未知错误", {'params': row.params}),
                                point=f"{row.point}/{row.trial}")
        elif row.truncated:
            collector.add_warning("超出时间预算，结果为当前最优解", point=f"{row.point}/{row.trial}")
    result = ExperimentResult(experiment=exp, rows=rows, errors=collector.get_error_summary(),
                              elapsed=time.time() - start)
    logger.info(f"实验结束: {result.summary()}")
    return result


def _parse_sweep(raw: str, path: Optional[str], key: str) -> List[float]:
    """'1:8:0.5' 为含端点等差序列，否则为逗号分隔的取值"""
    try:
        if ':' in raw:
            start, stop, step = (float(x) for x in raw.split(':'))
            return float_range(start, stop, step)
        return [float(x) for x in raw.split(',') if x.strip()]
    except ValueError:
        raise ConfigError(path, key, f"无法解析扫描取值 {raw!r}")


_EXPERIMENT_KEYS = ('mode', 'scheme', 'csit', 'thetas', 'diag_only', 'norm')


def load_experiment(path: Union[str, Path], **overrides) -> Experiment:
    """
    读取实验文件

    除系统/算法/运行参数外还接受 mode、scheme、csit、thetas、diag_only、norm
    以及 sweep.<参数> = 起点:终点:步长 或 逗号分隔列表。
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), None, "实验文件不存在")
    rest, extra, sweep = [], {}, []
    for line in path.read_text(encoding='utf-8').splitlines():
        body = line.split('#', 1)[0].strip()
        key = body.split('=', 1)[0].strip() if '=' in body else ''
        raw = body.split('=', 1)[1].strip() if '=' in body else ''
        if key.startswith('sweep.'):
            sweep.append((key[len('sweep.'):], _parse_sweep(raw, str(path), key)))
        elif key in _EXPERIMENT_KEYS:
            if key == 'thetas':
                extra[key] = _parse_sweep(raw, str(path), key)
            elif key == 'diag_only':
                extra[key] = raw.lower() in ('1', 'true', 'yes', 'on')
            else:
                extra[key] = raw
        else:
            rest.append(line)
    sections = parse_config_text("\n".join(rest), str(path))
    try:
        cfg = Config(SystemConfig(**sections['system']), AlgorithmConfig(**sections['algorithm']),
                     RunConfig(**sections['run']))
    except DfrcError as exc:
        raise ConfigError(str(path), None, exc.message)
    extra.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Experiment.from_config(cfg, sweep=sweep, **extra)
    except InvalidArgumentError as exc:
        raise ConfigError(str(path), exc.details.get('argument'), exc.message)
