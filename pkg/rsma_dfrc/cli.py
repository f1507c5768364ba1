"""
命令行接口模块
提供单实例优化、扫描实验、方向图、穷举对比与自检命令
"""

import json
import logging
import math
import sys
from functools import wraps
from pathlib import Path
from typing import Optional

import click

from rsma_dfrc import __version__
from rsma_dfrc.harness.experiment import CSIT_MODES, MODES, Experiment, build_problem, load_experiment, run_experiment
from rsma_dfrc.harness.figures import emit_figure_data
from rsma_dfrc.harness.selftest import run_selftest
from rsma_dfrc.optim.ao import ao_full
from rsma_dfrc.optim.problem import SCHEMES
from rsma_dfrc.optim.saa import ao_full_saa
from rsma_dfrc.oracle.search import ORACLE_SOLVERS, exhaustive_selection, selection_key
from rsma_dfrc.utils.config import Config
from rsma_dfrc.utils.errors import ConfigError, DfrcError
from rsma_dfrc.utils.helpers import float_range, spawn_rng

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_INFEASIBLE = 2
EXIT_SOLVER = 3
EXIT_CONFIG = 4

DEFAULT_FIGURES = {'detection': ('fig2', 'fig4'), 'tracking': ('fig3', 'fig5a', 'fig5b')}


def setup_logging(verbose: bool):
    """设置日志配置"""
    level = logging.INFO if verbose else logging.WARNING

    formatter = logging.Formatter(
        '%(asctime)s - %(name)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )
    console_handler = logging.StreamHandler()
    console_handler.setFormatter(formatter)

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    root_logger.addHandler(console_handler)

    # 静默第三方库的日志
    logging.getLogger('numpy').setLevel(logging.ERROR)
    logging.getLogger('scipy').setLevel(logging.ERROR)


def handle_errors(func):
    """把 DfrcError 转换成约定的退出码"""
    @wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except DfrcError as e:
            click.echo(f"❌ {type(e).__name__}: {e.message}", err=True)
            sys.exit(e.exit_code)
        except KeyboardInterrupt:
            click.echo("\n⚠️  用户中断")
            sys.exit(1)
    return wrapper


def load_cli_config(config_path: Optional[str], **overrides) -> Config:
    """读取配置文件（可选）并应用命令行覆盖"""
    cfg = Config.from_file(config_path) if config_path else Config()
    cfg.update_from_cli_args(**overrides)
    errors = cfg.validate()
    if errors:
        raise ConfigError(config_path, None, "; ".join(errors))
    return cfg


def _out_dir(out: Optional[str], cfg: Config) -> Path:
    path = Path(out or cfg.run.output_dir)
    path.mkdir(parents=True, exist_ok=True)
    return path


@click.group()
@click.version_option(version=__version__)
def cli():
    """RSMA 双功能雷达通信系统的能效优化工具"""
    pass


@cli.command()
@click.option('--config', 'config_path', default=None, help='key = value 配置文件')
@click.option('--seed', default=None, type=int, help='随机种子')
@click.option('--out', default=None, help='输出目录')
@click.option('--scheme', type=click.Choice(SCHEMES), default='rsma', help='多址方案')
@click.option('--mode', type=click.Choice(MODES), default='detection', help='雷达模式')
@click.option('--csit', type=click.Choice(CSIT_MODES), default='perfect', help='信道状态信息')
@click.option('--samples', default=None, type=int, help='不完美CSIT时的信道样本数 M')
@click.option('--tau', default=None, type=float, help='相似度门限（默认不约束）')
@click.option('--r-th', 'r_th', default=None, type=float, help='和速率门限 (bit/s/Hz)')
@click.option('--bits', default=None, type=int, help='DAC量化比特数')
@click.option('-v', '--verbose', is_flag=True, help='详细输出模式')
@handle_errors
def optimize(config_path, seed, out, scheme, mode, csit, samples, tau, r_th, bits, verbose):
    """
    单实例联合优化

    示例:
        rsma-dfrc optimize --seed 1 --tau 4 --out results
        rsma-dfrc optimize --config table1.cfg --csit imperfect --samples 16
    """
    setup_logging(verbose)
    cfg = load_cli_config(config_path, seed=seed, samples=samples, tau=tau, r_th=r_th, bits=bits)
    exp = Experiment.from_config(cfg, scheme=scheme, mode=mode, csit=csit)
    problem = build_problem(exp, {}, trial=0)
    if csit == 'imperfect':
        report = ao_full_saa(problem, exp.samples, rng=spawn_rng(exp.seed, 0, 1))
    else:
        report = ao_full(problem)
    out_dir = _out_dir(out, cfg)
    report.save_json(out_dir / 'report.json')
    report.write_trace_csv(out_dir / 'trace.csv')

    summary = report.summary()
    click.echo("=" * 60)
    click.echo(f"🎯 状态: {summary['status']}")
    click.echo(f"   EE: {summary['ee']:.6f} bit/J/Hz")
    click.echo(f"   和速率: {summary['sum_rate']:.4f} bit/s/Hz")
    click.echo(f"   总功耗: {summary['total_power']:.4f} W")
    click.echo(f"   激活射频链: {summary['n_active']}/{problem.cfg.n_tx} ({selection_key(report.selection)})")
    click.echo(f"   外层/内层迭代: {summary['outer_iterations']}/{summary['inner_iterations']}")
    click.echo(f"📁 输出目录: {out_dir.absolute()}")
    sys.exit(EXIT_INFEASIBLE if not report.feasible else EXIT_OK)


@cli.command()
@click.option('--config', 'config_path', required=True, help='实验文件（含 sweep.<参数> 行）')
@click.option('--seed', default=None, type=int, help='随机种子')
@click.option('--out', default=None, help='输出目录')
@click.option('--scheme', type=click.Choice(SCHEMES), default=None, help='多址方案')
@click.option('--mode', type=click.Choice(MODES), default=None, help='雷达模式')
@click.option('--csit', type=click.Choice(CSIT_MODES), default=None, help='信道状态信息')
@click.option('--samples', default=None, type=int, help='信道样本数 M')
@click.option('--trials', default=None, type=int, help='每个扫描点的试验次数')
@click.option('-j', '--jobs', 'workers', default=None, type=int, help='并发进程数')
@click.option('--figure', 'figures', multiple=True, help='导出的图（可多次使用，默认按模式选择）')
@click.option('-v', '--verbose', is_flag=True, help='详细输出模式')
@handle_errors
def sweep(config_path, seed, out, scheme, mode, csit, samples, trials, workers, figures, verbose):
    """蒙特卡洛扫描实验并导出图数据"""
    setup_logging(verbose)
    exp = load_experiment(config_path, scheme=scheme, mode=mode, csit=csit, samples=samples,
                          trials=trials, seed=seed, workers=workers)
    result = run_experiment(exp, show_progress=True)
    out_dir = Path(out or 'results')
    out_dir.mkdir(parents=True, exist_ok=True)
    rows_path = out_dir / 'rows.json'
    with open(rows_path, 'w', encoding='utf-8') as f:
        json.dump([row.to_dict(encode_json=True) for row in result.rows], f, indent=2, ensure_ascii=False)

    written = []
    for which in figures or DEFAULT_FIGURES[exp.mode]:
        written.extend(emit_figure_data(result, which, out_dir))

    summary = result.summary()
    click.echo("=" * 60)
    click.echo(f"📊 扫描点 {summary['points']} × 试验 {summary['trials']}, 失败 {summary['failed']}")
    click.echo(f"   平均EE: {summary['mean_ee']:.6f}, 耗时 {summary['elapsed']}")
    for path in written:
        click.echo(f"   📄 {path}")
    if result.rows and len(result.failed) == len(result.rows):
        sys.exit(EXIT_SOLVER)


@cli.command()
@click.option('--config', 'config_path', default=None, help='key = value 配置文件')
@click.option('--seed', default=None, type=int, help='随机种子')
@click.option('--out', default=None, help='输出目录')
@click.option('--scheme', type=click.Choice(SCHEMES), default='rsma', help='多址方案')
@click.option('--csit', type=click.Choice(CSIT_MODES), default='perfect', help='信道状态信息')
@click.option('--samples', default=None, type=int, help='信道样本数 M')
@click.option('--tau', 'taus', multiple=True, type=float, help='相似度门限（可多次使用）')
@click.option('--theta', 'thetas', multiple=True, type=float, help='目标角度（弧度，默认 π/4）')
@click.option('-v', '--verbose', is_flag=True, help='详细输出模式')
@handle_errors
def beampattern(config_path, seed, out, scheme, csit, samples, taus, thetas, verbose):
    """跟踪模式下不同 τ 的发射方向图"""
    setup_logging(verbose)
    cfg = load_cli_config(config_path, seed=seed, samples=samples)
    taus = sorted(taus) if taus else float_range(45.0, 70.0, 5.0)
    exp = Experiment.from_config(cfg, mode='tracking', scheme=scheme, csit=csit, trials=1,
                                 sweep=[('tau', list(taus))],
                                 thetas=list(thetas) if thetas else [math.pi / 4])
    result = run_experiment(exp)
    paths = emit_figure_data(result, 'fig5b', _out_dir(out, cfg))
    for path in paths:
        click.echo(f"📄 {path}")
    if not paths:
        click.echo("❌ 所有 τ 下均求解失败", err=True)
        sys.exit(EXIT_SOLVER)


@cli.command('oracle-compare')
@click.option('--config', 'config_path', default=None, help='key = value 配置文件')
@click.option('--seed', default=None, type=int, help='随机种子')
@click.option('--out', default=None, help='输出目录')
@click.option('--scheme', type=click.Choice(SCHEMES), default='rsma', help='多址方案')
@click.option('--n-tx', default=2, type=int, help='天线数（≤ 4）')
@click.option('--users', default=1, type=int, help='用户数')
@click.option('--block-len', default=1, type=int, help='符号数 L')
@click.option('--solver', type=click.Choice(ORACLE_SOLVERS), default='grid', help='每个选择下的预编码求解方式')
@click.option('--resolution', default=8, type=int, help='相位网格分辨率')
@click.option('-v', '--verbose', is_flag=True, help='详细输出模式')
@handle_errors
def oracle_compare(config_path, seed, out, scheme, n_tx, users, block_len, solver, resolution, verbose):
    """在小规模实例上对比联合优化与穷举基线"""
    setup_logging(verbose)
    cfg = load_cli_config(config_path, seed=seed)
    cfg.system = cfg.system.with_(n_tx=n_tx, n_users=users, block_len=block_len)
    exp = Experiment.from_config(cfg, scheme=scheme)
    problem = build_problem(exp, {}, trial=0)
    report = ao_full(problem)
    oracle = exhaustive_selection(problem, solver=solver, resolution=resolution, workers=cfg.run.workers)

    out_dir = _out_dir(out, cfg)
    report.save_json(out_dir / 'ao_report.json')
    with open(out_dir / 'oracle.json', 'w', encoding='utf-8') as f:
        json.dump(oracle.to_dict(encode_json=True), f, indent=2, ensure_ascii=False)

    click.echo("=" * 60)
    click.echo(f"🔧 联合优化: EE={report.ee:.6f}, 选择 {selection_key(report.selection)}, 状态 {report.status}")
    if oracle.feasible:
        gap = (oracle.best_ee - report.ee) / oracle.best_ee if oracle.best_ee > 0 else 0.0
        click.echo(f"🔍 穷举基线: EE={oracle.best_ee:.6f}, 选择 {selection_key(oracle.best_selection)}, "
                   f"评估 {oracle.evaluations} 次")
        click.echo(f"   相对差距: {gap * 100:.2f}%")
    else:
        click.echo("🔍 穷举基线: 没有可行的选择")
        sys.exit(EXIT_INFEASIBLE)


@cli.command()
@click.option('--seed', default=0, type=int, help='随机种子')
@click.option('-v', '--verbose', is_flag=True, help='详细输出模式')
def selftest(seed, verbose):
    """运行快速不变量自检"""
    setup_logging(verbose)
    report = run_selftest(seed)
    for check in report.checks:
        mark = '✅' if check.passed else '❌'
        click.echo(f"{mark} {check.name}: {check.detail} ({check.elapsed:.2f}s)")
    sys.exit(EXIT_OK if report.passed else EXIT_SOLVER)


def main():
    cli()


if __name__ == '__main__':
    main()
