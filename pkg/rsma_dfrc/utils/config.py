"""
配置管理模块
处理系统参数、算法参数与运行参数，支持 key = value 配置文件
"""

import logging
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from rsma_dfrc.core.models import VARIANCE_FORMS, SystemConfig
from rsma_dfrc.utils.errors import ConfigError, DfrcError

logger = logging.getLogger(__name__)

# 以 mW 给出的功率键（p_int_mw 为每 Gbps）
_MW_SUFFIX = '_mw'

_TRUE = ('1', 'true', 'yes', 'on')
_FALSE = ('0', 'false', 'no', 'off')


@dataclass
class AlgorithmConfig:
    """算法配置"""
    eps_a: float = 1e-4
    eps_r: float = 1e-4
    max_outer: int = 100
    max_admm: int = 500
    max_sca: int = 20
    zeta: float = 1.0
    tau_prime: float = 0.5
    n_rand: int = 20
    conic_tol: float = 1e-7
    conic_max_iter: int = 100
    sum_rate_in_projection: bool = True
    constraints_in_v_update: bool = False
    variance_form: str = 'squared'
    show_progress: bool = False


@dataclass
class RunConfig:
    """运行配置"""
    workers: int = 1
    trials: int = 20
    seed: int = 0
    point_budget_s: float = 600.0
    output_dir: str = 'results'
    bits: int = 4
    r_th: float = 1.0
    tau: float = math.inf
    samples: int = 16
    p_f: float = 1e-7
    alpha_r: float = 0.1


def _parse_value(raw: str, target: Any, path: Optional[str], key: str) -> Any:
    """按目标字段的类型转换字符串"""
    try:
        if isinstance(target, bool):
            low = raw.lower()
            if low in _TRUE:
                return True
            if low in _FALSE:
                return False
            raise ValueError(raw)
        if isinstance(target, int):
            return int(raw)
        if isinstance(target, float):
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(path, key, f"无法解析值 {raw!r} 为 {type(target).__name__}")


def _field_targets() -> Dict[str, Tuple[str, Any]]:
    """key → (所属配置段, 默认值)"""
    targets: Dict[str, Tuple[str, Any]] = {}
    for section, cls in (('system', SystemConfig), ('algorithm', AlgorithmConfig), ('run', RunConfig)):
        defaults = cls()
        for f in fields(cls):
            targets[f.name] = (section, getattr(defaults, f.name))
    return targets


def parse_config_text(text: str, path: Optional[str] = None) -> Dict[str, Dict[str, Any]]:
    """
    解析 key = value 文本

    # 开头为注释；键名带 _mw 后缀时按 mW 解析并换算为 W。

    Returns:
        Dict[str, Dict[str, Any]]: {'system': {...}, 'algorithm': {...}, 'run': {...}}
    """
    targets = _field_targets()
    out: Dict[str, Dict[str, Any]] = {'system': {}, 'algorithm': {}, 'run': {}}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(path, None, f"第 {lineno} 行缺少 '='")
        key, raw = (part.strip() for part in line.split('=', 1))
        scale = 1.0
        name = key
        if key.endswith(_MW_SUFFIX):
            name = key[:-len(_MW_SUFFIX)]
            scale = 1e-3
        if name not in targets:
            raise ConfigError(path, key, "未知的配置键")
        section, default = targets[name]
        if scale != 1.0 and not isinstance(default, float):
            raise ConfigError(path, key, "只有功率类参数可用 mW 单位")
        value = _parse_value(raw, default, path, key)
        out[section][name] = value * scale if scale != 1.0 else value
    return out


def load_config(path: Union[str, Path]) -> Tuple[SystemConfig, AlgorithmConfig, RunConfig]:
    """
    读取配置文件

    Args:
        path: 配置文件路径

    Returns:
        (SystemConfig, AlgorithmConfig, RunConfig)，未出现的键取默认值

    Raises:
        ConfigError: 文件不存在、未知键或值非法
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(str(path), None, "配置文件不存在")
    sections = parse_config_text(path.read_text(encoding='utf-8'), str(path))
    try:
        system = SystemConfig(**sections['system'])
    except DfrcError as exc:
        raise ConfigError(str(path), None, exc.message)
    algorithm = AlgorithmConfig(**sections['algorithm'])
    run = RunConfig(**sections['run'])
    logger.info(f"配置已加载: {path} ({sum(len(v) for v in sections.values())} 个键)")
    return system, algorithm, run


class Config:
    """主配置类"""

    def __init__(self, system: Optional[SystemConfig] = None,
                 algorithm: Optional[AlgorithmConfig] = None,
                 run: Optional[RunConfig] = None):
        self.system = system or SystemConfig.table1()
        self.algorithm = algorithm or AlgorithmConfig()
        self.run = run or RunConfig()

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'Config':
        return cls(*load_config(path))

    def update_from_cli_args(self, **kwargs):
        """
        从CLI参数更新配置，值为 None 的参数忽略

        Args:
            **kwargs: CLI参数（字段名与配置字段一致）
        """
        targets = _field_targets()
        system_changes = {}
        for key, value in kwargs.items():
            if value is None or key not in targets:
                continue
            section = targets[key][0]
            if section == 'system':
                system_changes[key] = value
            else:
                setattr(getattr(self, section), key, value)
        if system_changes:
            self.system = replace(self.system, **system_changes)
        logger.info(f"配置已更新: workers={self.run.workers}, trials={self.run.trials}, "
                    f"seed={self.run.seed}, bits={self.run.bits}")

    def validate(self) -> List[str]:
        """
        验证配置

        Returns:
            List[str]: 验证错误列表
        """
        errors = []
        alg, run = self.algorithm, self.run
        if alg.eps_a <= 0 or alg.eps_r <= 0:
            errors.append("收敛阈值必须为正")
        if alg.max_outer < 1 or alg.max_admm < 1 or alg.max_sca < 1:
            errors.append("最大迭代次数必须大于0")
        if alg.zeta <= 0:
            errors.append("ADMM罚参数必须为正")
        if not 0.0 < alg.tau_prime < 1.0:
            errors.append("取整门限必须在 (0, 1) 内")
        if alg.n_rand < 0:
            errors.append("随机化次数不能为负")
        if alg.variance_form not in VARIANCE_FORMS:
            errors.append(f"量化噪声方差形式必须为 {VARIANCE_FORMS} 之一")
        if run.workers < 1:
            errors.append("并发进程数必须大于0")
        if run.workers > 32:
            errors.append("并发进程数不建议超过32")
        if run.trials < 1:
            errors.append("试验次数必须大于0")
        if run.bits < 1:
            errors.append("量化比特数必须大于0")
        if run.samples < 1:
            errors.append("信道样本数必须大于0")
        if run.r_th < 0:
            errors.append("和速率门限不能为负")
        if run.tau < 0:
            errors.append("相似度门限不能为负")
        if not 0.0 < run.p_f < 1.0:
            errors.append("虚警概率必须在 (0, 1) 内")
        if run.point_budget_s <= 0:
            errors.append("单点时间预算必须为正")
        return errors

    def get_summary(self) -> Dict[str, Any]:
        """
        获取配置摘要

        Returns:
            Dict[str, Any]: 配置摘要
        """
        return {
            'system': asdict(self.system),
            'algorithm': asdict(self.algorithm),
            'run': asdict(self.run),
        }

    def save_to_file(self, config_path: Union[str, Path]):
        """
        以 key = value 格式保存配置（功率以 W 写出）

        Args:
            config_path: 配置文件路径
        """
        lines = ["# rsma-dfrc 配置"]
        for section, values in self.get_summary().items():
            lines.append(f"# [{section}]")
            for key, value in values.items():
                if isinstance(value, bool):
                    value = 'true' if value else 'false'
                elif isinstance(value, float):
                    value = repr(value)
                lines.append(f"{key} = {value}")
        try:
            Path(config_path).write_text("\n".join(lines) + "\n", encoding='utf-8')
            logger.info(f"配置已保存到: {config_path}")
        except OSError as e:
            logger.error(f"保存配置文件失败: {e}")
            raise

    def load_from_file(self, config_path: Union[str, Path]):
        """从文件加载配置"""
        self.system, self.algorithm, self.run = load_config(config_path)
        logger.info(f"配置已从文件加载: {config_path}")
