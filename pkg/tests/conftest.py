"""
PyTest配置文件
为能效优化器测试提供小规模实例与通用fixtures
"""

import shutil
import tempfile

import numpy as np
import pytest

from rsma_dfrc.core.models import QuantConfig, SystemConfig, draw_channels
from rsma_dfrc.core.radar import reference_detection
from rsma_dfrc.optim.problem import DfrcProblem
from rsma_dfrc.utils.config import AlgorithmConfig


@pytest.fixture
def temp_dir():
    """创建临时目录fixture"""
    temp_path = tempfile.mkdtemp()
    yield temp_path
    shutil.rmtree(temp_path)


@pytest.fixture
def rng():
    """固定种子的随机数生成器"""
    return np.random.default_rng(1234)


@pytest.fixture
def table1():
    """默认仿真参数"""
    return SystemConfig.table1()


@pytest.fixture
def small_cfg():
    """两天线、单用户、两个符号的小系统"""
    return SystemConfig(n_tx=2, n_users=1, block_len=2)


@pytest.fixture
def fast_algo():
    """测试时使用较少的迭代次数"""
    return AlgorithmConfig(eps_a=1e-3, eps_r=1e-3, max_outer=3, max_admm=15, max_sca=3, n_rand=4)


def make_problem(cfg, algo, seed=7, bits=4, r_th=0.0, scheme='rsma', ref=None):
    """按给定种子生成优化问题"""
    rng = np.random.default_rng(seed)
    return DfrcProblem(
        cfg=cfg,
        channels=draw_channels(cfg, rng),
        quant=QuantConfig.from_bits(bits, cfg.n_tx),
        ref=ref if ref is not None else reference_detection(cfg),
        r_th=r_th,
        scheme=scheme,
        algo=algo,
        rng=rng,
    )


@pytest.fixture
def small_problem(small_cfg, fast_algo):
    """无雷达约束、无和速率门限的小规模问题"""
    return make_problem(small_cfg, fast_algo)
