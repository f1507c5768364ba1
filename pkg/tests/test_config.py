"""
单元测试: 配置管理
"""

import math
from pathlib import Path

import pytest

from rsma_dfrc.utils.config import AlgorithmConfig, Config, RunConfig, load_config, parse_config_text
from rsma_dfrc.utils.errors import ConfigError


class TestParseConfig:
    """配置文本解析测试"""

    def test_sections(self):
        """测试键按所属配置段分组"""
        sections = parse_config_text("n_tx = 4\nmax_admm = 50\ntrials = 3\n")
        assert sections == {'system': {'n_tx': 4}, 'algorithm': {'max_admm': 50}, 'run': {'trials': 3}}

    def test_milliwatt_suffix(self):
        """测试 _mw 后缀换算为瓦特"""
        sections = parse_config_text("p_dac_mw = 1\np_int_mw = 25  # 每 Gbps\n")
        assert sections['system']['p_dac'] == pytest.approx(1e-3)
        assert sections['system']['p_int'] == pytest.approx(25e-3)

    def test_milliwatt_on_integer_key(self):
        """测试非功率键不接受 mW 单位"""
        with pytest.raises(ConfigError):
            parse_config_text("n_tx_mw = 4\n")

    def test_unknown_key(self):
        """测试未知键"""
        with pytest.raises(ConfigError):
            parse_config_text("antennas = 4\n")

    def test_missing_equals(self):
        """测试缺少等号"""
        with pytest.raises(ConfigError):
            parse_config_text("n_tx 4\n")

    def test_bad_value(self):
        """测试值类型不匹配"""
        with pytest.raises(ConfigError):
            parse_config_text("n_tx = four\n")

    @pytest.mark.parametrize("raw,expected", [('true', True), ('ON', True), ('0', False), ('no', False)])
    def test_bool_values(self, raw, expected):
        """测试布尔值解析"""
        sections = parse_config_text(f"sum_rate_in_projection = {raw}\n")
        assert sections['algorithm']['sum_rate_in_projection'] is expected

    def test_bad_bool(self):
        """测试无法解析的布尔值"""
        with pytest.raises(ConfigError):
            parse_config_text("show_progress = maybe\n")


class TestConfig:
    """主配置测试"""

    def test_defaults_valid(self):
        """测试默认配置通过校验"""
        assert Config().validate() == []

    def test_validate_errors(self):
        """测试非法取值被列出"""
        cfg = Config(algorithm=AlgorithmConfig(tau_prime=1.0, zeta=0.0), run=RunConfig(workers=0, p_f=1.0))
        errors = cfg.validate()
        assert len(errors) == 4

    def test_cli_overrides(self):
        """测试命令行覆盖，None 值忽略"""
        cfg = Config()
        cfg.update_from_cli_args(n_tx=4, seed=9, max_admm=30, bits=None, unknown=1)
        assert cfg.system.n_tx == 4
        assert cfg.run.seed == 9
        assert cfg.algorithm.max_admm == 30
        assert cfg.run.bits == RunConfig().bits

    def test_invalid_system_in_file(self, temp_dir):
        """测试文件中的系统参数非法"""
        path = Path(temp_dir) / 'bad.cfg'
        path.write_text("eta_pa = 2\n", encoding='utf-8')
        with pytest.raises(ConfigError):
            load_config(path)

    def test_save_and_load(self, temp_dir):
        """测试保存后重新读取得到相同配置"""
        cfg = Config()
        cfg.update_from_cli_args(n_tx=4, p_dac=2e-3, show_progress=True)
        path = Path(temp_dir) / 'saved.cfg'
        cfg.save_to_file(path)
        assert 'tau = inf' in path.read_text(encoding='utf-8')
        loaded = Config.from_file(path)
        assert loaded.system == cfg.system
        assert loaded.algorithm == cfg.algorithm
        assert loaded.run == cfg.run
        assert math.isinf(loaded.run.tau)
