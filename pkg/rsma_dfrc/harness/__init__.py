"""
实验与复现：扫描实验、图数据导出与自检
"""

from rsma_dfrc.harness.experiment import Experiment, ExperimentResult, ExperimentRow, run_experiment
from rsma_dfrc.harness.figures import emit_figure_data, load_figure_csv
from rsma_dfrc.harness.selftest import run_selftest

__all__ = [
    'Experiment', 'ExperimentResult', 'ExperimentRow', 'emit_figure_data',
    'load_figure_csv', 'run_experiment', 'run_selftest',
]
