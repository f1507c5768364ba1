"""
优化算法：固定选择下的AO-ADMM、射频链选择的SCA、联合交替优化与样本平均近似
"""

from rsma_dfrc.optim.admm import AdmmState, admm_step, ao_admm
from rsma_dfrc.optim.ao import ao_full
from rsma_dfrc.optim.problem import DfrcProblem, Validator, init_precoders
from rsma_dfrc.optim.report import SolveReport
from rsma_dfrc.optim.rf_select import ScaState, hadamard_stack, rf_select_sca, round_selection
from rsma_dfrc.optim.saa import ao_full_saa

__all__ = [
    'AdmmState', 'DfrcProblem', 'ScaState', 'SolveReport', 'Validator',
    'admm_step', 'ao_admm', 'ao_full', 'ao_full_saa', 'hadamard_stack',
    'init_precoders', 'rf_select_sca', 'round_selection',
]
