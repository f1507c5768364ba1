"""
凸子问题求解：锥规划描述、内点法、半定松弛与WMSE二次规划
"""

from rsma_dfrc.conic.ipm import ConeSolution, SolverStatus, solve_cone
from rsma_dfrc.conic.program import ConeKind, ConeProgram, smat, svec
from rsma_dfrc.conic.qp import solve_wmse_qp
from rsma_dfrc.conic.sdr import (
    QuadraticConstraint, RealQuadratic, SdrLift, rank1_recover, sdr_lift,
)

__all__ = [
    'ConeKind', 'ConeProgram', 'ConeSolution', 'SolverStatus', 'solve_cone',
    'svec', 'smat', 'solve_wmse_qp', 'QuadraticConstraint', 'RealQuadratic',
    'SdrLift', 'rank1_recover', 'sdr_lift',
]
