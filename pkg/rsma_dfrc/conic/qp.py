"""
WMSE二次规划模块
ADMM的 v 更新：min f̄(v) + (ζ/2)‖v − center‖²，无约束时为一次线性求解，
带凸二次约束时转为二阶锥规划
"""

import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from rsma_dfrc.conic.ipm import solve_cone
from rsma_dfrc.conic.program import ConeProgram
from rsma_dfrc.conic.sdr import RealQuadratic, embed_hermitian, embed_vector, unembed_vector
from rsma_dfrc.utils.errors import InvalidArgumentError, InvalidModelError, SolverError

logger = logging.getLogger(__name__)

# 判定不定二次型的相对容差
_PSD_TOL = 1e-9


def _psd_root(mat: np.ndarray, what: str) -> np.ndarray:
    """返回 L 使 mat = L Lᵀ；mat 有显著负特征值时报错"""
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    scale = max(1.0, float(np.max(np.abs(vals))))
    if vals[0] < -_PSD_TOL * scale:
        raise InvalidModelError(f"{what} 不是半正定的", float(vals[0]))
    keep = vals > _PSD_TOL * scale
    return vecs[:, keep] * np.sqrt(vals[keep])[None, :]


def solve_wmse_qp(quadratic, zeta: float, center: np.ndarray,
                  constraints: Optional[Sequence[RealQuadratic]] = None,
                  tol: float = 1e-9, max_iter: int = 100) -> np.ndarray:
    """
    求解 min pᴴHp − 2Re(qᴴp) + (ζ/2)‖p − center‖²

    Args:
        quadratic: 带 hessian/linear 属性的复二次型（例如 MseQuadratic）
        zeta: 罚参数 ζ > 0
        center: 罚项中心（u − w）
        constraints: 可选凸约束 g_i(z) ≤ 0，定义在实嵌入 z = [Re p; Im p] 上
        tol: 锥规划容差
        max_iter: 锥规划最大迭代次数

    Returns:
        np.ndarray: 复数最优解

    Raises:
        InvalidModelError: 二次部分不定
    """
    if zeta <= 0:
        raise InvalidArgumentError('zeta', zeta, "罚参数必须为正")
    hess = np.asarray(quadratic.hessian, dtype=complex)
    lin = np.asarray(quadratic.linear, dtype=complex)
    center = np.asarray(center, dtype=complex)
    n = lin.shape[0]
    if hess.shape != (n, n) or center.shape != (n,):
        raise InvalidArgumentError('quadratic', (hess.shape, center.shape), f"维数应为 {n}")
    herm = (hess + hess.conj().T) / 2.0
    min_eig = float(np.linalg.eigvalsh(herm)[0])
    if min_eig < -_PSD_TOL * max(1.0, float(np.max(np.abs(herm), initial=0.0))):
        raise InvalidModelError("WMSE二次型不定", min_eig)

    system = herm + (zeta / 2.0) * np.eye(n)
    rhs = lin + (zeta / 2.0) * center
    if not constraints:
        return linalg.solve(system, rhs, assume_a='her')

    # min zᵀÃz − 2b̃ᵀz，以上镜图 t 写成旋转二阶锥
    dim = 2 * n
    a_real = embed_hermitian(system)
    b_real = embed_vector(rhs)
    prog = ConeProgram()
    zs = prog.add_variable('z', dim)
    ts = prog.add_variable('t', 1)
    c = np.zeros(prog.n_vars)
    c[ts] = 1.0
    c[zs] = -2.0 * b_real
    prog.set_objective(c)
    root = _psd_root(a_real, "目标二次型")
    u_mat = prog.new_row(root.shape[1])
    u_mat[:, zs] = root.T
    a_row = prog.new_row()
    a_row[0, ts] = 1.0
    prog.add_rotated_soc(a_row, 0.0, prog.new_row(), 1.0, u_mat, np.zeros(root.shape[1]), name='objective')
    for i, con in enumerate(constraints):
        if con.dim != dim:
            raise InvalidArgumentError('constraint', con.dim, f"维数应为 {dim}")
        croot = _psd_root(con.a, f"约束 {i}")
        if croot.shape[1] == 0:
            row = prog.new_row()
            row[0, zs] = -2.0 * con.b
            prog.add_nonneg(row, [-con.c], name=f'linear_{i}')
            continue
        cu = prog.new_row(croot.shape[1])
        cu[:, zs] = croot.T
        ca = prog.new_row()
        ca[0, zs] = -2.0 * con.b
        prog.add_rotated_soc(ca, -con.c, prog.new_row(), 1.0, cu, np.zeros(croot.shape[1]), name=f'quad_{i}')
    sol = solve_cone(prog, tol=tol, max_iter=max_iter)
    if not sol.status.usable:
        raise SolverError('solve_wmse_qp', sol.status.value, sol.iterations)
    return unembed_vector(prog.extract(sol.x, 'z'))
