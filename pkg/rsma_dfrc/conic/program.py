"""
锥规划描述模块
ConeProgram：线性目标 + (仿射映射, 锥) 约束列表，锥 ∈ {zero, nonneg, soc, psd}
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

import numpy as np

from rsma_dfrc.utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)

_SQRT2 = np.sqrt(2.0)


class ConeKind(str, Enum):
    ZERO = 'zero'
    NONNEG = 'nonneg'
    SOC = 'soc'
    PSD = 'psd'


def svec_dim(n: int) -> int:
    return n * (n + 1) // 2


def svec_order(dim: int) -> int:
    n = int(round((np.sqrt(8 * dim + 1) - 1) / 2))
    if svec_dim(n) != dim:
        raise InvalidArgumentError('svec', dim, "长度不是三角数")
    return n


def _tril_indices(n: int) -> Tuple[np.ndarray, np.ndarray]:
    # 按列优先的下三角索引
    cols, rows = np.triu_indices(n)
    return rows, cols


def svec(mat: np.ndarray) -> np.ndarray:
    """
    对称矩阵的缩放下三角向量化，非对角元乘 √2，使 ⟨svec A, svec B⟩ = tr(AB)

    支持批量输入 (..., n, n)。
    """
    mat = np.asarray(mat)
    n = mat.shape[-1]
    rows, cols = _tril_indices(n)
    out = mat[..., rows, cols].astype(float)
    out = out * np.where(rows == cols, 1.0, _SQRT2)
    return out


def smat(vec: np.ndarray) -> np.ndarray:
    """svec 的逆，支持批量输入 (..., d)"""
    vec = np.asarray(vec, dtype=float)
    n = svec_order(vec.shape[-1])
    rows, cols = _tril_indices(n)
    vals = vec * np.where(rows == cols, 1.0, 1.0 / _SQRT2)
    out = np.zeros(vec.shape[:-1] + (n, n))
    out[..., rows, cols] = vals
    out[..., cols, rows] = vals
    return out


def svec_index(n: int) -> Dict[Tuple[int, int], int]:
    """(i, j) → svec 中的位置（i ≥ j）"""
    rows, cols = _tril_indices(n)
    return {(int(r), int(c)): k for k, (r, c) in enumerate(zip(rows, cols))}


def arrow_rows(n_vec: int) -> np.ndarray:
    """
    二阶锥 (t, u) 到箭形矩阵 [[t, uᵀ], [u, tI]] 的 svec 线性映射，形状 (svec_dim(n+1), n+1)

    ‖u‖ ≤ t 当且仅当箭形矩阵半正定。
    """
    order = n_vec + 1
    idx = svec_index(order)
    out = np.zeros((svec_dim(order), order))
    for i in range(order):
        out[idx[(i, i)], 0] = 1.0
    for j in range(n_vec):
        out[idx[(j + 1, 0)], j + 1] = _SQRT2
    return out


@dataclass
class ConeConstraint:
    """约束 F x + f ∈ K；psd 时 F x + f 为 svec(S)，dim 为矩阵阶数"""
    kind: ConeKind
    f_mat: np.ndarray
    f_vec: np.ndarray
    dim: int
    name: str = ''

    @property
    def rows(self) -> int:
        return self.f_mat.shape[0]


@dataclass
class ConeProgram:
    """
    min cᵀx  s.t.  每个约束的 F x + f 落在对应锥中

    变量按命名块组织，便于结果提取。
    """
    n_vars: int = 0
    blocks: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    objective: Optional[np.ndarray] = None
    constraints: List[ConeConstraint] = field(default_factory=list)

    def add_variable(self, name: str, size: int) -> slice:
        """
        追加一个变量块

        Args:
            name: 块名称
            size: 块长度

        Returns:
            slice: 该块在决策向量中的位置
        """
        if name in self.blocks:
            raise InvalidArgumentError('name', name, "变量块重名")
        if size < 1:
            raise InvalidArgumentError('size', size, "变量块长度必须 ≥ 1")
        start = self.n_vars
        self.blocks[name] = (start, start + size)
        self.n_vars += size
        if self.objective is not None:
            self.objective = np.concatenate([self.objective, np.zeros(size)])
        for con in self.constraints:
            con.f_mat = np.hstack([con.f_mat, np.zeros((con.rows, size))])
        return slice(start, start + size)

    def var(self, name: str) -> slice:
        start, stop = self.blocks[name]
        return slice(start, stop)

    def extract(self, x: np.ndarray, name: str) -> np.ndarray:
        return np.asarray(x)[self.var(name)]

    def set_objective(self, c: np.ndarray):
        c = np.asarray(c, dtype=float)
        if c.shape != (self.n_vars,):
            raise InvalidArgumentError('objective', c.shape, f"应为 ({self.n_vars},)")
        self.objective = c

    def new_row(self, rows: int = 1) -> np.ndarray:
        """返回一个与变量数匹配的零系数矩阵"""
        return np.zeros((rows, self.n_vars))

    def add(self, kind: Union[ConeKind, str], f_mat: np.ndarray, f_vec: np.ndarray,
            name: str = '', dim: Optional[int] = None):
        kind = ConeKind(kind)
        f_mat = np.atleast_2d(np.asarray(f_mat, dtype=float))
        f_vec = np.atleast_1d(np.asarray(f_vec, dtype=float))
        if f_mat.shape[1] != self.n_vars:
            # 构造约束之后追加了变量时补零列
            if f_mat.shape[1] > self.n_vars:
                raise InvalidArgumentError('f_mat', f_mat.shape, f"列数应为 {self.n_vars}")
            f_mat = np.hstack([f_mat, np.zeros((f_mat.shape[0], self.n_vars - f_mat.shape[1]))])
        if f_mat.shape[0] != f_vec.shape[0]:
            raise InvalidArgumentError('f_vec', f_vec.shape, f"应为 ({f_mat.shape[0]},)")
        if kind == ConeKind.PSD:
            order = svec_order(f_mat.shape[0])
            if dim is not None and dim != order:
                raise InvalidArgumentError('dim', dim, f"PSD块阶数应为 {order}")
            dim = order
        elif kind == ConeKind.SOC:
            if f_mat.shape[0] < 2:
                raise InvalidArgumentError('soc', f_mat.shape[0], "二阶锥至少两行")
            dim = f_mat.shape[0]
        else:
            dim = f_mat.shape[0]
        self.constraints.append(ConeConstraint(kind, f_mat, f_vec, dim, name))

    def add_eq(self, f_mat, f_vec, name: str = ''):
        """F x + f = 0"""
        self.add(ConeKind.ZERO, f_mat, f_vec, name)

    def add_nonneg(self, f_mat, f_vec, name: str = ''):
        """F x + f ≥ 0"""
        self.add(ConeKind.NONNEG, f_mat, f_vec, name)

    def add_soc(self, f_mat, f_vec, name: str = ''):
        """首行 ≥ 其余行的二范数"""
        self.add(ConeKind.SOC, f_mat, f_vec, name)

    def add_rotated_soc(self, a_row, a0, b_row, b0, u_mat, u0, name: str = ''):
        """
        旋转二阶锥 a·b ≥ ‖u‖²，a, b ≥ 0

        转换为 ‖(2u, a − b)‖ ≤ a + b。
        """
        a_row = np.atleast_2d(a_row)
        b_row = np.atleast_2d(b_row)
        u_mat = np.atleast_2d(u_mat)
        f_mat = np.vstack([a_row + b_row, 2.0 * u_mat, a_row - b_row])
        f_vec = np.concatenate([[a0 + b0], 2.0 * np.atleast_1d(u0), [a0 - b0]])
        self.add_soc(f_mat, f_vec, name)

    def add_psd(self, f_mat, f_vec, name: str = ''):
        """svec(S) = F x + f，S ⪰ 0"""
        self.add(ConeKind.PSD, f_mat, f_vec, name)

    def add_psd_variable(self, name: str, order: int) -> slice:
        """追加一个对称矩阵变量块（svec 存储）并约束其半正定"""
        sl = self.add_variable(name, svec_dim(order))
        f_mat = self.new_row(svec_dim(order))
        f_mat[:, sl] = np.eye(svec_dim(order))
        self.add_psd(f_mat, np.zeros(svec_dim(order)), name=f'{name}_psd')
        return sl

    def size_summary(self) -> Dict[str, int]:
        """规模摘要：变量数与各类锥的维度"""
        summary = {'variables': self.n_vars}
        for kind in ConeKind:
            rows = [c.rows for c in self.constraints if c.kind == kind]
            summary[f'{kind.value}_rows'] = int(sum(rows))
            summary[f'{kind.value}_blocks'] = len(rows)
        return summary

    def dump(self, path: Union[str, Path]):
        """
        以纯文本写出规划，便于与外部求解器交叉检查

        格式：
            VARS <n>
            BLOCK <name> <start> <stop>
            OBJ <c_0> ... <c_{n-1}>
            CONE <kind> <rows> <dim> <name>
            ROW <f> <F_0> ... <F_{n-1}>      （每行一条，共 rows 条）
        """
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        objective = self.objective if self.objective is not None else np.zeros(self.n_vars)
        with open(path, 'w', encoding='utf-8') as fh:
            fh.write(f"VARS {self.n_vars}\n")
            for name, (start, stop) in self.blocks.items():
                fh.write(f"BLOCK {name} {start} {stop}\n")
            fh.write("OBJ " + " ".join(f"{v:.17g}" for v in objective) + "\n")
            for con in self.constraints:
                fh.write(f"CONE {con.kind.value} {con.rows} {con.dim} {con.name or '-'}\n")
                for r in range(con.rows):
                    fh.write(f"ROW {con.f_vec[r]:.17g} " + " ".join(f"{v:.17g}" for v in con.f_mat[r]) + "\n")
        logger.debug(f"锥规划已写出: {path} {self.size_summary()}")
