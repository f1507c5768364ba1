"""
半定松弛模块
非齐次二次约束二次规划的齐次化提升、复数到实数嵌入，以及秩一恢复
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple, Union

import numpy as np

from rsma_dfrc.conic.program import ConeProgram, smat, svec, svec_dim
from rsma_dfrc.utils.errors import InvalidArgumentError, RecoveryError

logger = logging.getLogger(__name__)

SENSES = ('le', 'eq', 'ge')


def embed_vector(vec: np.ndarray) -> np.ndarray:
    """复向量 → 实向量 [Re; Im]"""
    vec = np.asarray(vec, dtype=complex)
    return np.concatenate([vec.real, vec.imag])


def unembed_vector(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    n = z.shape[0] // 2
    return z[:n] + 1j * z[n:]


def embed_hermitian(mat: np.ndarray) -> np.ndarray:
    """
    Hermitian矩阵 H 的实对称嵌入 [[Re H, −Im H], [Im H, Re H]]

    满足 pᴴHp = zᵀ embed(H) z，z = [Re p; Im p]。
    """
    mat = np.asarray(mat, dtype=complex)
    return np.block([[mat.real, -mat.imag], [mat.imag, mat.real]])


@dataclass
class RealQuadratic:
    """实二次型 f(z) = zᵀAz + 2bᵀz + c"""
    a: np.ndarray
    b: np.ndarray
    c: float = 0.0

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=float)
        self.b = np.asarray(self.b, dtype=float).ravel()
        n = self.b.shape[0]
        if self.a.shape != (n, n):
            raise InvalidArgumentError('a', self.a.shape, f"应为 ({n}, {n})")
        if not np.allclose(self.a, self.a.T, atol=1e-10 * max(1.0, np.max(np.abs(self.a), initial=0.0))):
            raise InvalidArgumentError('a', None, "二次型矩阵必须对称")
        self.a = (self.a + self.a.T) / 2.0
        self.c = float(self.c)

    @property
    def dim(self) -> int:
        return self.b.shape[0]

    @classmethod
    def from_complex(cls, hessian: np.ndarray, linear: np.ndarray, const: float = 0.0) -> 'RealQuadratic':
        """
        由复二次型 pᴴHp − 2Re(qᴴp) + c 构造

        Raises:
            InvalidArgumentError: H 不是Hermitian
        """
        hessian = np.asarray(hessian, dtype=complex)
        scale = max(1.0, float(np.max(np.abs(hessian), initial=0.0)))
        if not np.allclose(hessian, hessian.conj().T, atol=1e-10 * scale):
            raise InvalidArgumentError('hessian', None, "复二次型矩阵必须为Hermitian")
        return cls(embed_hermitian(hessian), -embed_vector(linear), const)

    @classmethod
    def zero(cls, dim: int) -> 'RealQuadratic':
        return cls(np.zeros((dim, dim)), np.zeros(dim), 0.0)

    def value(self, z: np.ndarray) -> float:
        z = np.asarray(z, dtype=float)
        return float(z @ self.a @ z + 2.0 * self.b @ z + self.c)

    def homogeneous(self) -> np.ndarray:
        """齐次化矩阵 [[A, b], [bᵀ, c]]，使 f(z) = tr(Ã·[z;1][z;1]ᵀ)"""
        n = self.dim
        out = np.empty((n + 1, n + 1))
        out[:n, :n] = self.a
        out[:n, n] = self.b
        out[n, :n] = self.b
        out[n, n] = self.c
        return out

    def __add__(self, other: 'RealQuadratic') -> 'RealQuadratic':
        return RealQuadratic(self.a + other.a, self.b + other.b, self.c + other.c)

    def scaled(self, factor: float) -> 'RealQuadratic':
        return RealQuadratic(self.a * factor, self.b * factor, self.c * factor)


@dataclass
class QuadraticConstraint:
    """f(z) (≤ | = | ≥) rhs"""
    form: RealQuadratic
    sense: str = 'le'
    rhs: float = 0.0
    name: str = ''

    def __post_init__(self):
        if self.sense not in SENSES:
            raise InvalidArgumentError('sense', self.sense, f"可选 {SENSES}")


@dataclass
class SdrLift:
    """
    齐次化提升 X̃ = [[Z, z], [zᵀ, 1]]，以 svec 形式存放在规划的一个变量块中

    dim 为原始实变量维数，X̃ 的阶数为 dim+1。
    """
    dim: int
    name: str
    start: int

    @property
    def order(self) -> int:
        return self.dim + 1

    @property
    def columns(self) -> slice:
        return slice(self.start, self.start + svec_dim(self.order))

    def coefficients(self, form: RealQuadratic, n_vars: int) -> np.ndarray:
        """返回行向量 r，使 r·x = tr(Ã X̃)"""
        if form.dim != self.dim:
            raise InvalidArgumentError('form', form.dim, f"维数应为 {self.dim}")
        row = np.zeros((1, n_vars))
        row[0, self.columns] = svec(form.homogeneous())
        return row

    def lifted_point(self, z: np.ndarray) -> np.ndarray:
        """秩一点 [z;1][z;1]ᵀ 的 svec"""
        zh = np.append(np.asarray(z, dtype=float), 1.0)
        return svec(np.outer(zh, zh))

    def matrix(self, x: np.ndarray) -> np.ndarray:
        """从规划解中取出 X̃"""
        return smat(np.asarray(x)[self.columns])

    def leading_vector(self, x_lifted: np.ndarray) -> np.ndarray:
        """
        由主特征向量恢复 z

        X̃ = σuuᵀ 时 [z;1] = √σ·u·sign(u_n)，秩一输入下精确恢复。
        """
        mat = x_lifted if np.ndim(x_lifted) == 2 else self.matrix(x_lifted)
        vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
        sigma, u = max(vals[-1], 0.0), vecs[:, -1]
        sign = 1.0 if u[-1] >= 0 else -1.0
        return np.sqrt(sigma) * sign * u[:-1]


def sdr_lift(objective: Optional[RealQuadratic] = None,
             constraints: Sequence[QuadraticConstraint] = (),
             prog: Optional[ConeProgram] = None,
             name: str = 'X',
             dim: Optional[int] = None) -> Tuple[SdrLift, ConeProgram]:
    """
    将二次约束二次规划提升为半定规划

    min f₀(z) s.t. f_i(z) ⋈ r_i 变为 min tr(Ã₀X̃) s.t. tr(Ã_iX̃) ⋈ r_i，X̃ ⪰ 0，X̃_{n,n} = 1。

    Args:
        objective: 目标二次型（None 时不改目标）
        constraints: 二次约束列表
        prog: 已有的锥规划（None 时新建），目标按加法累积
        name: 提升变量块名称
        dim: 原始维数（objective 为 None 且无约束时必须给出）

    Returns:
        (SdrLift, ConeProgram)
    """
    if dim is None:
        forms = ([objective] if objective is not None else []) + [c.form for c in constraints]
        if not forms:
            raise InvalidArgumentError('dim', None, "无法确定提升维数")
        dim = forms[0].dim
    prog = prog if prog is not None else ConeProgram()
    sl = prog.add_psd_variable(name, dim + 1)
    lift = SdrLift(dim=dim, name=name, start=sl.start)

    corner = prog.new_row()
    corner[0, sl.stop - 1] = 1.0
    prog.add_eq(corner, [-1.0], name=f'{name}_corner')

    for con in constraints:
        row = lift.coefficients(con.form, prog.n_vars)
        if con.sense == 'eq':
            prog.add_eq(row, [-con.rhs], name=con.name)
        elif con.sense == 'le':
            prog.add_nonneg(-row, [con.rhs], name=con.name)
        else:
            prog.add_nonneg(row, [-con.rhs], name=con.name)

    if objective is not None:
        base = prog.objective if prog.objective is not None else np.zeros(prog.n_vars)
        prog.set_objective(base + lift.coefficients(objective, prog.n_vars)[0])
    logger.debug(f"SDR提升: 维数 {dim} → 阶数 {dim + 1}, 约束 {len(constraints)}")
    return lift, prog


Candidate = Union[np.ndarray, List[np.ndarray]]


def _gaussian_draws(x_lifted: np.ndarray, rng: np.random.Generator, n_rand: int) -> List[np.ndarray]:
    """从 N(z, Z − zzᵀ) 抽取随机化候选"""
    n = x_lifted.shape[0] - 1
    z = x_lifted[:n, n]
    cov = x_lifted[:n, :n] - np.outer(z, z)
    vals, vecs = np.linalg.eigh((cov + cov.T) / 2.0)
    root = vecs * np.sqrt(np.clip(vals, 0.0, None))[None, :]
    return [z + root @ rng.standard_normal(n) for _ in range(n_rand)]


def rank1_recover(x_lifted: Union[np.ndarray, Sequence[np.ndarray]],
                  objective: Callable[[Candidate], float],
                  rescale: Callable[[Candidate], Candidate],
                  feasible: Callable[[Candidate], bool],
                  rng: Optional[np.random.Generator] = None,
                  n_rand: int = 20) -> Candidate:
    """
    从松弛解中恢复秩一候选

    候选包括主特征向量与 n_rand 个高斯随机化点；每个候选先经 rescale
    （例如逐天线功率缩放）再检查可行性，返回目标值最小的可行候选。
    x_lifted 为矩阵列表时逐块抽样，候选为同长度的向量列表。

    Args:
        x_lifted: 提升矩阵 X̃ 或其列表
        objective: 候选的目标值（越小越好）
        rescale: 候选修正映射
        feasible: 可行性判定
        rng: 随机数生成器（n_rand>0 时需要）
        n_rand: 随机化次数

    Returns:
        最优可行候选

    Raises:
        RecoveryError: 所有候选均不可行
    """
    single = isinstance(x_lifted, np.ndarray) and x_lifted.ndim == 2
    blocks = [x_lifted] if single else [np.asarray(m, dtype=float) for m in x_lifted]
    for mat in blocks:
        if np.min(np.linalg.eigvalsh((mat + mat.T) / 2.0)) < -1e-6 * max(1.0, np.trace(mat)):
            raise InvalidArgumentError('x_lifted', None, "提升矩阵必须半正定")
    if n_rand > 0 and rng is None:
        raise InvalidArgumentError('rng', None, "随机化需要随机数生成器")

    candidates = [[SdrLift(m.shape[0] - 1, '', 0).leading_vector(m) for m in blocks]]
    if n_rand > 0:
        draws = [_gaussian_draws(m, rng, n_rand) for m in blocks]
        candidates.extend([draws[b][r] for b in range(len(blocks))] for r in range(n_rand))

    best, best_value, n_feasible = None, np.inf, 0
    for cand in candidates:
        cand = cand[0] if single else cand
        fixed = rescale(cand)
        if not feasible(fixed):
            continue
        n_feasible += 1
        value = objective(fixed)
        if value < best_value:
            best, best_value = fixed, value
    if best is None:
        raise RecoveryError(len(candidates), "缩放后无可行候选")
    logger.debug(f"秩一恢复: {n_feasible}/{len(candidates)} 个候选可行, 最优目标 {best_value:.6e}")
    return best
