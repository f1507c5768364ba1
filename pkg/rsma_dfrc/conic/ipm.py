"""
内点法求解器模块
稠密原始-对偶内点法：Nesterov-Todd 缩放 + Mehrotra 预测-校正，
支持零锥、非负锥与半正定锥；二阶锥以箭形矩阵嵌入半正定锥
"""

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import linalg

from rsma_dfrc.conic.program import ConeKind, ConeProgram, arrow_rows, smat, svec, svec_dim, svec_order
from rsma_dfrc.utils.errors import InvalidArgumentError

logger = logging.getLogger(__name__)


class SolverStatus(str, Enum):
    OPTIMAL = 'optimal'
    INACCURATE = 'inaccurate'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'
    MAX_ITERATIONS = 'max_iterations'
    STALLED = 'stalled'

    @property
    def usable(self) -> bool:
        return self in (SolverStatus.OPTIMAL, SolverStatus.INACCURATE)


@dataclass
class ConeSolution:
    """求解结果：原始变量 x、等式对偶 y、锥对偶 z（标准形式顺序）"""
    status: SolverStatus
    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    objective: float
    iterations: int
    primal_residual: float
    dual_residual: float
    gap: float
    solve_time: float = 0.0
    info: Dict[str, float] = field(default_factory=dict)


class _StandardForm:
    """
    标准形式 min cᵀx, Ax = b, Gx + s = h, s ∈ R^{m_l}_+ × S^{n_1}_+ × …

    s 的非负部分在前，随后是各半正定块的 svec。
    """

    def __init__(self, prog: ConeProgram):
        n = prog.n_vars
        c = prog.objective if prog.objective is not None else np.zeros(n)
        a_rows, b_rows = [], []
        lin_g, lin_h = [], []
        psd_g, psd_h, orders = [], [], []
        for con in prog.constraints:
            if con.kind == ConeKind.ZERO:
                a_rows.append(con.f_mat)
                b_rows.append(-con.f_vec)
            elif con.kind == ConeKind.NONNEG:
                lin_g.append(-con.f_mat)
                lin_h.append(con.f_vec)
            elif con.kind == ConeKind.SOC:
                arrow = arrow_rows(con.rows - 1)
                psd_g.append(-(arrow @ con.f_mat))
                psd_h.append(arrow @ con.f_vec)
                orders.append(con.rows)
            else:
                psd_g.append(-con.f_mat)
                psd_h.append(con.f_vec)
                orders.append(con.dim)
        self.n = n
        self.c = np.asarray(c, dtype=float)
        self.a = np.vstack(a_rows) if a_rows else np.zeros((0, n))
        self.b = np.concatenate(b_rows) if b_rows else np.zeros(0)
        self.m_lin = int(sum(g.shape[0] for g in lin_g))
        self.orders = orders
        blocks_g = lin_g + psd_g
        blocks_h = lin_h + psd_h
        self.g = np.vstack(blocks_g) if blocks_g else np.zeros((0, n))
        self.h = np.concatenate(blocks_h) if blocks_h else np.zeros(0)
        self.offsets: List[Tuple[int, int]] = []
        pos = self.m_lin
        for order in orders:
            self.offsets.append((pos, pos + svec_dim(order)))
            pos += svec_dim(order)
        self.m = pos
        self.degree = self.m_lin + int(sum(orders))
        # 每个半正定块涉及的变量列
        self.block_cols = [np.flatnonzero(np.any(self.g[a:b] != 0, axis=0)) for a, b in self.offsets]
        self.lin_cols = np.flatnonzero(np.any(self.g[:self.m_lin] != 0, axis=0))

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[:self.m_lin] = 1.0
        for (a, b), order in zip(self.offsets, self.orders):
            e[a:b] = svec(np.eye(order))
        return e

    def min_eig(self, v: np.ndarray) -> float:
        """各锥上的最小"特征值"，用于判断内点"""
        vals = []
        if self.m_lin:
            vals.append(float(np.min(v[:self.m_lin])))
        for a, b in self.offsets:
            vals.append(float(np.linalg.eigvalsh(smat(v[a:b]))[0]))
        return min(vals) if vals else 1.0

    def jordan(self, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        out = np.empty(self.m)
        out[:self.m_lin] = u[:self.m_lin] * v[:self.m_lin]
        for a, b in self.offsets:
            um, vm = smat(u[a:b]), smat(v[a:b])
            out[a:b] = svec((um @ vm + vm @ um) / 2.0)
        return out


class _Scaling:
    """Nesterov-Todd 缩放 W 及缩放点 λ（半正定块上 λ 为对角阵）"""

    def __init__(self, sf: _StandardForm, s: np.ndarray, z: np.ndarray):
        self.sf = sf
        m_lin = sf.m_lin
        self.w = np.sqrt(s[:m_lin] / z[:m_lin])
        self.lam_lin = np.sqrt(s[:m_lin] * z[:m_lin])
        self.r: List[np.ndarray] = []
        self.rinv: List[np.ndarray] = []
        self.lam_psd: List[np.ndarray] = []
        for a, b in sf.offsets:
            ls = linalg.cholesky(smat(s[a:b]), lower=True)
            lz = linalg.cholesky(smat(z[a:b]), lower=True)
            u, lam, vt = linalg.svd(lz.T @ ls)
            inv_sqrt = 1.0 / np.sqrt(lam)
            self.r.append(ls @ vt.T * inv_sqrt[None, :])
            self.rinv.append(inv_sqrt[:, None] * (u.T @ lz.T))
            self.lam_psd.append(lam)

    def lam(self) -> np.ndarray:
        out = np.empty(self.sf.m)
        out[:self.sf.m_lin] = self.lam_lin
        for (a, b), lam in zip(self.sf.offsets, self.lam_psd):
            out[a:b] = svec(np.diag(lam))
        return out

    def _apply(self, v: np.ndarray, lin_fn, psd_fn) -> np.ndarray:
        out = np.empty_like(v, dtype=float)
        m_lin = self.sf.m_lin
        out[:m_lin] = lin_fn(v[:m_lin])
        for k, (a, b) in enumerate(self.sf.offsets):
            out[a:b] = svec(psd_fn(k, smat(v[a:b])))
        return out

    def inv_t(self, v: np.ndarray) -> np.ndarray:
        """W^{-T} v"""
        return self._apply(v, lambda x: x / self.w, lambda k, m: self.rinv[k] @ m @ self.rinv[k].T)

    def inv(self, v: np.ndarray) -> np.ndarray:
        """W^{-1} v"""
        return self._apply(v, lambda x: x / self.w, lambda k, m: self.rinv[k].T @ m @ self.rinv[k])

    def transpose(self, v: np.ndarray) -> np.ndarray:
        """W^T v"""
        return self._apply(v, lambda x: x * self.w, lambda k, m: self.r[k] @ m @ self.r[k].T)

    def lam_divide(self, v: np.ndarray) -> np.ndarray:
        """λ \\ v：求解 λ ∘ x = v"""
        out = np.empty(self.sf.m)
        m_lin = self.sf.m_lin
        out[:m_lin] = v[:m_lin] / self.lam_lin
        for (a, b), lam in zip(self.sf.offsets, self.lam_psd):
            out[a:b] = svec(smat(v[a:b]) * (2.0 / (lam[:, None] + lam[None, :])))
        return out

    def max_step(self, d: np.ndarray) -> float:
        """λ + αd 仍在锥内的最大 α"""
        alpha = np.inf
        m_lin = self.sf.m_lin
        if m_lin:
            ratio = d[:m_lin] / self.lam_lin
            neg = ratio < 0
            if np.any(neg):
                alpha = min(alpha, float(-1.0 / np.min(ratio[neg])))
        for (a, b), lam in zip(self.sf.offsets, self.lam_psd):
            isq = 1.0 / np.sqrt(lam)
            mat = smat(d[a:b]) * isq[:, None] * isq[None, :]
            emin = float(np.linalg.eigvalsh(mat)[0])
            if emin < 0:
                alpha = min(alpha, -1.0 / emin)
        return alpha

    def schur(self) -> np.ndarray:
        """M = Gᵀ W^{-1} W^{-T} G"""
        sf = self.sf
        n = sf.n
        mat = np.zeros((n, n))
        if sf.m_lin:
            cols = sf.lin_cols
            gt = sf.g[:sf.m_lin][:, cols] / self.w[:, None]
            mat[np.ix_(cols, cols)] += gt.T @ gt
        for k, (a, b) in enumerate(sf.offsets):
            cols = sf.block_cols[k]
            if cols.size == 0:
                continue
            mats = smat(sf.g[a:b][:, cols].T)
            scaled = np.matmul(np.matmul(self.rinv[k], mats), self.rinv[k].T)
            gt = svec(scaled).T
            mat[np.ix_(cols, cols)] += gt.T @ gt
        return mat


class _KktSolver:
    """[[M, Aᵀ], [A, 0]] 的正则化LU分解，带一步迭代精化"""

    def __init__(self, schur: np.ndarray, a: np.ndarray):
        n, p = schur.shape[0], a.shape[0]
        scale = max(1.0, float(np.max(np.abs(np.diag(schur)))) if n else 1.0)
        self.reg = 1e-13 * scale
        self.n, self.p = n, p
        self.exact = np.block([[schur, a.T], [a, np.zeros((p, p))]])
        reg = np.block([[schur + self.reg * np.eye(n), a.T], [a, -self.reg * np.eye(p)]])
        self.lu = linalg.lu_factor(reg, check_finite=False)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        sol = linalg.lu_solve(self.lu, rhs, check_finite=False)
        sol = sol + linalg.lu_solve(self.lu, rhs - self.exact @ sol, check_finite=False)
        return sol


def _least_squares_init(sf: _StandardForm):
    """用 W=I 的KKT系统求初始点，并平移到锥内部"""
    gtg = sf.g.T @ sf.g
    kkt = _KktSolver(gtg + 1e-8 * np.eye(sf.n), sf.a)
    sol = kkt.solve(np.concatenate([sf.g.T @ sf.h, sf.b]))
    x = sol[:sf.n]
    s = sf.h - sf.g @ x
    sol = kkt.solve(np.concatenate([-sf.c, np.zeros(sf.a.shape[0])]))
    y = sol[sf.n:]
    z = sf.g @ sol[:sf.n]
    e = sf.identity()
    for vec in (s, z):
        t = -sf.min_eig(vec)
        if t >= -1e-8 * max(1.0, np.linalg.norm(vec)):
            vec += (1.0 + t) * e
    return x, y, s, z


def _cone_identity(kind: ConeKind, rows: int) -> np.ndarray:
    if kind == ConeKind.NONNEG:
        return np.ones(rows)
    if kind == ConeKind.SOC:
        out = np.zeros(rows)
        out[0] = 1.0
        return out
    return svec(np.eye(svec_order(rows)))


def _phase_one(prog: ConeProgram, tol: float, max_iter: int) -> Optional[float]:
    """min t s.t. F x + f + t·e ∈ K, t ≥ −1；返回 t*（失败时为 None）"""
    aux = ConeProgram()
    aux.add_variable('x', prog.n_vars)
    t_col = aux.add_variable('t', 1).start
    c = np.zeros(aux.n_vars)
    c[t_col] = 1.0
    aux.set_objective(c)
    for con in prog.constraints:
        f_mat = np.hstack([con.f_mat, np.zeros((con.rows, 1))])
        if con.kind != ConeKind.ZERO:
            f_mat[:, t_col] = _cone_identity(con.kind, con.rows)
        aux.add(con.kind, f_mat, con.f_vec, con.name)
    row = aux.new_row()
    row[0, t_col] = 1.0
    aux.add_nonneg(row, [1.0])
    sol = solve_cone(aux, tol=tol, max_iter=max_iter, _classify=False)
    return sol.objective if sol.status.usable else None


def _recession_direction(prog: ConeProgram, tol: float, max_iter: int) -> Optional[float]:
    """min cᵀd s.t. F_eq d = 0, F d ∈ K, −1 ≤ d ≤ 1；返回最优值（失败时为 None）"""
    if prog.objective is None:
        return None
    aux = ConeProgram()
    aux.add_variable('d', prog.n_vars)
    aux.set_objective(prog.objective.copy())
    for con in prog.constraints:
        aux.add(con.kind, con.f_mat, np.zeros(con.rows), con.name)
    eye = np.eye(prog.n_vars)
    aux.add_nonneg(np.vstack([eye, -eye]), np.ones(2 * prog.n_vars))
    sol = solve_cone(aux, tol=tol, max_iter=max_iter, _classify=False)
    return sol.objective if sol.status.usable else None


def _classify_failure(prog: ConeProgram, tol: float, max_iter: int) -> Optional[SolverStatus]:
    """主迭代失败后判定原问题是否不可行或无界"""
    t_star = _phase_one(prog, tol, max_iter)
    if t_star is not None and t_star > max(1e3 * tol, 1e-6):
        return SolverStatus.INFEASIBLE
    d_star = _recession_direction(prog, tol, max_iter)
    if d_star is not None and d_star < -max(1e3 * tol, 1e-6):
        return SolverStatus.UNBOUNDED
    return None


def solve_cone(prog: ConeProgram, tol: float = 1e-7, max_iter: int = 100,
               _classify: bool = True) -> ConeSolution:
    """
    求解锥规划

    Args:
        prog: 锥规划
        tol: 残差与对偶间隙的相对容差
        max_iter: 最大迭代次数

    Returns:
        ConeSolution: x 为原始解；status 区分 optimal / infeasible / unbounded / max_iterations
    """
    start = time.time()
    if prog.n_vars == 0:
        raise InvalidArgumentError('prog', 0, "没有决策变量")
    sf = _StandardForm(prog)
    if sf.m == 0:
        raise InvalidArgumentError('prog', 'no cones', "至少需要一个锥约束")
    logger.debug(f"内点法开始: n={sf.n}, p={sf.a.shape[0]}, m={sf.m}, ν={sf.degree}")

    x, y, s, z = _least_squares_init(sf)
    e = sf.identity()
    norm_b = max(1.0, np.linalg.norm(sf.b))
    norm_h = max(1.0, np.linalg.norm(sf.h))
    norm_c = max(1.0, np.linalg.norm(sf.c))
    status = SolverStatus.MAX_ITERATIONS
    pres = dres = gap = np.inf
    best = None
    iteration = 0

    for iteration in range(max_iter + 1):
        rx = sf.a.T @ y + sf.g.T @ z + sf.c
        ry = sf.a @ x - sf.b
        rz = sf.g @ x + s - sf.h
        gap = float(s @ z)
        mu = gap / sf.degree
        pobj = float(sf.c @ x)
        dobj = float(-sf.b @ y - sf.h @ z)
        pres = max(np.linalg.norm(ry) / norm_b, np.linalg.norm(rz) / norm_h)
        dres = np.linalg.norm(rx) / norm_c
        rel_gap = gap / max(1.0, abs(pobj), abs(dobj))
        logger.debug(f"  it={iteration:3d} pobj={pobj:.6e} dobj={dobj:.6e} pres={pres:.1e} dres={dres:.1e} gap={gap:.1e}")

        if pres <= tol and dres <= tol and (gap <= tol or rel_gap <= tol):
            status = SolverStatus.OPTIMAL
            break
        if best is None or max(pres, dres, rel_gap) < best[0]:
            best = (max(pres, dres, rel_gap), x.copy(), y.copy(), s.copy(), z.copy())

        hz = float(sf.h @ z + sf.b @ y)
        if hz < 0 and pres > tol:
            cert = np.linalg.norm(sf.a.T @ y + sf.g.T @ z) / -hz
            if cert <= tol * norm_c:
                status = SolverStatus.INFEASIBLE
                break
        if pobj < 0 and dres > tol:
            cert = max(np.linalg.norm(sf.g @ x + s), np.linalg.norm(sf.a @ x)) / -pobj
            if cert <= tol * max(norm_h, norm_b):
                status = SolverStatus.UNBOUNDED
                break
        if iteration == max_iter:
            break

        try:
            scaling = _Scaling(sf, s, z)
            kkt = _KktSolver(scaling.schur(), sf.a)
        except (linalg.LinAlgError, ValueError) as exc:
            logger.debug(f"内点法数值失败: {exc}")
            status = SolverStatus.STALLED
            break
        lam = scaling.lam()
        rz_scaled = scaling.inv_t(rz)

        def newton(q: np.ndarray):
            rhs_x = -rx - sf.g.T @ scaling.inv(q + rz_scaled)
            sol = kkt.solve(np.concatenate([rhs_x, -ry]))
            dx, dy = sol[:sf.n], sol[sf.n:]
            dz_t = scaling.inv_t(sf.g @ dx) + q + rz_scaled
            ds_t = q - dz_t
            return dx, dy, ds_t, dz_t

        # 预测步
        q_aff = -lam
        _, _, ds_a, dz_a = newton(q_aff)
        alpha_aff = min(1.0, scaling.max_step(ds_a), scaling.max_step(dz_a))
        mu_aff = float((lam + alpha_aff * ds_a) @ (lam + alpha_aff * dz_a)) / sf.degree
        sigma = min(1.0, max(0.0, mu_aff / mu)) ** 3 if mu > 0 else 0.0

        # 校正步
        r_c = -sf.jordan(lam, lam) - sf.jordan(ds_a, dz_a) + sigma * mu * e
        dx, dy, ds_t, dz_t = newton(scaling.lam_divide(r_c))
        alpha = min(1.0, 0.99 * min(scaling.max_step(ds_t), scaling.max_step(dz_t)))
        if not np.isfinite(alpha) or alpha < 1e-12:
            status = SolverStatus.STALLED
            break
        x = x + alpha * dx
        y = y + alpha * dy
        s = s + alpha * scaling.transpose(ds_t)
        z = z + alpha * scaling.inv(dz_t)

    if status in (SolverStatus.MAX_ITERATIONS, SolverStatus.STALLED) and best is not None:
        err, bx, by, bs, bz = best
        if err <= 1e3 * tol:
            status = SolverStatus.INACCURATE
            x, y, s, z = bx, by, bs, bz
    if _classify and status in (SolverStatus.MAX_ITERATIONS, SolverStatus.STALLED):
        verdict = _classify_failure(prog, tol, max_iter)
        if verdict is not None:
            status = verdict
    elapsed = time.time() - start
    objective = float(sf.c @ x)
    logger.debug(f"内点法结束: {status.value}, 迭代 {iteration}, 目标 {objective:.6e}, 用时 {elapsed:.3f}s")
    return ConeSolution(status=status, x=x, y=y, z=z, s=s, objective=objective,
                        iterations=iteration, primal_residual=float(pres),
                        dual_residual=float(dres), gap=float(gap), solve_time=elapsed,
                        info={'degree': sf.degree, 'n': sf.n, 'm': sf.m})
