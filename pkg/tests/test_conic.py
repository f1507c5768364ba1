"""
单元测试: 锥规划
测试规划构造、内点法求解、半定松弛与秩一恢复、WMSE二次规划
"""

import math

import numpy as np
import pytest

from rsma_dfrc.conic.ipm import SolverStatus, solve_cone
from rsma_dfrc.conic.program import ConeProgram, smat, svec, svec_dim, svec_index
from rsma_dfrc.conic.qp import solve_wmse_qp
from rsma_dfrc.conic.sdr import (
    QuadraticConstraint, RealQuadratic, embed_hermitian, embed_vector, rank1_recover, sdr_lift,
    unembed_vector,
)
from rsma_dfrc.core.comms import MseQuadratic
from rsma_dfrc.utils.errors import InvalidArgumentError, InvalidModelError, RecoveryError


class TestConeProgram:
    """规划构造测试"""

    def test_svec_inner_product(self, rng):
        """测试 svec 保持迹内积"""
        a = rng.standard_normal((4, 4))
        b = rng.standard_normal((4, 4))
        a, b = a + a.T, b + b.T
        assert np.dot(svec(a), svec(b)) == pytest.approx(np.trace(a @ b))
        np.testing.assert_allclose(smat(svec(a)), a)

    def test_svec_index(self):
        """测试 svec 下标映射"""
        idx = svec_index(3)
        assert len(idx) == svec_dim(3) == 6
        assert all(r >= c for r, c in idx)

    def test_duplicate_block(self):
        """测试变量块重名"""
        prog = ConeProgram()
        prog.add_variable('x', 2)
        with pytest.raises(InvalidArgumentError):
            prog.add_variable('x', 1)

    def test_objective_shape(self):
        """测试目标向量维数检查"""
        prog = ConeProgram()
        prog.add_variable('x', 2)
        with pytest.raises(InvalidArgumentError):
            prog.set_objective(np.ones(3))

    def test_size_summary(self):
        """测试规模摘要"""
        prog = ConeProgram()
        prog.add_psd_variable('X', 3)
        summary = prog.size_summary()
        assert summary['variables'] == 6
        assert summary['psd_blocks'] == 1

    def test_dump(self, temp_dir):
        """测试以纯文本写出规划"""
        prog = ConeProgram()
        prog.add_variable('x', 2)
        prog.set_objective(np.ones(2))
        prog.add_nonneg(np.eye(2), np.zeros(2), name='pos')
        path = f"{temp_dir}/prog.txt"
        prog.dump(path)
        with open(path, encoding='utf-8') as fh:
            lines = fh.read().splitlines()
        assert lines[:3] == ['VARS 2', 'BLOCK x 0 2', 'OBJ 1 1']
        assert lines[3].startswith('CONE ') and lines[3].endswith(' 2 2 pos')
        assert lines[4:] == ['ROW 0 1 0', 'ROW 0 0 1']


class TestInteriorPoint:
    """内点法测试"""

    def test_linear_program(self):
        """测试 min x s.t. x ≥ 1"""
        prog = ConeProgram()
        prog.add_variable('x', 1)
        prog.set_objective(np.array([1.0]))
        prog.add_nonneg(np.array([[1.0]]), [-1.0])
        sol = solve_cone(prog)
        assert sol.status.usable
        assert sol.objective == pytest.approx(1.0, abs=1e-6)

    def test_second_order_cone(self):
        """测试 min t s.t. ‖(1, 1)‖ ≤ t"""
        prog = ConeProgram()
        prog.add_variable('t', 1)
        prog.set_objective(np.array([1.0]))
        prog.add_soc(np.array([[1.0], [0.0], [0.0]]), [0.0, 1.0, 1.0])
        assert solve_cone(prog).objective == pytest.approx(math.sqrt(2.0), abs=1e-6)

    def test_rotated_cone(self):
        """测试 min t s.t. t ≥ x², x = 2"""
        prog = ConeProgram()
        xs = prog.add_variable('x', 1)
        ts = prog.add_variable('t', 1)
        prog.set_objective(np.array([0.0, 1.0]))
        eq = prog.new_row()
        eq[0, xs] = 1.0
        prog.add_eq(eq, [-2.0])
        a_row = prog.new_row()
        a_row[0, ts] = 1.0
        u_mat = prog.new_row()
        u_mat[0, xs] = 1.0
        prog.add_rotated_soc(a_row, 0.0, prog.new_row(), 1.0, u_mat, [0.0])
        sol = solve_cone(prog)
        assert prog.extract(sol.x, 't')[0] == pytest.approx(4.0, abs=1e-5)

    def test_max_eigenvalue(self, rng):
        """测试 min t s.t. tI − A ⪰ 0"""
        a = rng.standard_normal((3, 3))
        a = (a + a.T) / 2.0
        prog = ConeProgram()
        prog.add_variable('t', 1)
        prog.set_objective(np.array([1.0]))
        prog.add_psd(svec(np.eye(3))[:, None], -svec(a))
        assert solve_cone(prog).objective == pytest.approx(np.max(np.linalg.eigvalsh(a)), abs=1e-5)

    def test_variable_added_after_constraint(self):
        """测试先加约束再加变量时已有约束补零列"""
        prog = ConeProgram()
        xs = prog.add_variable('x', 1)
        prog.add_nonneg(np.array([[1.0]]), [-3.0])
        ys = prog.add_variable('y', 1)
        assert prog.constraints[0].f_mat.shape == (1, 2)
        row = prog.new_row()
        row[0, ys] = 1.0
        prog.add_nonneg(row, [-2.0])
        prog.set_objective(np.array([1.0, 1.0]))
        sol = solve_cone(prog)
        assert sol.status.usable
        assert prog.extract(sol.x, 'x')[0] == pytest.approx(3.0, abs=1e-5)
        assert sol.objective == pytest.approx(5.0, abs=1e-5)
        assert xs == slice(0, 1)

    def test_scalar_after_psd_variable(self):
        """测试半正定变量块之后追加标量变量"""
        prog = ConeProgram()
        xs = prog.add_psd_variable('X', 2)
        ts = prog.add_variable('t', 1)
        c = np.zeros(prog.n_vars)
        c[xs] = svec(np.eye(2))
        c[ts] = 1.0
        prog.set_objective(c)
        for diag in (np.diag([1.0, 0.0]), np.diag([0.0, 1.0])):
            row = prog.new_row()
            row[0, xs] = svec(diag)
            prog.add_nonneg(row, [-1.0])
        row = prog.new_row()
        row[0, ts] = 1.0
        prog.add_nonneg(row, [0.0])
        sol = solve_cone(prog)
        assert sol.status.usable
        assert sol.objective == pytest.approx(2.0, abs=1e-5)

    def test_infeasible(self):
        """测试 x ≥ 1 且 x ≤ 0 不可行"""
        prog = ConeProgram()
        prog.add_variable('x', 1)
        prog.set_objective(np.array([1.0]))
        prog.add_nonneg(np.array([[1.0], [-1.0]]), [-1.0, 0.0])
        sol = solve_cone(prog)
        assert not sol.status.usable
        assert isinstance(sol.status, SolverStatus)

    def test_empty_program(self):
        """测试没有变量的规划"""
        with pytest.raises(InvalidArgumentError):
            solve_cone(ConeProgram())


class TestSdr:
    """半定松弛测试"""

    def test_hermitian_embedding(self, rng):
        """测试 pᴴHp = zᵀ embed(H) z"""
        h = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        h = h + h.conj().T
        p = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        z = embed_vector(p)
        assert z @ embed_hermitian(h) @ z == pytest.approx(np.real(np.vdot(p, h @ p)))
        np.testing.assert_allclose(unembed_vector(z), p)

    def test_complex_quadratic(self, rng):
        """测试复二次型转换"""
        h = np.diag([2.0, 1.0]).astype(complex)
        q = np.array([1.0 + 1j, -0.5j])
        p = rng.standard_normal(2) + 1j * rng.standard_normal(2)
        form = RealQuadratic.from_complex(h, q, 0.3)
        expected = np.real(np.vdot(p, h @ p)) - 2 * np.real(np.vdot(q, p)) + 0.3
        assert form.value(embed_vector(p)) == pytest.approx(expected)
        with pytest.raises(InvalidArgumentError):
            RealQuadratic.from_complex(np.array([[0, 1], [0, 0]], dtype=complex), q)

    def test_relaxation_and_recovery(self, rng):
        """测试 min −z₁² s.t. ‖z‖² ≤ 1 的松弛与恢复"""
        objective = RealQuadratic(np.diag([-1.0, 0.0]), np.zeros(2))
        ball = QuadraticConstraint(RealQuadratic(np.eye(2), np.zeros(2)), 'le', 1.0, name='ball')
        lift, prog = sdr_lift(objective, [ball])
        sol = solve_cone(prog)
        assert sol.objective == pytest.approx(-1.0, abs=1e-5)
        z = rank1_recover(lift.matrix(sol.x), objective.value,
                          lambda v: v / max(1.0, np.linalg.norm(v)),
                          lambda v: np.linalg.norm(v) <= 1 + 1e-9, rng=rng, n_rand=5)
        assert objective.value(z) == pytest.approx(-1.0, abs=1e-3)

    def test_recovery_failure(self, rng):
        """测试所有候选不可行时报错"""
        x = np.eye(3)
        with pytest.raises(RecoveryError):
            rank1_recover(x, lambda v: 0.0, lambda v: v, lambda v: False, rng=rng, n_rand=3)

    def test_invalid_sense(self):
        """测试非法约束方向"""
        with pytest.raises(InvalidArgumentError):
            QuadraticConstraint(RealQuadratic.zero(2), 'lt', 0.0)


class TestWmseQp:
    """WMSE二次规划测试"""

    def test_closed_form(self, rng):
        """测试无约束时的闭式解满足一阶条件"""
        g = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
        quad = MseQuadratic(g @ g.conj().T, rng.standard_normal(3) + 0j, 0.0)
        center = rng.standard_normal(3) + 1j * rng.standard_normal(3)
        p = solve_wmse_qp(quad, 2.0, center)
        grad = 2 * quad.hessian @ p - 2 * quad.linear + 2.0 * (p - center)
        np.testing.assert_allclose(grad, 0.0, atol=1e-9)

    def test_ball_constraint(self):
        """测试带范数约束时得到投影点"""
        quad = MseQuadratic(np.zeros((2, 2), dtype=complex), np.zeros(2, dtype=complex), 0.0)
        center = np.array([3.0, 0.0], dtype=complex)
        ball = RealQuadratic(np.eye(4), np.zeros(4), -1.0)
        p = solve_wmse_qp(quad, 2.0, center, constraints=[ball])
        np.testing.assert_allclose(p, [1.0, 0.0], atol=1e-4)

    def test_indefinite(self):
        """测试不定二次型被拒绝"""
        quad = MseQuadratic(np.diag([1.0, -1.0]).astype(complex), np.zeros(2, dtype=complex), 0.0)
        with pytest.raises(InvalidModelError):
            solve_wmse_qp(quad, 1.0, np.zeros(2, dtype=complex))

    def test_invalid_penalty(self):
        """测试罚参数非正"""
        quad = MseQuadratic(np.eye(2, dtype=complex), np.zeros(2, dtype=complex), 0.0)
        with pytest.raises(InvalidArgumentError):
            solve_wmse_qp(quad, 0.0, np.zeros(2, dtype=complex))
