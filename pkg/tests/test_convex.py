"""Conic solver: LP/QP/SOCP oracles, feasibility contract, determinism."""

import numpy as np
import pytest

from wcsee_lab.convex import (
    INFEASIBLE,
    MAX_ITER,
    OPTIMAL,
    BadProgramError,
    ConvexProgram,
)


def dense_simplex(c, a_mat, b, ub):
    """Tableau simplex with Bland's rule for min c'x, Ax <= b (b >= 0), 0 <= x <= ub.

    Independent oracle: deterministic, exact up to pivot arithmetic.
    """
    n, m = len(c), len(b)
    # Columns: x (n), upper-bound slacks w (n), row slacks s (m), then rhs.
    t = np.zeros((m + n + 1, 2 * n + m + 1))
    t[:m, :n] = a_mat
    t[:m, 2 * n : 2 * n + m] = np.eye(m)
    t[:m, -1] = b
    t[m : m + n, :n] = np.eye(n)
    t[m : m + n, n : 2 * n] = np.eye(n)
    t[m : m + n, -1] = ub
    t[-1, :n] = c
    basis = list(range(2 * n, 2 * n + m)) + list(range(n, 2 * n))
    for _ in range(20000):
        enter = next((j for j in range(2 * n + m) if t[-1, j] < -1e-11), None)
        if enter is None:
            break
        col, rhs = t[:-1, enter], t[:-1, -1]
        candidates = [(rhs[i] / col[i], basis[i], i) for i in range(m + n) if col[i] > 1e-11]
        if not candidates:
            raise RuntimeError("unbounded oracle LP")
        _, _, row = min(candidates)
        t[row] /= t[row, enter]
        for i in range(m + n + 1):
            if i != row and t[i, enter] != 0.0:
                t[i] -= t[i, enter] * t[row]
        basis[row] = enter
    else:
        raise RuntimeError("simplex failed to terminate")
    x = np.zeros(2 * n + m)
    for i, j in enumerate(basis):
        x[j] = t[i, -1]
    return x[:n], float(c @ x[:n])


def sorted_simplex_projection(v):
    """O(n log n) Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    rho = np.max(np.nonzero(u * np.arange(1, len(v) + 1) > (css - 1.0))[0])
    theta = (css[rho] - 1.0) / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


class TestLinear:
    def test_scalar_bound(self):
        p = ConvexProgram(1)
        p.set_linear_objective([1.0])
        p.add_box(lb=[3.0])
        sol = p.solve()
        assert sol.status == OPTIMAL
        assert sol.x[0] == pytest.approx(3.0, abs=1e-7)

    def test_random_lps_match_simplex_oracle(self):
        rng = np.random.default_rng(100)
        for trial in range(10):
            n, m = 20, 40
            a_mat = rng.standard_normal((m, n))
            b = rng.uniform(0.5, 2.0, m)  # x = 0 is feasible
            ub = np.full(n, 10.0)
            c = rng.standard_normal(n)
            _, obj_oracle = dense_simplex(c, a_mat, b, ub)
            p = ConvexProgram(n)
            p.set_linear_objective(c)
            p.add_linear(a_mat, b)
            p.add_box(lb=np.zeros(n), ub=ub)
            sol = p.solve()
            assert sol.status == OPTIMAL, f"trial {trial}"
            assert abs(sol.objective - obj_oracle) <= 1e-6 * max(1.0, abs(obj_oracle))

    def test_equality_rows(self):
        # min x + y s.t. x + y + z = 2, z <= 0.5, x,y,z >= 0
        p = ConvexProgram(3)
        p.set_linear_objective([1.0, 1.0, 0.0])
        p.add_equality([1.0, 1.0, 1.0], 2.0)
        p.add_box(lb=np.zeros(3), ub=[np.inf, np.inf, 0.5])
        sol = p.solve()
        assert sol.status == OPTIMAL
        assert sol.x[2] == pytest.approx(0.5, abs=1e-6)
        assert sol.objective == pytest.approx(1.5, abs=1e-6)


class TestQuadratic:
    def test_simplex_projection_matches_sort_oracle(self):
        rng = np.random.default_rng(101)
        for trial in range(8):
            n = 12
            target = rng.standard_normal(n) * 1.5
            p = ConvexProgram(n)
            p.set_quadratic_objective(2.0 * np.eye(n), -2.0 * target)
            p.add_equality(np.ones(n), 1.0)
            p.add_box(lb=np.zeros(n))
            sol = p.solve()
            assert sol.status == OPTIMAL
            exact = sorted_simplex_projection(target)
            assert np.abs(sol.x - exact).max() <= 1e-4, f"trial {trial}"

    def test_quadratic_constraint_ball(self):
        p = ConvexProgram(3)
        p.set_linear_objective([1.0, 1.0, 0.0])
        p.add_quadratic(np.eye(3), np.zeros(3), -0.5)  # ||x||^2 <= 1
        sol = p.solve()
        assert sol.status == OPTIMAL
        r = 1.0 / np.sqrt(2.0)
        np.testing.assert_allclose(sol.x, [-r, -r, 0.0], atol=1e-6)

    def test_indefinite_quadratic_rejected(self):
        p = ConvexProgram(2)
        with pytest.raises(BadProgramError):
            p.add_quadratic(np.diag([1.0, -1.0]), np.zeros(2), -1.0)


class TestSecondOrderCone:
    def test_linear_over_ball(self):
        p = ConvexProgram(3)
        p.set_linear_objective([-1.0, 0.0, 0.0])
        p.add_soc(np.eye(3), np.zeros(3), np.zeros(3), 1.0)
        sol = p.solve()
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.x, [1.0, 0.0, 0.0], atol=1e-6)

    def test_shifted_cone(self):
        # ||x - (2, 1)|| <= 1, minimize x0 -> x = (1, 1).
        p = ConvexProgram(2)
        p.set_linear_objective([1.0, 0.0])
        p.add_soc(np.eye(2), [-2.0, -1.0], np.zeros(2), 1.0)
        sol = p.solve()
        assert sol.status == OPTIMAL
        np.testing.assert_allclose(sol.x, [1.0, 1.0], atol=1e-6)

    def test_per_element_modulus_cones(self):
        # Maximize a linear functional of (re, im) pairs under |s_m| <= 1:
        # each pair lands on the unit circle in the functional's direction.
        rng = np.random.default_rng(102)
        m = 5
        direction = rng.standard_normal(2 * m)
        p = ConvexProgram(2 * m)
        p.set_linear_objective(-direction)
        for i in range(m):
            f = np.zeros((2, 2 * m))
            f[0, 2 * i] = 1.0
            f[1, 2 * i + 1] = 1.0
            p.add_soc(f, np.zeros(2), np.zeros(2 * m), 1.0)
        sol = p.solve()
        assert sol.status == OPTIMAL
        for i in range(m):
            pair = direction[2 * i : 2 * i + 2]
            expected = pair / np.linalg.norm(pair)
            np.testing.assert_allclose(sol.x[2 * i : 2 * i + 2], expected, atol=1e-6)


class TestContract:
    def test_optimal_points_respect_constraints(self):
        rng = np.random.default_rng(103)
        for trial in range(10):
            n = 8
            a_mat = rng.standard_normal((12, n))
            b = rng.uniform(0.5, 1.5, 12)
            c = rng.standard_normal(n)
            p = ConvexProgram(n)
            p.set_linear_objective(c)
            p.add_linear(a_mat, b)
            p.add_quadratic(np.eye(n), np.zeros(n), -2.0)
            p.add_box(lb=np.full(n, -3.0), ub=np.full(n, 3.0))
            sol = p.solve(tol=1e-8)
            assert sol.status == OPTIMAL
            assert sol.max_violation <= 1e-8

    def test_bitwise_determinism(self):
        def run():
            rng = np.random.default_rng(104)
            n = 10
            a_mat = rng.standard_normal((15, n))
            b = rng.uniform(0.5, 1.5, 15)
            p = ConvexProgram(n)
            p.set_linear_objective(rng.standard_normal(n))
            p.add_linear(a_mat, b)
            p.add_box(lb=np.zeros(n), ub=np.full(n, 4.0))
            return p.solve().x.tobytes()

        assert run() == run()

    def test_infeasible_detection(self):
        p = ConvexProgram(1)
        p.set_linear_objective([1.0])
        p.add_box(lb=[3.0], ub=[2.0])
        assert p.solve().status == INFEASIBLE

    def test_infeasible_cone_system(self):
        # ||x|| <= 1 and x0 >= 2 cannot hold together.
        p = ConvexProgram(2)
        p.set_linear_objective([0.0, 1.0])
        p.add_soc(np.eye(2), np.zeros(2), np.zeros(2), 1.0)
        p.add_box(lb=[2.0, -np.inf])
        assert p.solve().status == INFEASIBLE

    def test_statuses_are_the_documented_triple(self):
        assert {OPTIMAL, INFEASIBLE, MAX_ITER} == {"optimal", "infeasible", "max_iter"}
