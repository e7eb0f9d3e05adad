import numpy as np
import pytest

from psm import (
    Chart,
    ChartError,
    DualChart,
    EvaluationError,
    SmoothMap,
    Subspace,
    chart_inverse_check,
    chart_parameter,
    fd_jacobian,
    normal_space,
    numerical_rank,
    sample_ball,
    tangent_space,
    tangent_space_at,
    zoo,
)
from helpers import jacobian_rel_error, random_quadratic_map


def identity_map(n):
    return SmoothMap(lambda x: x.copy(), n, n)


class TestFdJacobian:
    def test_identity(self):
        j = fd_jacobian(identity_map(2), [1.0, 2.0])
        assert np.allclose(j, np.eye(2), atol=1e-9)

    def test_square(self):
        m = SmoothMap(lambda x: np.array([x[0] ** 2]), 1, 1)
        j = fd_jacobian(m, [3.0])
        assert abs(j[0, 0] - 6.0) <= 1e-6

    def test_product_rule(self):
        m = SmoothMap(lambda x: np.array([x[0] * x[1]]), 2, 1)
        j = fd_jacobian(m, [2.0, 5.0])
        assert np.allclose(j, [[5.0, 2.0]], atol=1e-6)

    def test_nonfinite_names_column(self):
        m = SmoothMap(lambda x: np.array([1.0 / x[1]]), 2, 1)
        with pytest.raises(EvaluationError, match="column 1"):
            fd_jacobian(m, [1.0, 0.0])

    def test_matches_analytic_on_random_quadratics(self):
        rng = np.random.default_rng(42)
        for _ in range(10):
            m = random_quadratic_map(rng, 3, 2)
            x = rng.standard_normal(3)
            assert jacobian_rel_error(m, x) <= 1e-5


class TestNumericalRank:
    def test_identity(self):
        assert numerical_rank(np.eye(3)) == 3

    def test_zero(self):
        assert numerical_rank(np.zeros((2, 2))) == 0

    def test_rank_one(self):
        # singular values of [[1,2],[2,4]] are (5, 0)
        assert numerical_rank([[1.0, 2.0], [2.0, 4.0]]) == 1

    def test_empty(self):
        assert numerical_rank(np.zeros((1, 0))) == 0

    def test_orthogonal_invariance(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 3)) @ np.diag([1.0, 1e-2, 0.0])
        r = numerical_rank(a)
        for _ in range(5):
            q1, _ = np.linalg.qr(rng.standard_normal((4, 4)))
            q2, _ = np.linalg.qr(rng.standard_normal((3, 3)))
            assert numerical_rank(q1 @ a @ q2) == r

    def test_scaling_with_scaled_tol(self):
        a = np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]])
        tol = 1e-8
        r = numerical_rank(a, tol)
        for c in (1e-6, 1.0, 1e6):
            assert numerical_rank(c * a, c * tol) == r


class TestTangentNormal:
    def test_circle_tangent_at_base(self):
        pair = zoo.circle()
        t = tangent_space(pair.chart, [0.0])
        assert t.dim == 1
        assert abs(abs(t.basis[:, 0] @ np.array([0.0, 1.0])) - 1.0) <= 1e-12

    def test_line_chart_tangent(self):
        chart = Chart(
            SmoothMap(lambda w: np.array([w[0], 0.0]), 1, 2), np.zeros(2)
        )
        t = tangent_space(chart, [0.7])
        assert abs(abs(t.basis[:, 0] @ np.array([1.0, 0.0])) - 1.0) <= 1e-9

    def test_paraboloid_tangent_at_origin(self):
        pair = zoo.paraboloid()
        t = tangent_space(pair.chart, [0.0, 0.0])
        assert t.dim == 2
        assert np.linalg.norm(t.project([0.0, 0.0, 1.0])) <= 1e-9

    def test_circle_normal(self):
        pair = zoo.circle()
        n = normal_space(pair.dual, [1.0, 0.0])
        assert n.dim == 1
        assert abs(abs(n.basis[:, 0] @ np.array([1.0, 0.0])) - 1.0) <= 1e-12

    def test_hyperplane_normal(self):
        a = np.array([1.0, -2.0, 2.0])
        pair = zoo.hyperplane(a)
        n = normal_space(pair.dual, [0.0, 2.0, 2.0])
        direction = a / np.linalg.norm(a)
        assert abs(abs(n.basis[:, 0] @ direction) - 1.0) <= 1e-12

    def test_axis_line_normal(self):
        pair = zoo.axis_line()
        n = normal_space(pair.dual, [0.0, 3.0])
        assert np.allclose(np.abs(n.basis[:, 0]), [1.0, 0.0])

    @pytest.mark.parametrize(
        "pair",
        [zoo.circle(), zoo.sphere(), zoo.paraboloid(), zoo.axis_line(),
         zoo.hyperplane([0.0, 0.0, 1.0])],
        ids=lambda p: p.name,
    )
    def test_tangent_normal_complementary(self, pair):
        rng = np.random.default_rng(5)
        for w in sample_ball(rng, pair.dim, 0.1, 10):
            u = pair.chart.h(w)
            t = tangent_space(pair.chart, w)
            n = normal_space(pair.dual, u)
            assert t.dim + n.dim == pair.ambient_dim
            cross = t.basis.T @ n.basis
            assert np.max(np.abs(cross), initial=0.0) <= 1e-8

    @pytest.mark.parametrize(
        "pair", [zoo.circle(), zoo.sphere(), zoo.paraboloid()], ids=lambda p: p.name
    )
    def test_tangent_dim_constant_in_ball(self, pair):
        rng = np.random.default_rng(9)
        dims = {
            tangent_space(pair.chart, w).dim
            for w in sample_ball(rng, pair.dim, 0.2, 25)
        }
        assert dims == {pair.dim}

    def test_dual_tangent_complements_normal(self):
        pair = zoo.sphere()
        u = pair.chart.h([0.05, -0.03])
        t = tangent_space_at(pair.dual, u)
        n = normal_space(pair.dual, u)
        assert t.dim == 2 and n.dim == 1
        assert np.max(np.abs(t.basis.T @ n.basis)) <= 1e-10


class TestChartValidation:
    def test_degenerate_chart_rejected(self):
        h = SmoothMap(
            lambda w: np.array([w[0] ** 2, 0.0]),
            1,
            2,
            jacobian=lambda w: np.array([[2.0 * w[0]], [0.0]]),
        )
        with pytest.raises(ChartError):
            Chart(h, np.zeros(2))

    def test_base_mismatch_rejected(self):
        h = SmoothMap(lambda w: np.array([w[0], 0.0]), 1, 2)
        with pytest.raises(ChartError):
            Chart(h, np.array([1.0, 0.0]))

    def test_degenerate_dual_chart_rejected(self):
        p = SmoothMap(
            lambda u: np.array([u[0] ** 2]),
            2,
            1,
            jacobian=lambda u: np.array([[2.0 * u[0], 0.0]]),
        )
        with pytest.raises(ChartError):
            DualChart(p, np.zeros(2))

    def test_subspace_requires_orthonormal(self):
        with pytest.raises(ValueError):
            Subspace(np.array([[1.0], [1.0]]), 2)


class TestChartInverse:
    def test_circle_atan2(self):
        pair = zoo.circle()
        g = SmoothMap(lambda u: np.array([np.arctan2(u[1], u[0])]), 2, 1)
        assert chart_inverse_check(pair.chart, g, 50, 0.1, 11) <= 1e-12

    def test_identity(self):
        chart = Chart(identity_map(3), np.zeros(3))
        assert chart_inverse_check(chart, identity_map(3), 20, 0.5, 1) == 0.0

    def test_line_with_sum_inverse(self):
        chart = Chart(SmoothMap(lambda w: np.array([w[0], 0.0]), 1, 2), np.zeros(2))
        g = SmoothMap(lambda u: np.array([u[0] + u[1]]), 2, 1)
        assert chart_inverse_check(chart, g, 30, 0.3, 2) <= 1e-12

    def test_parameter_recovery(self):
        pair = zoo.circle()
        u = pair.chart.h([0.05])
        w = chart_parameter(pair.chart, u)
        assert abs(w[0] - 0.05) <= 1e-10


class TestSampling:
    def test_deterministic(self):
        a = sample_ball(np.random.default_rng(3), 4, 0.5, 10)
        b = sample_ball(np.random.default_rng(3), 4, 0.5, 10)
        assert np.array_equal(a, b)

    def test_radius_bound(self):
        pts = sample_ball(np.random.default_rng(1), 3, 0.25, 100)
        assert np.all(np.linalg.norm(pts, axis=1) <= 0.25 + 1e-15)

    def test_zero_dim(self):
        assert sample_ball(np.random.default_rng(0), 0, 1.0, 5).shape == (5, 0)
