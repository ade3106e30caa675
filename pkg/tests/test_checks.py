import numpy as np
import pytest

from svmrates.checks import (
    PiecewiseLinear,
    check_closed_forms,
    check_pointwise_inequality,
    check_solver_soundness,
    check_variance_bound,
    check_zhang_identity,
    random_piecewise_linear,
)


class TestGenerators:
    def test_piecewise_linear_interpolates(self):
        f = PiecewiseLinear(np.array([-1.0, 0.0, 1.0]), np.array([0.0, 2.0, 0.0]))
        np.testing.assert_allclose(f(np.array([[-0.5], [0.0], [0.75]])), [1.0, 2.0, 0.5])

    def test_seeded(self):
        a = random_piecewise_linear(np.random.default_rng(1))
        b = random_piecewise_linear(np.random.default_rng(1))
        np.testing.assert_array_equal(a.values, b.values)
        assert a.knots[0] == -1.0 and a.knots[-1] == 1.0


class TestSuites:
    def test_pointwise(self):
        r = check_pointwise_inequality()
        assert r.passed and r.cases == 200 * 61

    def test_zhang_small(self):
        assert check_zhang_identity(n_functions=10).passed

    def test_solver_small(self):
        assert all(r.passed for r in check_solver_soundness(n_problems=6))

    def test_closed_forms(self):
        assert check_closed_forms().passed

    def test_variance_small(self):
        assert check_variance_bound(n_functions=10).passed

    def test_failure_is_reported(self):
        r = check_pointwise_inequality(threshold=0.5)
        assert not r.passed and r.row()[1] is False
