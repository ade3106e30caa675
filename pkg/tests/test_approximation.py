import math

import numpy as np
import pytest

from svmrates.approximation import (
    approx_bound_rhs,
    approx_error_empirical,
    approx_error_witness,
    approx_scan,
    decay_slope,
    optimal_sigma,
    ratio_scan,
)
from svmrates.distributions import hinge_risk_min
from svmrates.kernel import approx_witness


class TestWitnessRoute:
    def test_separated_risk_term_negligible(self, sep1):
        lam = 1e-6
        g2 = approx_witness(sep1, 16.0).g_norm_sq
        assert approx_error_witness(sep1, 16.0, lam) <= lam * g2 + 1e-3

    @pytest.mark.parametrize("family", ["pm1", "pm2", "w12", "sep1"])
    def test_trivial_upper_bound(self, request, family):
        dist = request.getfixturevalue(family)
        for sigma in (1.0, 8.0):
            g2 = approx_witness(dist, sigma).g_norm_sq
            val = approx_error_witness(dist, sigma, 1e-3)
            assert 1e-3 * g2 - 1e-8 <= val <= 1e-3 * g2 + 1.0

    def test_u_shape_in_sigma(self, pm1):
        vals = [approx_error_witness(pm1, s, 1e-3) for s in (1, 2, 4, 8, 16, 32)]
        k = int(np.argmin(vals))
        assert 0 < k < len(vals) - 1
        assert all(np.diff(vals[: k + 1]) < 0) and all(np.diff(vals[k:]) > 0)

    def test_monotone_in_lambda(self, pm1):
        vals = [approx_error_witness(pm1, 4.0, lam) for lam in (1e-4, 1e-3, 1e-2, 1e-1)]
        assert all(np.diff(vals) >= 0)

    def test_rejects_nonpositive_lambda(self, pm1):
        with pytest.raises(ValueError):
            approx_error_witness(pm1, 2.0, 0.0)


class TestCoupling:
    def test_optimal_sigma(self):
        assert optimal_sigma(1e-4, 1.0, 1) == pytest.approx(100.0, rel=1e-12)

    def test_decay_slope_power_margin(self, pm1):
        assert decay_slope(pm1, [1e-1, 1e-2, 1e-3, 1e-4], alpha=2.0) >= 2.0 / 3.0 - 0.1

    def test_decay_slope_separated_fixed_sigma(self, sep1):
        assert decay_slope(sep1, [1e-1, 1e-2, 1e-3, 1e-4], alpha=math.inf, sigma=16.0) >= 0.9

    def test_rhs_first_term(self):
        assert approx_bound_rhs(1.0, 1.0, 2.0, 0.5, 1) >= 1.0

    @pytest.mark.parametrize("alpha, d", [(1.0, 1), (2.0, 1), (3.0, 2)])
    def test_rhs_scaling_along_coupling(self, alpha, d):
        lams = np.logspace(-6, -1, 6)
        rhs = [approx_bound_rhs(optimal_sigma(l, alpha, d), l, alpha, 0.7, d) for l in lams]
        slope = np.polyfit(np.log(lams), np.log(rhs), 1)[0]
        assert slope == pytest.approx(alpha / (alpha + 1), abs=1e-6)


class TestRatioScan:
    def test_bounded_and_stable(self, pm1):
        base = ratio_scan(pm1, (2, 4, 8, 16, 32), (1e-5, 1e-4, 1e-3, 1e-2, 1e-1))
        sig2 = tuple(2.0 ** np.arange(1, 5.01, 0.5))
        lam2 = tuple(10.0 ** np.arange(-5, -0.99, 0.5))
        fine = ratio_scan(pm1, sig2, lam2)
        assert math.isfinite(base.max_ratio)
        assert abs(fine.max_ratio - base.max_ratio) / base.max_ratio < 0.2

    def test_infinite_alpha_rejected(self, sep1):
        with pytest.raises(ValueError):
            ratio_scan(sep1)


class TestEmpiricalRoute:
    def test_not_worse_than_witness(self, pm1):
        emp = approx_error_empirical(pm1, 8.0, 1e-3, n_dense=2000, seed=0)
        assert emp.value <= approx_error_witness(pm1, 8.0, 1e-3) + 0.05
        assert len(emp.values) == 3 and emp.spread >= 0

    def test_large_lambda_near_zero_function(self, pm1):
        emp = approx_error_empirical(pm1, 2.0, 1.0, n_dense=1000, seed=1)
        assert emp.value <= 1.0 - hinge_risk_min(pm1).value + 1e-3

    def test_monotone_in_lambda(self, pm1):
        a = approx_error_empirical(pm1, 4.0, 1e-3, n_dense=1000, seed=2).value
        b = approx_error_empirical(pm1, 4.0, 1e-2, n_dense=1000, seed=2).value
        assert b >= a - 1e-3

    def test_requires_dense_sample(self, pm1):
        with pytest.raises(ValueError):
            approx_error_empirical(pm1, 4.0, 1e-3, n_dense=500)


class TestScan:
    def test_rows_and_caps(self, pm1):
        rows = approx_scan(pm1, (2.0, 8.0), (1e-3, 1e-1))
        cap = 1.0 - hinge_risk_min(pm1).value
        assert [(r.sigma, r.lam) for r in rows] == [(2.0, 1e-3), (2.0, 1e-1), (8.0, 1e-3), (8.0, 1e-1)]
        assert all(0.0 <= r.a_upper_witness <= min(cap, 1.0) for r in rows)
        assert all(math.isnan(r.a_upper_empirical) for r in rows)
        assert all(r.rhs > 0 and math.isfinite(r.ratio) for r in rows)

    def test_separated_has_no_rhs(self, sep1):
        rows = approx_scan(sep1, (4.0,), (1e-2,))
        assert math.isnan(rows[0].rhs)
