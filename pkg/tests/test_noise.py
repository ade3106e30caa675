import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svmrates.distributions import make_power_margin, make_weighted_power_margin
from svmrates.noise import (
    envelope_constant,
    fit_envelope_order,
    fit_geometric,
    fit_tsybakov,
    geometric_integral,
    margin_mass,
    noise_report,
    predicted_geometric_exponent,
    tau_inverse_norm,
)


class TestMarginMass:
    def test_uniform_case(self, pm1, oracle):
        assert margin_mass(pm1, 0.3).value == pytest.approx(oracle["margin_mass_pm1_0.3"], abs=1e-8)

    @pytest.mark.parametrize("family", ["pm1", "pm2", "w12", "sep1"])
    def test_full_mass_at_one(self, request, family):
        assert margin_mass(request.getfixturevalue(family), 1.0).value == pytest.approx(1.0, abs=1e-8)

    def test_noiseless(self, sep1):
        assert margin_mass(sep1, 0.5).value == 0.0

    @pytest.mark.parametrize("t", [0.01, 0.1, 0.5])
    def test_weighted_mass(self, w12, oracle, t):
        assert margin_mass(w12, t).value == pytest.approx(oracle["margin_mass_w12"][str(t)], abs=1e-8)

    def test_weighted_reduces_to_uniform(self, pm1):
        w11 = make_weighted_power_margin(1.0, 1.0)
        for t in (0.05, 0.2, 0.7):
            assert margin_mass(w11, t).value == pytest.approx(margin_mass(pm1, t).value, abs=1e-10)

    @given(st.floats(1e-3, 1.0), st.floats(1e-3, 1.0), st.sampled_from([0.5, 1.0, 2.0]))
    def test_monotone_and_bounded(self, s, t, gamma):
        dist = make_power_margin(gamma)
        lo, hi = sorted((s, t))
        a, b = margin_mass(dist, lo).value, margin_mass(dist, hi).value
        assert 0.0 <= a <= b + 1e-12 <= 1.0 + 1e-12

    def test_rejects_nonpositive(self, pm1):
        with pytest.raises(ValueError):
            margin_mass(pm1, 0.0)


class TestTsybakovFit:
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
    def test_power_margin(self, gamma):
        assert fit_tsybakov(make_power_margin(gamma)).exponent == pytest.approx(1.0 / gamma, abs=0.05)

    def test_weighted(self, w12):
        assert fit_tsybakov(w12).exponent == pytest.approx(2.0, abs=0.1)

    def test_separated_is_infinite(self, sep1):
        assert math.isinf(fit_tsybakov(sep1).exponent)

    @pytest.mark.parametrize("grid", [[0.1, 0.2], [0.01, 0.02, 0.03, 0.04, 1.5], [0.05, 0.04, 0.03, 0.02, 0.01]])
    def test_degenerate_grids(self, pm1, grid):
        with pytest.raises(ValueError):
            fit_tsybakov(pm1, grid)


class TestGeometric:
    def test_limit_large_t(self, pm1):
        assert geometric_integral(pm1, 1e8).value == pytest.approx(0.5, abs=1e-6)

    @pytest.mark.parametrize("t", [0.01, 0.1])
    def test_against_reference(self, pm1, oracle, t):
        assert geometric_integral(pm1, t).value == pytest.approx(oracle["geo_pm1"][str(t)], rel=1e-8)

    def test_monotone(self, pm1):
        assert geometric_integral(pm1, 0.01).value < geometric_integral(pm1, 0.1).value

    def test_separated_bound(self, sep1, oracle):
        assert geometric_integral(sep1, 0.01).value <= oracle["geo_separated_bound_0.01"]

    @pytest.mark.parametrize("t", [0.005, 0.01, 0.05])
    def test_separated_bound_d2(self, sep2, t):
        est = geometric_integral(sep2, t)
        assert est.value <= math.exp(-(0.25**2) / t) + 3 * est.error

    @pytest.mark.parametrize("gamma, alpha", [(1.0, 2.0), (2.0, 3.0)])
    def test_power_margin_alpha(self, gamma, alpha):
        assert fit_geometric(make_power_margin(gamma)).exponent == pytest.approx(alpha, abs=0.15)

    @pytest.mark.parametrize("gamma, q", [(1.0, 1.0), (1.0, 2.0), (2.0, 1.0)])
    def test_predicted_exponent_consistency(self, gamma, q):
        dist = make_weighted_power_margin(gamma, q)
        assert fit_geometric(dist).exponent == pytest.approx((q + 1) * gamma, abs=0.2)

    def test_separated_is_infinite(self, sep1):
        assert math.isinf(fit_geometric(sep1).exponent)

    @pytest.mark.parametrize("alpha", [1.0, 1.5, 1.9])
    def test_finite_tau_norm_implies_exponent(self, pm1, alpha):
        assert math.isfinite(tau_inverse_norm(pm1, alpha))
        assert fit_geometric(pm1).exponent >= alpha - 0.2

    @pytest.mark.parametrize("p", [2.0, 3.0])
    def test_tau_norm_diverges(self, pm1, p):
        assert math.isinf(tau_inverse_norm(pm1, p))


class TestEnvelope:
    @pytest.mark.parametrize("gamma", [0.5, 1.0, 2.0])
    def test_exact_envelope(self, gamma):
        assert envelope_constant(make_power_margin(gamma), gamma) == pytest.approx(1.0, abs=1e-3)

    def test_overstated_order_grows(self, pm1):
        coarse = envelope_constant(pm1, 2.0, exclusion=1e-2)
        fine = envelope_constant(pm1, 2.0, exclusion=1e-3)
        assert fine > 5 * coarse

    def test_fitted_order(self, pm2):
        assert fit_envelope_order(pm2).exponent == pytest.approx(2.0, abs=1e-6)

    def test_prediction(self):
        assert predicted_geometric_exponent(1, 1, 1).value == 2.0
        assert predicted_geometric_exponent(0.5, 1, 1).strict


class TestReport:
    def test_fields(self, pm1):
        rep = noise_report(pm1)
        assert rep.q_hat == pytest.approx(1.0, abs=0.05)
        assert rep.alpha_hat == pytest.approx(2.0, abs=0.15)
        assert rep.gamma_hat == pytest.approx(1.0, abs=1e-6)
        assert rep.c_gamma_hat == pytest.approx(1.0, abs=1e-3)
        rec = rep.as_record()
        assert {"tsybakov_r2", "geometric_r2", "envelope_r2"} <= set(rec)
        assert all(v >= 0 for k, v in rec.items() if k.endswith("_hat"))
