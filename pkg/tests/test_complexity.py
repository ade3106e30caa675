import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svmrates.complexity import (
    CoverProfile,
    cover_profile,
    cover_scaling_scan,
    greedy_cover_count,
    log_cover_bounds,
    rademacher_average,
    rademacher_exact,
)
from svmrates.distributions import make_power_margin


class TestProfile:
    def test_single_point(self):
        np.testing.assert_allclose(cover_profile([[0.3]], 2.0).semi_axes, [1.0])

    def test_identical_points(self):
        np.testing.assert_allclose(cover_profile([[0.1], [0.1]], 2.0).semi_axes, [1.0, 0.0], atol=1e-12)

    def test_far_points(self):
        np.testing.assert_allclose(cover_profile([[-1.0], [1.0]], 20.0).semi_axes, [math.sqrt(0.5)] * 2, atol=1e-12)

    @given(st.integers(0, 2**31), st.integers(1, 40), st.floats(0.2, 40.0))
    def test_axes_sorted_and_bounded(self, seed, n, sigma):
        a = cover_profile(np.random.default_rng(seed).uniform(-1, 1, (n, 1)), sigma).semi_axes
        assert a.size == n
        assert np.all(np.diff(a) <= 0) and np.all((a >= 0) & (a <= 1))


class TestBounds:
    def test_large_epsilon(self):
        prof = cover_profile(np.linspace(-1, 1, 10).reshape(-1, 1), 3.0)
        assert log_cover_bounds(prof, 1.0)[0] == 0.0

    def test_single_point_value(self, oracle):
        lower, upper = log_cover_bounds(cover_profile([[0.0]], 1.0), 1.0 / math.e)
        assert lower == pytest.approx(oracle["cover_n1_lower"], abs=1e-12)
        assert upper == pytest.approx(oracle["cover_n1_upper"], abs=1e-12)

    @pytest.mark.parametrize("eps", [0.0, -0.1, 1.5])
    def test_rejects_bad_epsilon(self, eps):
        with pytest.raises(ValueError):
            log_cover_bounds(cover_profile([[0.0]], 1.0), eps)

    @given(st.integers(0, 2**31), st.integers(1, 30), st.floats(0.5, 30.0), st.floats(1e-3, 1.0))
    def test_order_and_monotonicity(self, seed, n, sigma, eps):
        prof = cover_profile(np.random.default_rng(seed).uniform(-1, 1, (n, 1)), sigma)
        lo, up = log_cover_bounds(prof, eps)
        lo2, up2 = log_cover_bounds(prof, eps / 2)
        assert lo <= up
        assert lo2 >= lo and up2 >= up

    @given(st.integers(0, 2**31), st.integers(1, 30), st.floats(0.5, 30.0), st.floats(1e-3, 1.0))
    def test_adding_a_point(self, seed, n, sigma, eps):
        # at a common normalisation the extra point can only enlarge the ellipsoid (eigenvalue interlacing)
        pts = np.random.default_rng(seed).uniform(-1, 1, (n + 1, 1))
        small = cover_profile(pts[:n], sigma)
        big = cover_profile(pts, sigma)
        rescaled = CoverProfile(small.semi_axes * math.sqrt(n / (n + 1)), n + 1, sigma)
        lo_s, up_s = log_cover_bounds(rescaled, eps)
        lo_b, up_b = log_cover_bounds(big, eps)
        assert lo_b >= lo_s - 1e-8 and up_b >= up_s - 1e-8

    @pytest.mark.parametrize("seed", range(20))
    def test_greedy_oracle_between_bounds(self, seed):
        rng = np.random.default_rng(seed)
        n = int(rng.integers(1, 4))
        pts = rng.uniform(-1, 1, (n, 1))
        sigma = float(rng.uniform(0.5, 6.0))
        eps = float(rng.uniform(0.15, 0.8))
        lower, upper = log_cover_bounds(cover_profile(pts, sigma), eps)
        count = greedy_cover_count(pts, sigma, eps)
        assert math.exp(lower) <= count <= math.exp(upper) + 1e-9

    def test_greedy_limited_to_small_n(self):
        with pytest.raises(ValueError):
            greedy_cover_count(np.zeros((4, 1)), 1.0, 0.5)


@pytest.fixture(scope="module")
def report():
    return cover_scaling_scan(make_power_margin(1.0), (1, 2, 4, 8, 16, 32), tuple(2.0 ** -np.arange(1, 9)), n=500, seed=0)


class TestScan:
    def test_eps_slopes(self, report):
        assert np.nanmax(report.eps_slopes) <= 2.1

    def test_sigma_slopes(self, report):
        assert np.nanmax(report.sigma_slopes) <= 1.2

    def test_tradeoff(self, report):
        assert report.rank_correlation < 0

    def test_rows(self, report):
        rows = list(report.rows())
        assert len(rows) == 48
        assert all(lo <= up for *_, lo, up in rows)

    def test_rejects_small_grid(self):
        with pytest.raises(ValueError):
            cover_scaling_scan(np.zeros((5, 1)), (1, 2, 4), (0.5, 0.25, 0.125, 0.0625))


class TestRademacher:
    @pytest.mark.parametrize("s", [1, -1])
    def test_single_point(self, s):
        assert rademacher_exact([[0.2]], 3.0, [s]) == pytest.approx(1.0)

    def test_duplicates_cancel(self):
        assert rademacher_exact([[0.0], [0.0]], 1.0, [1, -1]) == pytest.approx(0.0, abs=1e-12)

    def test_duplicates_add(self):
        assert rademacher_exact([[0.0], [0.0]], 1.0, [1, 1]) == pytest.approx(1.0)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rademacher_exact([[0.0], [0.0]], 1.0, [1])

    @given(st.integers(0, 2**31), st.integers(1, 30), st.floats(0.2, 30.0))
    def test_at_most_one(self, seed, n, sigma):
        rng = np.random.default_rng(seed)
        s = rng.choice([-1, 1], n)
        assert rademacher_exact(rng.uniform(-1, 1, (n, 1)), sigma, s) <= 1.0 + 1e-12

    def test_decreases_with_n(self, pm1):
        meds = []
        for n in (10, 40, 160):
            vals = [
                rademacher_average(pm1.sample_marginal(np.random.default_rng([r, n]), n), 4.0, 50, r).value
                for r in range(20)
            ]
            meds.append(np.median(vals))
        assert meds[0] > meds[1] > meds[2]

    def test_standard_error(self):
        est = rademacher_average(np.linspace(-1, 1, 20).reshape(-1, 1), 2.0, 200, 0)
        assert 0 < est.error < est.value
