import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from svmrates.checks import random_problem
from svmrates.distributions import TrainingSet, make_power_margin, sample
from svmrates.kernel import GaussianKernel, KernelExpansion, gram
from svmrates.solver import (
    SolverError,
    SvmProblem,
    norm_bound_check,
    objective,
    offset_bound_check,
    optimal_offset,
    train,
)


def one_point(label=1):
    return TrainingSet(np.zeros((1, 1)), np.array([label]), 0)


@pytest.fixture(scope="module")
def problems():
    rng = np.random.default_rng(77)
    return [random_problem(rng, with_offset=bool(i % 2)) for i in range(50)]


@pytest.fixture(scope="module")
def solutions(problems):
    return [train(p) for p in problems]


class TestObjective:
    def test_zero_expansion(self, small_set):
        prob = SvmProblem(small_set, 0.1, GaussianKernel(2.0))
        f = KernelExpansion(GaussianKernel(2.0), small_set.x, np.zeros(small_set.n))
        assert objective(prob, f) == 1.0

    @pytest.mark.parametrize("lam, c, expected", [(0.5, 1.0, 0.5), (2.0, 0.25, 0.875)])
    def test_direct_formula(self, lam, c, expected):
        prob = SvmProblem(one_point(), lam, GaussianKernel(1.0))
        f = KernelExpansion(GaussianKernel(1.0), np.zeros((1, 1)), np.array([c]))
        assert objective(prob, f) == pytest.approx(expected, abs=1e-15)

    def test_sigma_mismatch(self):
        prob = SvmProblem(one_point(), 1.0, GaussianKernel(1.0))
        with pytest.raises(ValueError):
            objective(prob, KernelExpansion(GaussianKernel(2.0), np.zeros((1, 1)), np.array([1.0])))

    def test_offset_forbidden_without_offset(self):
        prob = SvmProblem(one_point(), 1.0, GaussianKernel(1.0))
        with pytest.raises(ValueError):
            objective(prob, KernelExpansion(GaussianKernel(1.0), np.zeros((1, 1)), np.array([1.0]), offset=0.5))

    def test_rejects_nonpositive_lambda(self):
        with pytest.raises(ValueError):
            SvmProblem(one_point(), 0.0, GaussianKernel(1.0))


class TestClosedForms:
    @pytest.mark.parametrize("lam, c, obj", [(0.5, 1.0, 0.5), (2.0, 0.25, 0.875)])
    @pytest.mark.parametrize("route", ["dual", "primal"])
    def test_single_point(self, lam, c, obj, route):
        sol = train(SvmProblem(one_point(), lam, GaussianKernel(1.0)), route=route)
        assert sol.expansion.coefficients[0] == pytest.approx(c, abs=1e-6)
        assert sol.objective == pytest.approx(obj, abs=1e-6)

    @pytest.mark.parametrize("label", [1, -1])
    def test_degenerate_labels(self, label):
        ts = TrainingSet(np.linspace(-1, 1, 5).reshape(-1, 1), np.full(5, label), 0)
        sol = train(SvmProblem(ts, 0.1, GaussianKernel(1.0), with_offset=True))
        assert sol.offset == label
        assert sol.rkhs_norm() == 0.0
        assert offset_bound_check(sol).slack >= 0.0

    def test_contradictory_pair(self):
        ts = TrainingSet(np.zeros((2, 1)), np.array([1, -1]), 0)
        sol = train(SvmProblem(ts, 0.1, GaussianKernel(1.0), with_offset=True))
        assert sol.objective == pytest.approx(1.0, abs=1e-8)
        assert sol.offset == 0.0

    @pytest.mark.parametrize(
        "f, y, expected",
        [
            ([0.0, 0.0], [1, -1], 0.0),
            ([0.0, 0.0, 0.0], [1, 1, -1], 1.0),
            ([0.5, -0.5], [1, -1], 0.0),
        ],
    )
    def test_optimal_offset(self, f, y, expected):
        assert optimal_offset(np.array(f), np.array(y)) == pytest.approx(expected)


class TestSoundness:
    def test_certificates(self, problems, solutions):
        for p, s in zip(problems, solutions):
            assert 0.0 <= s.certificate <= 1e-8 * p.n
            assert s.objective >= 0.0

    def test_norm_bound(self, solutions):
        assert all(norm_bound_check(s).slack >= -1e-6 for s in solutions)

    def test_offset_bound(self, solutions):
        assert all(offset_bound_check(s).slack >= -1e-6 for s in solutions if s.with_offset)

    def test_random_probes_never_beat_solution(self, problems, solutions):
        rng = np.random.default_rng(5)
        for p, s in zip(problems, solutions):
            ts = p.training_set
            K = gram(p.kernel, ts.x)
            scale = np.sqrt(1.0 / p.lam) / np.sqrt(max(np.trace(K), 1.0))
            C = rng.normal(0.0, scale, (1000, p.n))
            fx = C @ K
            b = rng.normal(0.0, 1.0, (1000, 1)) if p.with_offset else np.zeros((1000, 1))
            probe = p.lam * np.einsum("ti,ij,tj->t", C, K, C) + np.mean(
                np.maximum(0.0, 1.0 - ts.y * (fx + b)), axis=1
            )
            assert probe.min() >= s.objective - 1e-8 * p.n

    @pytest.mark.parametrize("k", range(10))
    def test_dual_and_primal_agree(self, problems, k):
        p = problems[k]
        tol = 1e-8 * p.n
        dual = train(p, tol)
        primal = train(p, tol, route="primal")
        assert abs(dual.objective - primal.objective) <= 2 * tol

    @pytest.mark.parametrize("k", range(0, 50, 5))
    def test_f_part_independent_of_ordering(self, problems, k):
        p = problems[k]
        tol = 1e-8 * p.n
        a = train(p, tol, order_seed=1).expansion
        b = train(p, tol, order_seed=2).expansion
        x = p.training_set.x
        l2 = np.sqrt(np.mean((a.without_offset()(x) - b.without_offset()(x)) ** 2))
        # strong convexity: lam ||f - f*||^2 <= gap, so the sup-norm distance is at most 2 sqrt(tol / lam)
        assert l2 <= 2.0 * np.sqrt(tol / p.lam)

    def test_norm_shrinks_with_lambda(self, small_set):
        norms = [train(SvmProblem(small_set, lam, GaussianKernel(2.0))).rkhs_norm() for lam in (1.0, 10.0, 100.0)]
        assert norms[0] > norms[1] > norms[2]

    def test_budget_exhaustion_is_reported(self):
        ts = sample(make_power_margin(1.0), 150, 9)
        with pytest.raises(SolverError) as info:
            train(SvmProblem(ts, 1e-5, GaussianKernel(4.0)), max_passes=1)
        assert info.value.certificate > 0

    @given(st.integers(0, 2**31), st.booleans())
    def test_property_certified(self, seed, with_offset):
        p = random_problem(np.random.default_rng(seed), with_offset)
        s = train(p)
        assert s.certificate <= 1e-8 * p.n
        assert norm_bound_check(s)


class TestSoftMarginEquivalence:
    @pytest.mark.parametrize("seed", range(5))
    def test_matches_libsvm(self, seed):
        svm = pytest.importorskip("sklearn.svm")
        rng = np.random.default_rng(seed)
        ts = sample(make_power_margin(1.0), 120, int(rng.integers(2**31)))
        lam, sigma = 1e-2, 2.0
        prob = SvmProblem(ts, lam, GaussianKernel(sigma), with_offset=True)
        ours = train(prob, 1e-10 * prob.n)
        ref = svm.SVC(C=prob.cost, kernel="rbf", gamma=sigma**2, tol=1e-10).fit(ts.x, ts.y)
        grid = np.linspace(-1, 1, 201).reshape(-1, 1)
        np.testing.assert_allclose(ours.expansion(grid), ref.decision_function(grid), atol=1e-4)
