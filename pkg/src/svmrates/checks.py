"""Property suites run by ``svmrates check``.

Each suite returns a :class:`CheckResult` holding the worst value observed
and the threshold it is compared against. Everything is seeded, so the
results are reproducible bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .distributions import (
    TrainingSet,
    excess_hinge_risk,
    excess_hinge_risk_zhang,
    make_power_margin,
    sample,
)
from .kernel import GaussianKernel, KernelExpansion, clip
from .rates import pointwise_variance_slack, variance_bound_check
from .solver import SvmProblem, norm_bound_check, objective, offset_bound_check, train

__all__ = [
    "CheckResult",
    "PiecewiseLinear",
    "random_piecewise_linear",
    "random_expansion",
    "check_pointwise_inequality",
    "check_zhang_identity",
    "check_solver_soundness",
    "check_closed_forms",
    "check_variance_bound",
    "run_all",
    "RESULT_COLUMNS",
]

RESULT_COLUMNS = ("name", "passed", "cases", "worst", "threshold")


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    cases: int
    worst: float
    threshold: float

    def row(self):
        return (self.name, self.passed, self.cases, self.worst, self.threshold)


@dataclass(frozen=True, eq=False)
class PiecewiseLinear:
    """Linear interpolation through ``(knots, values)`` on the first coordinate."""

    knots: np.ndarray
    values: np.ndarray

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        t = x[:, 0] if x.ndim == 2 else x
        return np.interp(t, self.knots, self.values)


def random_piecewise_linear(rng: np.random.Generator, n_knots: int = 8, scale: float = 1.5) -> PiecewiseLinear:
    inner = np.sort(rng.uniform(-1.0, 1.0, n_knots - 2))
    knots = np.concatenate([[-1.0], inner, [1.0]])
    return PiecewiseLinear(knots, rng.normal(0.0, scale, n_knots))


def random_expansion(rng: np.random.Generator, d: int = 1, n_centers: int = 10) -> KernelExpansion:
    sigma = float(rng.uniform(1.0, 8.0))
    centers = rng.uniform(-1.0, 1.0, (n_centers, d))
    return KernelExpansion(GaussianKernel(sigma), centers, rng.normal(0.0, 1.0, n_centers))


def check_pointwise_inequality(threshold: float = -1e-12) -> CheckResult:
    """Pointwise variance inequality on ``p`` in (1/2, 1] mirrored to [0, 1/2), ``t`` in [-3, 3]."""
    p_hi = np.linspace(0.505, 1.0, 100)
    ps = np.concatenate([1.0 - p_hi[::-1], p_hi])
    ts = np.linspace(-3.0, 3.0, 61)
    worst = min(pointwise_variance_slack(float(p), float(t)) for p in ps for t in ts)
    return CheckResult("pointwise_inequality", worst >= threshold, ps.size * ts.size, worst, threshold)


def check_zhang_identity(
    gammas=(0.5, 1.0, 2.0), n_functions: int = 200, seed: int = 1, threshold: float = 1e-4
) -> CheckResult:
    """Largest ``|direct - identity|`` excess hinge risk over random clipped functions."""
    worst = 0.0
    cases = 0
    for g in gammas:
        dist = make_power_margin(g)
        rng = np.random.default_rng([seed, int(round(1000 * g))])
        for _ in range(n_functions):
            f = clip(random_piecewise_linear(rng))
            diff = abs(excess_hinge_risk(dist, f).value - excess_hinge_risk_zhang(dist, f).value)
            worst = max(worst, diff)
            cases += 1
    return CheckResult("zhang_identity", worst <= threshold, cases, worst, threshold)


def random_problem(rng: np.random.Generator, with_offset: bool) -> SvmProblem:
    dist = make_power_margin(float(rng.choice([0.5, 1.0, 2.0])))
    n = int(rng.integers(5, 201))
    ts = sample(dist, n, int(rng.integers(2**31)))
    lam = float(10.0 ** rng.uniform(-4, 0))
    sigma = float(10.0 ** rng.uniform(0, 1.2))
    return SvmProblem(ts, lam, GaussianKernel(sigma), with_offset)


def check_solver_soundness(n_problems: int = 50, seed: int = 2, threshold: float = -1e-6) -> list[CheckResult]:
    """Duality gap, norm bound and offset bound over seeded random problems."""
    rng = np.random.default_rng(seed)
    gap_excess = -math.inf
    norm_worst = math.inf
    offset_worst = math.inf
    for i in range(n_problems):
        prob = random_problem(rng, with_offset=bool(i % 2))
        sol = train(prob)
        gap_excess = max(gap_excess, sol.certificate - 1e-8 * prob.n)
        norm_worst = min(norm_worst, norm_bound_check(sol).slack)
        if prob.with_offset:
            offset_worst = min(offset_worst, offset_bound_check(sol).slack)
    return [
        CheckResult("duality_gap", gap_excess <= 0.0, n_problems, gap_excess, 0.0),
        CheckResult("norm_bound", norm_worst >= threshold, n_problems, norm_worst, threshold),
        CheckResult("offset_bound", offset_worst >= threshold, n_problems // 2, offset_worst, threshold),
    ]


def check_closed_forms(threshold: float = 1e-6) -> CheckResult:
    """Single-point problems with known solutions: ``c = min(1, 1/(2 lam))``."""
    ts = TrainingSet(np.zeros((1, 1)), np.array([1]), 0)
    worst = 0.0
    for lam, c, obj in ((0.5, 1.0, 0.5), (2.0, 0.25, 0.875)):
        prob = SvmProblem(ts, lam, GaussianKernel(1.0))
        sol = train(prob)
        worst = max(worst, abs(sol.expansion.coefficients[0] - c), abs(objective(prob, sol.expansion) - obj))
    return CheckResult("closed_forms", worst <= threshold, 2, worst, threshold)


def check_variance_bound(n_functions: int = 100, seed: int = 3, threshold: float = -1e-6) -> CheckResult:
    """Variance bound margin over random clipped functions on the ``gamma = 1`` power-margin family."""
    dist = make_power_margin(1.0)
    rng = np.random.default_rng(seed)
    worst = math.inf
    for i in range(n_functions):
        base = random_piecewise_linear(rng) if i % 2 else random_expansion(rng)
        worst = min(worst, variance_bound_check(dist, clip(base)).margin)
    return CheckResult("variance_bound", worst >= threshold, n_functions, worst, threshold)


def run_all(seed: int = 0) -> list[CheckResult]:
    """Every suite, seeded from ``seed``."""
    ss = np.random.SeedSequence(seed).generate_state(4)
    results = [check_pointwise_inequality()]
    results.append(check_zhang_identity(seed=int(ss[0])))
    results.extend(check_solver_soundness(seed=int(ss[1])))
    results.append(check_closed_forms())
    results.append(check_variance_bound(seed=int(ss[2])))
    return results
