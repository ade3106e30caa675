"""Upper bounds on the approximation error of Gaussian RKHSs.

For a kernel width parameter ``sigma`` and regularisation ``lam`` the
approximation error is

    a_sigma(lam) = inf_f  lam ||f||_H^2 + R_hinge(f) - min R_hinge.

Two independent upper bounds are computed:

* the witness route evaluates the objective at the explicit function
  ``V_sigma g`` from :mod:`svmrates.kernel`, whose RKHS norm is known exactly;
* the empirical route trains an offset-free SVM on a large sample and
  evaluates the objective of the trained function under the true
  distribution.

Both are genuine upper bounds because the objective is evaluated exactly
(by quadrature) at a member of the RKHS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress

from .distributions import SyntheticDistribution, excess_hinge_risk, hinge_risk_min, sample
from .kernel import GaussianKernel, approx_witness
from .solver import SvmProblem, train

__all__ = [
    "ApproxErrorPoint",
    "EmpiricalApprox",
    "RatioScan",
    "approx_error_witness",
    "approx_error_empirical",
    "optimal_sigma",
    "decay_slope",
    "approx_bound_rhs",
    "ratio_scan",
    "approx_scan",
    "DEFAULT_SIGMA_GRID",
    "DEFAULT_LAMBDA_GRID",
]

DEFAULT_SIGMA_GRID = (2.0, 4.0, 8.0, 16.0, 32.0)
DEFAULT_LAMBDA_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


@dataclass(frozen=True)
class ApproxErrorPoint:
    lam: float
    sigma: float
    a_upper_witness: float
    a_upper_empirical: float
    rhs: float

    @property
    def ratio(self) -> float:
        return self.a_upper_witness / self.rhs if self.rhs > 0 else math.inf


@dataclass(frozen=True)
class EmpiricalApprox:
    value: float
    values: tuple[float, ...]
    spread: float


@dataclass(frozen=True)
class RatioScan:
    max_ratio: float
    argmax: tuple[float, float]
    ratios: np.ndarray


def approx_error_witness(dist: SyntheticDistribution, sigma: float, lam: float) -> float:
    """``lam ||g||^2 + excess hinge risk of V_sigma g``."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam!r}")
    w = approx_witness(dist, sigma)
    excess = excess_hinge_risk(dist, w).value
    return lam * w.g_norm_sq + max(excess, 0.0)


def _zero_function_value(dist) -> float:
    # objective at f = 0: the hinge risk of 0 is 1
    return 1.0 - hinge_risk_min(dist).value


def approx_error_empirical(
    dist: SyntheticDistribution,
    sigma: float,
    lam: float,
    n_dense: int = 2000,
    seed: int = 0,
    n_seeds: int = 3,
) -> EmpiricalApprox:
    """Mean over ``n_seeds`` dense-sample SVMs of ``lam ||f||^2 + excess hinge risk of f``."""
    if n_dense < 1000:
        raise ValueError(f"n_dense must be at least 1000, got {n_dense}")
    kernel = GaussianKernel(sigma)
    seeds = np.random.SeedSequence([seed, n_dense]).generate_state(n_seeds)
    vals = []
    for s in seeds:
        ts = sample(dist, n_dense, int(s))
        sol = train(SvmProblem(ts, lam, kernel))
        f = sol.expansion
        vals.append(lam * f.rkhs_norm_sq() + max(excess_hinge_risk(dist, f).value, 0.0))
    vals = tuple(float(v) for v in vals)
    spread = float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0
    return EmpiricalApprox(float(np.mean(vals)), vals, spread)


def optimal_sigma(lam: float, alpha: float, d: int) -> float:
    """``lam^(-1 / ((alpha + 1) d))``, the width balancing the two error terms."""
    return lam ** (-1.0 / ((alpha + 1.0) * d))


def decay_slope(dist: SyntheticDistribution, lambda_grid, alpha: float, d: int | None = None, sigma=None) -> float:
    """OLS slope of log witness value against log lambda.

    The width follows ``optimal_sigma`` unless a fixed ``sigma`` is given
    (the infinite-exponent case).
    """
    d = dist.d if d is None else d
    lams = np.asarray(lambda_grid, dtype=float)
    if lams.size < 4:
        raise ValueError("need at least 4 lambda values")
    vals = []
    for lam in lams:
        s = optimal_sigma(lam, alpha, d) if sigma is None else sigma
        vals.append(approx_error_witness(dist, s, lam))
    return float(linregress(np.log(lams), np.log(vals)).slope)


def approx_bound_rhs(sigma: float, lam: float, alpha: float, c_geo: float, d: int) -> float:
    """``sigma^d lam + c_geo (2d)^(alpha d / 2) sigma^(-alpha d)``."""
    return sigma**d * lam + c_geo * (2.0 * d) ** (alpha * d / 2.0) * sigma ** (-alpha * d)


def ratio_scan(
    dist: SyntheticDistribution,
    sigma_grid=DEFAULT_SIGMA_GRID,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    alpha: float | None = None,
    c_geo: float | None = None,
) -> RatioScan:
    """Largest ratio of witness value to ``approx_bound_rhs`` over a grid.

    Stands in for the unknown dimension constant of the bound; only its
    stability under grid changes is meaningful.
    """
    known = dist.known_exponents
    alpha = known.alpha if alpha is None else alpha
    c_geo = known.geometric_constant if c_geo is None else c_geo
    if not math.isfinite(alpha) or c_geo is None:
        raise ValueError("ratio scan needs a finite geometric exponent and its constant")
    sig = np.asarray(sigma_grid, dtype=float)
    lam = np.asarray(lambda_grid, dtype=float)
    ratios = np.empty((sig.size, lam.size))
    for i, s in enumerate(sig):
        w = approx_witness(dist, s)
        excess = max(excess_hinge_risk(dist, w).value, 0.0)
        for j, l in enumerate(lam):
            ratios[i, j] = (l * w.g_norm_sq + excess) / approx_bound_rhs(s, l, alpha, c_geo, dist.d)
    k = np.unravel_index(np.argmax(ratios), ratios.shape)
    return RatioScan(float(ratios[k]), (float(sig[k[0]]), float(lam[k[1]])), ratios)


def approx_scan(
    dist: SyntheticDistribution,
    sigma_grid=DEFAULT_SIGMA_GRID,
    lambda_grid=DEFAULT_LAMBDA_GRID,
    empirical: bool = False,
    n_dense: int = 2000,
    seed: int = 0,
) -> list[ApproxErrorPoint]:
    """One :class:`ApproxErrorPoint` per ``(sigma, lam)``, rows ordered by sigma then lambda.

    The witness column is capped by the value of the zero function, which is
    also a feasible candidate. The empirical column is ``nan`` unless requested.
    """
    known = dist.known_exponents
    finite = known is not None and math.isfinite(known.alpha) and known.geometric_constant is not None
    cap = _zero_function_value(dist)
    rows = []
    for s in sigma_grid:
        w = approx_witness(dist, s)
        excess = max(excess_hinge_risk(dist, w).value, 0.0)
        for lam in lambda_grid:
            wit = min(lam * w.g_norm_sq + excess, cap)
            emp = approx_error_empirical(dist, s, lam, n_dense, seed).value if empirical else math.nan
            rhs = approx_bound_rhs(s, lam, known.alpha, known.geometric_constant, dist.d) if finite else math.nan
            rows.append(ApproxErrorPoint(float(lam), float(s), wit, emp, rhs))
    return rows
