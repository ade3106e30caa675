"""Capacity of Gaussian RKHS balls measured on a finite sample.

Restricted to sample points ``x_1..x_n`` and measured in the empirical norm
``||f||^2 = (1/n) sum f(x_i)^2``, the unit ball of the RKHS becomes the
ellipsoid ``{K^(1/2) u / sqrt(n) : |u| <= 1}``. Its semi-axes are
``sqrt(mu_i / n)`` with ``mu_i`` the eigenvalues of the Gram matrix ``K``, so
covering numbers reduce to ellipsoid geometry. Only a lower and an upper
bound are reported; exact covering numbers are out of reach.

The Rademacher average of the unit ball has the closed form
``(1/n) sqrt(s^T K s)`` for a sign vector ``s``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import linregress, spearmanr

from .distributions import SyntheticDistribution
from .kernel import GaussianKernel, gram
from .quadrature import Estimate

__all__ = [
    "CoverProfile",
    "ScalingReport",
    "cover_profile",
    "log_cover_bounds",
    "greedy_cover_count",
    "cover_scaling_scan",
    "rademacher_exact",
    "rademacher_average",
]

EIG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CoverProfile:
    semi_axes: np.ndarray
    n: int
    sigma: float


def _points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim == 1:
        p = p.reshape(-1, 1)
    if p.shape[0] < 1:
        raise ValueError("need at least one point")
    return p


def cover_profile(points, sigma: float) -> CoverProfile:
    """Semi-axes ``sqrt(mu_i / n)`` of the empirical image of the unit ball, largest first."""
    p = _points(points)
    n = p.shape[0]
    mu = np.linalg.eigvalsh(gram(GaussianKernel(sigma), p))[::-1]
    if mu.min() < -EIG_TOL * n:
        raise ValueError(f"Gram matrix is not positive semi-definite: eigenvalue {mu.min():.3e}")
    mu = np.clip(mu, 0.0, None)
    axes = np.minimum(np.sqrt(mu / n), 1.0)
    return CoverProfile(np.sort(axes)[::-1], n, float(sigma))


def log_cover_bounds(profile: CoverProfile, epsilon: float) -> tuple[float, float]:
    """Volumetric bounds on ``ln N(ellipsoid, epsilon)``.

    lower: ``sum_{a_i > eps} ln(a_i / eps)``; upper: ``sum_{a_i > eps/2} ln(1 + 4 a_i / eps)``.
    """
    if not 0.0 < epsilon <= 1.0:
        raise ValueError(f"epsilon must lie in (0, 1], got {epsilon!r}")
    a = profile.semi_axes
    big = a[a > epsilon]
    mid = a[a > 0.5 * epsilon]
    lower = float(np.sum(np.log(big / epsilon)))
    upper = float(np.sum(np.log1p(4.0 * mid / epsilon)))
    return lower, upper


def greedy_cover_count(points, sigma: float, epsilon: float, grid_per_axis: int = 41) -> int:
    """Size of a greedy epsilon-net of a fine grid inside the empirical ellipsoid.

    Brute-force reference for very small samples (``n <= 3``). The net is
    built in the eigenbasis, where the ellipsoid is axis-aligned.
    """
    p = _points(points)
    if p.shape[0] > 3:
        raise ValueError("the brute-force cover is limited to n <= 3")
    prof = cover_profile(p, sigma)
    a = prof.semi_axes[prof.semi_axes > 1e-12]
    k = a.size
    axes = [np.linspace(-ai, ai, grid_per_axis) for ai in a]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, k)
    grid = grid[np.sum((grid / a) ** 2, axis=1) <= 1.0 + 1e-12]
    uncovered = np.ones(grid.shape[0], dtype=bool)
    count = 0
    eps2 = epsilon * epsilon
    while uncovered.any():
        c = grid[np.argmax(uncovered)]
        uncovered &= np.sum((grid - c) ** 2, axis=1) > eps2
        count += 1
    return count


@dataclass(frozen=True, eq=False)
class ScalingReport:
    """Covering bounds over a (sigma, epsilon) grid and their fitted exponents.

    ``lower`` and ``upper`` have shape ``(len(sigma), len(epsilon))``.
    ``eps_slopes[i]``: slope of log(upper) against log(1/eps) at sigma i.
    ``sigma_slopes[j]``: slope of log(upper) against log(sigma) at eps j.
    Cells with a zero upper bound are left out of the fits; a slope with
    fewer than three usable cells is ``nan``.
    ``local_eps`` and ``local_sigma`` hold finite-difference versions of the
    same slopes at every grid cell; ``rank_correlation`` is their Spearman
    correlation across cells.
    """

    sigma: np.ndarray
    epsilon: np.ndarray
    n: int
    lower: np.ndarray
    upper: np.ndarray
    eps_slopes: np.ndarray
    sigma_slopes: np.ndarray
    local_eps: np.ndarray
    local_sigma: np.ndarray
    rank_correlation: float

    def rows(self):
        for i, s in enumerate(self.sigma):
            for j, e in enumerate(self.epsilon):
                yield float(s), float(e), self.n, float(self.lower[i, j]), float(self.upper[i, j])


def cover_scaling_scan(
    source,
    sigma_grid,
    epsilon_grid,
    n: int | None = None,
    seed: int = 0,
) -> ScalingReport:
    """Covering bounds on a grid, with points drawn from ``source`` or supplied directly."""
    sig = np.sort(np.asarray(sigma_grid, dtype=float))
    eps = np.sort(np.asarray(epsilon_grid, dtype=float))[::-1]
    if sig.size < 4 or eps.size < 4:
        raise ValueError("sigma and epsilon grids need at least 4 points each")
    if np.any(np.diff(sig) <= 0) or np.any(np.diff(eps) >= 0):
        raise ValueError("grid values must be distinct")
    if isinstance(source, SyntheticDistribution):
        if n is None:
            raise ValueError("sample size n is required when drawing points")
        pts = source.sample_marginal(np.random.default_rng(seed), n)
    else:
        pts = _points(source)
    lower = np.empty((sig.size, eps.size))
    upper = np.empty_like(lower)
    for i, s in enumerate(sig):
        prof = cover_profile(pts, s)
        for j, e in enumerate(eps):
            lower[i, j], upper[i, j] = log_cover_bounds(prof, e)
    # cells where the upper bound is 0 (every axis below eps/2) carry no slope information
    with np.errstate(divide="ignore"):
        lu = np.where(upper > 0, np.log(upper), np.nan)
    x_eps = np.log(1.0 / eps)
    x_sig = np.log(sig)
    eps_slopes = np.array([_masked_slope(x_eps, lu[i]) for i in range(sig.size)])
    sigma_slopes = np.array([_masked_slope(x_sig, lu[:, j]) for j in range(eps.size)])
    local_sigma, local_eps = np.gradient(lu, x_sig, x_eps)
    ok = np.isfinite(local_eps) & np.isfinite(local_sigma)
    rho = spearmanr(local_eps[ok], local_sigma[ok]).statistic if ok.sum() >= 3 else math.nan
    return ScalingReport(
        sig, eps, pts.shape[0], lower, upper, eps_slopes, sigma_slopes, local_eps, local_sigma, float(rho)
    )


def _masked_slope(x, y) -> float:
    ok = np.isfinite(y)
    if ok.sum() < 3:
        return math.nan
    return float(linregress(x[ok], y[ok]).slope)


def rademacher_exact(points, sigma: float, signs) -> float:
    """``sup_{||f||_H <= 1} |(1/n) sum s_i f(x_i)| = (1/n) sqrt(s^T K s)``."""
    p = _points(points)
    s = np.asarray(signs, dtype=float).ravel()
    if s.size != p.shape[0]:
        raise ValueError(f"{s.size} signs for {p.shape[0]} points")
    if not np.all(np.abs(s) == 1.0):
        raise ValueError("signs must be +1 or -1")
    K = gram(GaussianKernel(sigma), p)
    return math.sqrt(max(float(s @ K @ s), 0.0)) / p.shape[0]


def rademacher_average(points, sigma: float, trials: int, seed: int) -> Estimate:
    """Monte Carlo mean of :func:`rademacher_exact` over i.i.d. sign vectors, with standard error."""
    if trials < 1:
        raise ValueError("trials must be at least 1")
    p = _points(points)
    n = p.shape[0]
    K = gram(GaussianKernel(sigma), p)
    rng = np.random.default_rng(seed)
    S = rng.choice(np.array([-1.0, 1.0]), size=(trials, n))
    vals = np.sqrt(np.clip(np.einsum("ti,ij,tj->t", S, K, S), 0.0, None)) / n
    se = float(np.std(vals, ddof=1) / math.sqrt(trials)) if trials > 1 else math.nan
    return Estimate(float(np.mean(vals)), se, method="monte_carlo")

