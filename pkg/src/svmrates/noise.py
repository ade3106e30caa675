"""Noise functionals of a distribution and power-law fits of their exponents.

* margin mass ``t -> P_X(|2 eta - 1| <= t)`` and its Tsybakov exponent ``q``;
* the geometric integral ``t -> ∫ |2 eta - 1| exp(-tau^2 / t) dP_X`` and its
  exponent ``alpha`` (the integral behaves like ``C t^(alpha d / 2)``);
* the envelope ``|2 eta - 1| <= c tau^gamma`` near the decision boundary.

Exponents are fitted by least squares on log-log data over a small-t grid;
``math.inf`` stands for the noise-free extreme where the functional vanishes
or decays faster than any power.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sci_integrate
from scipy.stats import linregress

from .distributions import MC_SEED, QUAD_TOL, SyntheticDistribution, integrate_marginal
from .quadrature import Estimate, crossings

__all__ = [
    "PowerFit",
    "NoiseReport",
    "AlphaPrediction",
    "margin_mass",
    "fit_tsybakov",
    "geometric_integral",
    "fit_geometric",
    "envelope_constant",
    "fit_envelope_order",
    "predicted_geometric_exponent",
    "tau_inverse_norm",
    "noise_report",
    "DEFAULT_T_GRID",
]

DEFAULT_T_GRID = tuple(np.logspace(-3, -1, 9))
SLOPE_THRESHOLD = 20.0


@dataclass(frozen=True)
class PowerFit:
    """Result of a log-log least-squares fit ``value ~ constant * t^exponent``."""

    exponent: float
    constant: float
    r2: float
    t_min: float
    t_max: float
    n_used: int


@dataclass(frozen=True)
class AlphaPrediction:
    """Predicted geometric exponent.

    ``strict`` marks the open-range case ``q < 1`` where only exponents
    strictly below ``value`` are guaranteed.
    """

    value: float
    strict: bool = False

    def __float__(self) -> float:
        return float(self.value)


@dataclass(frozen=True)
class NoiseReport:
    q_hat: float
    C_hat: float
    alpha_hat: float
    gamma_hat: float
    c_gamma_hat: float
    diagnostics: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        rec = {
            "q_hat": self.q_hat,
            "C_hat": self.C_hat,
            "alpha_hat": self.alpha_hat,
            "gamma_hat": self.gamma_hat,
            "c_gamma_hat": self.c_gamma_hat,
        }
        rec.update(self.diagnostics)
        return rec


def _power_fit(t: np.ndarray, v: np.ndarray) -> PowerFit:
    res = linregress(np.log(t), np.log(v))
    return PowerFit(
        exponent=float(res.slope),
        constant=float(math.exp(res.intercept)),
        r2=float(res.rvalue**2),
        t_min=float(t.min()),
        t_max=float(t.max()),
        n_used=int(t.size),
    )


def _check_grid(t_grid, minimum: int) -> np.ndarray:
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size < minimum:
        raise ValueError(f"need a 1-d grid of at least {minimum} points, got {t.size}")
    if np.any(t <= 0) or np.any(np.diff(t) <= 0):
        raise ValueError("t grid must be positive and strictly increasing")
    return t


def _level_set_breakpoints(dist, t):
    if dist.d != 1:
        return ()
    return tuple(crossings(lambda s: dist.noise(s.reshape(-1, 1)), -1.0, 1.0, level=t))


def margin_mass(dist: SyntheticDistribution, t: float, tol: float = QUAD_TOL) -> Estimate:
    """``P_X(|2 eta - 1| <= t)``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")
    bps = _level_set_breakpoints(dist, t)
    est = integrate_marginal(dist, lambda x: (dist.noise(x) <= t).astype(float), bps, tol=tol, rtol=1e-10)
    return Estimate(min(max(est.value, 0.0), 1.0), est.error, est.method)


def fit_tsybakov(dist: SyntheticDistribution, t_grid=DEFAULT_T_GRID) -> PowerFit:
    """Fit ``margin_mass(t) ~ C t^q``; ``q = inf`` when every mass vanishes.

    Grid points where the mass is exactly zero are dropped before fitting.
    """
    t = _check_grid(t_grid, 5)
    if t.max() >= 1.0:
        raise ValueError("t grid must lie in (0, 1)")
    mass = np.array([margin_mass(dist, ti).value for ti in t])
    keep = mass > 0
    if not keep.any():
        return PowerFit(math.inf, 1.0, 1.0, float(t.min()), float(t.max()), 0)
    if keep.sum() < 2:
        raise ValueError("fewer than two grid points carry positive margin mass")
    return _power_fit(t[keep], mass[keep])


def geometric_integral(dist: SyntheticDistribution, t: float, tol: float = 0.0, rtol: float = 1e-10) -> Estimate:
    """``∫ |2 eta - 1| exp(-tau^2 / t) dP_X``."""
    if not t > 0:
        raise ValueError(f"t must be positive, got {t!r}")

    def integrand(x):
        return dist.noise(x) * np.exp(-dist.tau(x) ** 2 / t)

    return integrate_marginal(dist, integrand, tol=tol, rtol=rtol)


def fit_geometric(
    dist: SyntheticDistribution,
    t_grid=DEFAULT_T_GRID,
    slope_threshold: float = SLOPE_THRESHOLD,
) -> PowerFit:
    """Fit ``geometric_integral(t) ~ C t^(alpha d / 2)``; the exponent reported is alpha.

    The decay is declared faster than any power (alpha = inf) when every
    integral vanishes or the log-log slope over the three smallest grid
    points exceeds ``slope_threshold``.
    """
    t = _check_grid(t_grid, 3)
    vals = np.array([geometric_integral(dist, ti).value for ti in t])
    keep = vals > 0
    if not keep.any():
        return PowerFit(math.inf, 0.0, 1.0, float(t.min()), float(t.max()), 0)
    if keep.sum() < 3:
        raise ValueError("fewer than three grid points give a positive geometric integral")
    fit = _power_fit(t[keep], vals[keep])
    local = _power_fit(t[keep][:3], vals[keep][:3])
    if local.exponent > slope_threshold:
        return PowerFit(math.inf, 0.0, fit.r2, fit.t_min, fit.t_max, fit.n_used)
    return PowerFit(2.0 * fit.exponent / dist.d, fit.constant, fit.r2, fit.t_min, fit.t_max, fit.n_used)


def _grid_points(dist, m: int):
    if dist.d == 1:
        return np.linspace(-1.0, 1.0, m).reshape(-1, 1)
    return dist.sample_marginal(np.random.default_rng(MC_SEED), m)


def envelope_constant(dist: SyntheticDistribution, gamma: float, n_grid: int = 20001, exclusion: float = 1e-4) -> float:
    """``max |2 eta - 1| / tau^gamma`` over a dense grid of support points with ``tau > exclusion``."""
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    x = _grid_points(dist, n_grid)
    x = x[dist.marginal_density(x) > 0]
    tau = dist.tau(x)
    keep = tau > exclusion
    if not keep.any():
        raise ValueError("no grid points outside the exclusion radius")
    return float(np.max(dist.noise(x[keep]) / tau[keep] ** gamma))


def fit_envelope_order(
    dist: SyntheticDistribution, tau_range=(1e-3, 1e-1), n_grid: int = 20001
) -> PowerFit:
    """Fit ``|2 eta - 1| ~ c tau^gamma`` on support points with tau in ``tau_range``.

    When the support stays away from the boundary (no points in range) any
    order works and ``gamma = inf`` is reported.
    """
    x = _grid_points(dist, n_grid)
    x = x[dist.marginal_density(x) > 0]
    tau = dist.tau(x)
    noise = dist.noise(x)
    keep = (tau >= tau_range[0]) & (tau <= tau_range[1]) & (noise > 0)
    if keep.sum() < 3:
        return PowerFit(math.inf, 1.0, 1.0, tau_range[0], tau_range[1], int(keep.sum()))
    return _power_fit(tau[keep], noise[keep])


def predicted_geometric_exponent(q: float, gamma: float, d: int) -> AlphaPrediction:
    """Geometric exponent implied by Tsybakov exponent ``q`` and an envelope of order ``gamma``.

    ``(q + 1) gamma / d``, attained for ``q >= 1``; for ``q < 1`` the value is
    an open upper limit and the result is flagged ``strict``.
    """
    if not gamma > 0 or d < 1 or q < 0:
        raise ValueError("need q >= 0, gamma > 0 and d >= 1")
    return AlphaPrediction((q + 1.0) * gamma / d, strict=q < 1.0)


def tau_inverse_norm(dist: SyntheticDistribution, p: float) -> float:
    """``(∫ tau^(-p) |2 eta - 1| dP_X)^(1/p)``, or ``inf`` when the integral diverges.

    One-dimensional families only; the integrable singularity at the boundary
    is handled by extrapolating adaptive quadrature.
    """
    if dist.d != 1:
        raise ValueError("tau_inverse_norm is implemented for d = 1")
    if not p > 0:
        raise ValueError(f"p must be positive, got {p!r}")

    def h(s):
        x = np.array([[s]])
        tau = float(dist.tau(x)[0])
        dens = float(dist.marginal_density(x)[0])
        if dens == 0.0:
            return 0.0
        return float(dist.noise(x)[0]) * dens * tau ** (-p)

    bps = sorted(set(dist.breakpoints) | {-1.0, 1.0})
    total = 0.0
    for a, b in zip(bps[:-1], bps[1:]):
        with warnings.catch_warnings():
            warnings.simplefilter("error", sci_integrate.IntegrationWarning)
            try:
                val, err = sci_integrate.quad(h, a, b, limit=500, epsabs=0.0, epsrel=1e-10)
            except (sci_integrate.IntegrationWarning, ZeroDivisionError, OverflowError):
                return math.inf
        if not math.isfinite(val) or err > 1e-4 * max(abs(val), 1.0):
            return math.inf
        total += val
    return total ** (1.0 / p)


def noise_report(
    dist: SyntheticDistribution,
    t_grid=DEFAULT_T_GRID,
    geo_grid=DEFAULT_T_GRID,
    gamma: float | None = None,
) -> NoiseReport:
    """Fit every noise exponent of ``dist`` and collect the diagnostics."""
    tsy = fit_tsybakov(dist, t_grid)
    geo = fit_geometric(dist, geo_grid)
    env = fit_envelope_order(dist)
    g = gamma if gamma is not None else env.exponent
    c_gamma = envelope_constant(dist, g) if math.isfinite(g) else math.nan
    diag = {
        "tsybakov_r2": tsy.r2,
        "tsybakov_t_min": tsy.t_min,
        "tsybakov_t_max": tsy.t_max,
        "geometric_r2": geo.r2,
        "geometric_constant": geo.constant,
        "geometric_t_min": geo.t_min,
        "geometric_t_max": geo.t_max,
        "envelope_r2": env.r2,
        "envelope_gamma_used": g,
    }
    return NoiseReport(tsy.exponent, tsy.constant, geo.exponent, env.exponent, c_gamma, diag)
