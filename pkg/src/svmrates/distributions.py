"""Synthetic binary classification problems with analytic regression functions.

Every family knows its conditional probability ``eta(x) = P(y = 1 | x)``, the
marginal density on the domain ``X`` (the interval ``[-1, 1]`` for ``d = 1``,
the closed unit ball otherwise), the distance ``tau(x)`` from ``x`` to the
opposite class, and the noise exponents it was built to have. Population
risks are computed by adaptive quadrature for ``d = 1`` and by stratified
Monte Carlo for ``d >= 2``.

Points are always passed as ``(m, d)`` arrays. Decision functions ``f`` are
callables mapping such an array to ``m`` reals; ``sign(0)`` is taken to be
``+1`` throughout.
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import betainc, gamma as gamma_fn

from .quadrature import Estimate, crossings, integrate, stratified_mc

DecisionFunction = Callable[[np.ndarray], np.ndarray]

__all__ = [
    "KnownExponents",
    "SyntheticDistribution",
    "PowerMargin",
    "WeightedPowerMargin",
    "Separated",
    "TrainingSet",
    "make_power_margin",
    "make_weighted_power_margin",
    "make_separated",
    "make_distribution",
    "sample",
    "ball_volume",
    "sign",
    "classification_risk",
    "bayes_risk",
    "excess_risk",
    "hinge_risk",
    "hinge_risk_min",
    "excess_hinge_risk",
    "excess_hinge_risk_zhang",
    "integrate_marginal",
]

QUAD_TOL = 1e-8
MC_CELLS = {2: 256, 3: 40}
MC_SEED = 20070401


def sign(v: np.ndarray) -> np.ndarray:
    """Sign with the convention ``sign(0) = 1``."""
    return np.where(np.asarray(v) >= 0.0, 1.0, -1.0)


def as_points(x, d: int) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if d == 1 and x.ndim <= 1:
        return x.reshape(-1, 1)
    x = np.atleast_2d(x)
    if x.shape[1] != d:
        raise ValueError(f"expected points of dimension {d}, got shape {x.shape}")
    return x


def ball_volume(d: int) -> float:
    """Lebesgue volume of the closed Euclidean unit ball in R^d (2 for d = 1)."""
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1)


@dataclass(frozen=True)
class KnownExponents:
    """Exponents and constants a family was constructed to have.

    ``math.inf`` stands for the extended values q = inf and alpha = inf.
    """

    q: float
    tsybakov_constant: float
    alpha: float
    gamma: float | None = None
    c_gamma: float | None = None
    geometric_constant: float | None = None


@dataclass(frozen=True)
class SyntheticDistribution:
    """Base class; subclasses implement the analytic pieces."""

    d: int = 1

    name = "abstract"

    @property
    def params(self) -> dict[str, Any]:
        return {}

    @property
    def known_exponents(self) -> KnownExponents | None:
        return None

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points of [-1, 1] where eta or the density is not smooth (d = 1)."""
        return (0.0,)

    def eta(self, x) -> np.ndarray:
        raise NotImplementedError

    def marginal_density(self, x) -> np.ndarray:
        raise NotImplementedError

    def sample_marginal(self, rng: np.random.Generator, n: int) -> np.ndarray:
        raise NotImplementedError

    def tau(self, x) -> np.ndarray:
        raise NotImplementedError

    def noise(self, x) -> np.ndarray:
        """``|2 eta(x) - 1|``."""
        return np.abs(2.0 * self.eta(x) - 1.0)

    def class_label(self, x) -> np.ndarray:
        """+1 on X_1, -1 on X_{-1}, 0 on X_0."""
        return np.sign(2.0 * self.eta(x) - 1.0)

    def bayes_decision(self, x) -> np.ndarray:
        """``sign(2 eta - 1)``, also a minimiser of the hinge risk."""
        return sign(2.0 * self.eta(x) - 1.0)

    def describe(self) -> str:
        parts = [f"family={self.name}", f"d={self.d}"]
        parts += [f"{k}={v!r}" for k, v in self.params.items()]
        return " ".join(parts)


@dataclass(frozen=True)
class PowerMargin(SyntheticDistribution):
    """Uniform marginal on [-1, 1] with ``|2 eta(x) - 1| = |x|^gamma``."""

    gamma: float = 1.0
    name = "power_margin"

    @property
    def params(self):
        return {"gamma": self.gamma}

    @property
    def known_exponents(self):
        g = self.gamma
        return KnownExponents(
            q=1.0 / g,
            tsybakov_constant=1.0,
            alpha=1.0 + g,
            gamma=g,
            c_gamma=1.0,
            geometric_constant=0.5 * gamma_fn(0.5 * (g + 1.0)),
        )

    def eta(self, x):
        t = as_points(x, 1)[:, 0]
        return 0.5 * (1.0 + np.sign(t) * np.abs(t) ** self.gamma)

    def marginal_density(self, x):
        t = as_points(x, 1)[:, 0]
        return np.where(np.abs(t) <= 1.0, 0.5, 0.0)

    def sample_marginal(self, rng, n):
        return rng.uniform(-1.0, 1.0, size=(n, 1))

    def tau(self, x):
        return np.abs(as_points(x, 1)[:, 0])


@dataclass(frozen=True)
class WeightedPowerMargin(SyntheticDistribution):
    """Power-margin eta with marginal density ``(gamma q / 2) |x|^(gamma q - 1)``.

    The margin mass is ``P_X(|2 eta - 1| <= t) = t^q`` for ``t <= 1``, so the
    Tsybakov exponent ``q`` and the envelope order ``gamma`` can be chosen
    independently.
    """

    gamma: float = 1.0
    q: float = 1.0
    name = "weighted_power_margin"

    @property
    def params(self):
        return {"gamma": self.gamma, "q": self.q}

    @property
    def known_exponents(self):
        g, q = self.gamma, self.q
        s = g * (q + 1.0)
        return KnownExponents(
            q=q,
            tsybakov_constant=1.0,
            alpha=s,
            gamma=g,
            c_gamma=1.0,
            geometric_constant=0.5 * g * q * gamma_fn(0.5 * s),
        )

    def eta(self, x):
        t = as_points(x, 1)[:, 0]
        return 0.5 * (1.0 + np.sign(t) * np.abs(t) ** self.gamma)

    def marginal_density(self, x):
        t = np.abs(as_points(x, 1)[:, 0])
        k = self.gamma * self.q
        with np.errstate(divide="ignore"):
            dens = 0.5 * k * t ** (k - 1.0)
        return np.where(t <= 1.0, dens, 0.0)

    def sample_marginal(self, rng, n):
        u = rng.random(n)
        s = rng.random(n)
        r = u ** (1.0 / (self.gamma * self.q))
        return np.where(s < 0.5, -r, r).reshape(n, 1)

    def tau(self, x):
        return np.abs(as_points(x, 1)[:, 0])


@dataclass(frozen=True)
class Separated(SyntheticDistribution):
    """Noise-free classes ``{x_1 <= -delta/2}`` and ``{x_1 >= delta/2}`` of the ball.

    eta is 1 on the half-ball ``x_1 > 0`` and 0 on ``x_1 < 0``; the marginal is
    uniform on the part of the unit ball with ``|x_1| >= delta / 2``, so the
    classes are at distance ``delta`` and ``tau >= delta / 2`` on the support.
    """

    delta: float = 0.5
    name = "separated"

    @property
    def params(self):
        return {"delta": self.delta}

    @property
    def known_exponents(self):
        return KnownExponents(q=math.inf, tsybakov_constant=1.0, alpha=math.inf)

    @property
    def breakpoints(self):
        h = 0.5 * self.delta
        return (-h, 0.0, h)

    @property
    def support_volume(self) -> float:
        h = 0.5 * self.delta
        if self.d == 1:
            return 2.0 - self.delta
        k = 0.5 * (self.d - 1)
        # volume of the slab |x_1| < h inside the ball, via u = s^2
        slab_1d = beta_fn(0.5, k + 1.0) * betainc(0.5, k + 1.0, h * h)
        return ball_volume(self.d) - ball_volume(self.d - 1) * slab_1d

    def eta(self, x):
        x1 = as_points(x, self.d)[:, 0]
        return np.where(x1 > 0.0, 1.0, np.where(x1 < 0.0, 0.0, 0.5))

    def marginal_density(self, x):
        x = as_points(x, self.d)
        inside = (np.abs(x[:, 0]) >= 0.5 * self.delta) & (np.sum(x * x, axis=1) <= 1.0)
        return np.where(inside, 1.0 / self.support_volume, 0.0)

    def sample_marginal(self, rng, n):
        h = 0.5 * self.delta
        if self.d == 1:
            r = h + (1.0 - h) * rng.random(n)
            s = rng.random(n)
            return np.where(s < 0.5, -r, r).reshape(n, 1)
        out = np.empty((0, self.d))
        while out.shape[0] < n:
            m = 2 * (n - out.shape[0]) + 16
            z = rng.standard_normal((m, self.d))
            z /= np.linalg.norm(z, axis=1, keepdims=True)
            z *= rng.random((m, 1)) ** (1.0 / self.d)
            out = np.vstack([out, z[np.abs(z[:, 0]) >= h]])
        return out[:n]

    def tau(self, x):
        return np.abs(as_points(x, self.d)[:, 0])


def make_power_margin(gamma: float) -> PowerMargin:
    """Uniform marginal on [-1, 1] and ``eta(x) = (1 + sign(x)|x|^gamma) / 2``.

    Tsybakov exponent ``1/gamma``, envelope of order ``gamma`` with constant 1,
    geometric noise exponent ``1 + gamma``.
    """
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    return PowerMargin(d=1, gamma=float(gamma))


def make_weighted_power_margin(gamma: float, q: float) -> WeightedPowerMargin:
    if not gamma > 0 or not q > 0:
        raise ValueError(f"gamma and q must be positive, got gamma={gamma!r}, q={q!r}")
    return WeightedPowerMargin(d=1, gamma=float(gamma), q=float(q))


def make_separated(delta: float, d: int = 1) -> Separated:
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta!r}")
    if int(d) != d or d < 1:
        raise ValueError(f"dimension must be a positive integer, got {d!r}")
    return Separated(d=int(d), delta=float(delta))


_FACTORIES = {
    "power_margin": lambda p: make_power_margin(p["gamma"]),
    "weighted_power_margin": lambda p: make_weighted_power_margin(p["gamma"], p["q"]),
    "separated": lambda p: make_separated(p["delta"], int(p.get("d", 1))),
}


def make_distribution(name: str, **params) -> SyntheticDistribution:
    """Build a family by name, e.g. ``make_distribution("separated", delta=0.5, d=2)``."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown family {name!r}; expected one of {sorted(_FACTORIES)}") from None
    return factory(params)


@dataclass(frozen=True)
class TrainingSet:
    x: np.ndarray
    y: np.ndarray
    seed: int
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.y.shape[0])

    @property
    def d(self) -> int:
        return int(self.x.shape[1])

    def __eq__(self, other):
        if not isinstance(other, TrainingSet):
            return NotImplemented
        return (
            self.seed == other.seed
            and np.array_equal(self.x, other.x)
            and np.array_equal(self.y, other.y)
        )

    __hash__ = None


def sample(dist: SyntheticDistribution, n: int, seed: int) -> TrainingSet:
    """Draw ``n`` i.i.d. labelled points; identical seeds give identical sets."""
    if n < 1:
        raise ValueError(f"sample size must be at least 1, got {n}")
    rng = np.random.default_rng(seed)
    x = dist.sample_marginal(rng, n)
    u = rng.random(n)
    y = np.where(u < dist.eta(x), 1, -1).astype(np.int64)
    meta = {"family": dist.name, "d": dist.d, **dist.params}
    return TrainingSet(x=x, y=y, seed=int(seed), meta=meta)


# ---------------------------------------------------------------------------
# population integrals


def integrate_marginal(
    dist: SyntheticDistribution,
    integrand: Callable[[np.ndarray], np.ndarray],
    extra_breakpoints=(),
    tol: float = QUAD_TOL,
    rtol: float = 0.0,
    mc_cells: int | None = None,
    mc_seed: int = MC_SEED,
) -> Estimate:
    """``∫ integrand(x) P_X(dx)`` with ``integrand`` taking ``(m, d)`` points."""
    if dist.d == 1:

        def h(t):
            pts = t.reshape(-1, 1)
            return integrand(pts) * dist.marginal_density(pts)

        bps = tuple(dist.breakpoints) + tuple(extra_breakpoints)
        return integrate(h, -1.0, 1.0, breakpoints=bps, atol=tol, rtol=rtol)
    cells = mc_cells or MC_CELLS.get(dist.d, max(4, int(round(60000 ** (1.0 / dist.d)))))

    def hd(pts):
        dens = dist.marginal_density(pts)
        out = np.zeros(pts.shape[0])
        on = dens > 0
        if on.any():
            out[on] = integrand(pts[on]) * dens[on]
        return out

    return stratified_mc(hd, dist.d, cells, np.random.default_rng(mc_seed))


def _level_breakpoints(dist, f, levels):
    if dist.d != 1:
        return ()
    g = lambda t: np.asarray(f(t.reshape(-1, 1)), dtype=float)
    pts = []
    for lv in levels:
        pts.extend(crossings(g, -1.0, 1.0, level=lv).tolist())
    return tuple(pts)


def classification_risk(dist: SyntheticDistribution, f: DecisionFunction, tol: float = QUAD_TOL) -> Estimate:
    """``P(sign f(x) != y)``."""
    bps = _level_breakpoints(dist, f, (0.0,))

    def integrand(x):
        e = dist.eta(x)
        return np.where(sign(f(x)) < 0, e, 1.0 - e)

    return integrate_marginal(dist, integrand, bps, tol=tol)


def bayes_risk(dist: SyntheticDistribution, tol: float = QUAD_TOL) -> Estimate:
    def integrand(x):
        e = dist.eta(x)
        return np.minimum(e, 1.0 - e)

    return integrate_marginal(dist, integrand, tol=tol)


def excess_risk(dist: SyntheticDistribution, f: DecisionFunction, tol: float = QUAD_TOL) -> Estimate:
    """``R_P(f) - R_P``, evaluated as the integral of ``|2 eta - 1|`` over the
    set where ``sign f`` disagrees with the Bayes decision.

    This equals the difference of the two risks exactly and has a
    nonnegative integrand; values are clamped below at ``-tol``.
    """
    bps = _level_breakpoints(dist, f, (0.0,))

    def integrand(x):
        wrong = sign(f(x)) != dist.bayes_decision(x)
        return np.where(wrong, dist.noise(x), 0.0)

    est = integrate_marginal(dist, integrand, bps, tol=tol)
    return Estimate(max(est.value, -tol), est.error, est.method)


def _hinge_pointwise(e, fx):
    return e * np.maximum(0.0, 1.0 - fx) + (1.0 - e) * np.maximum(0.0, 1.0 + fx)


def hinge_risk(dist: SyntheticDistribution, f: DecisionFunction, tol: float = QUAD_TOL) -> Estimate:
    bps = _level_breakpoints(dist, f, (-1.0, 1.0))
    return integrate_marginal(dist, lambda x: _hinge_pointwise(dist.eta(x), f(x)), bps, tol=tol)


def hinge_risk_min(dist: SyntheticDistribution, tol: float = QUAD_TOL) -> Estimate:
    """Smallest hinge risk, ``1 - ∫ |2 eta - 1| dP_X``, attained by ``sign(2 eta - 1)``."""
    est = integrate_marginal(dist, dist.noise, tol=tol)
    return Estimate(1.0 - est.value, est.error, est.method)


def excess_hinge_risk(dist: SyntheticDistribution, f: DecisionFunction, tol: float = QUAD_TOL) -> Estimate:
    """Direct evaluation of ``R_{l,P}(f) - R_{l,P}`` from the pointwise excess.

    The pointwise excess ``E[l(y, f(x)) | x] - min_t E[l(y, t) | x]`` is
    integrated, which is the same quantity as the difference of the two
    risks but without cancellation.
    """
    bps = _level_breakpoints(dist, f, (-1.0, 1.0))

    def integrand(x):
        e = dist.eta(x)
        return _hinge_pointwise(e, f(x)) - (1.0 - np.abs(2.0 * e - 1.0))

    return integrate_marginal(dist, integrand, bps, tol=tol)


def excess_hinge_risk_zhang(
    dist: SyntheticDistribution,
    f: DecisionFunction,
    tol: float = QUAD_TOL,
    check_grid: int = 4097,
) -> Estimate:
    """``∫ |2 eta - 1| |f - f_P| dP_X``, valid for ``f`` mapping into [-1, 1].

    Raises ``ValueError`` when ``|f|`` exceeds ``1 + tol`` on a check grid.
    """
    if dist.d == 1:
        grid = np.linspace(-1.0, 1.0, check_grid).reshape(-1, 1)
    else:
        grid = dist.sample_marginal(np.random.default_rng(MC_SEED), check_grid)
    sup = float(np.max(np.abs(f(grid))))
    if sup > 1.0 + tol:
        raise ValueError(f"identity route needs f with values in [-1, 1]; sup |f| = {sup:.6g}")

    def integrand(x):
        return dist.noise(x) * np.abs(f(x) - dist.bayes_decision(x))

    return integrate_marginal(dist, integrand, _level_breakpoints(dist, f, (-1.0, 1.0)), tol=tol)
