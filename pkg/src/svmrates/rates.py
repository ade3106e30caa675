"""Learning-rate schedules, rate experiments and variance-bound checks.

The exponent ``beta`` of the excess-risk rate ``n^(-beta)`` depends on the
Tsybakov exponent ``q`` and the geometric exponent ``alpha``. The matching
parameter schedule is ``lam_n = n^(-beta (alpha + 1) / alpha)`` and
``sigma_n = n^(beta / (alpha d))``, which is the coupling
``sigma = lam^(-1 / ((alpha + 1) d))`` evaluated along ``lam_n``.

Rate experiments draw training sets per ``(n, trial)``, train an SVM at
``(lam_n, sigma_n)`` and record the exact excess classification risk. The
fitted rate is the negated log-log slope of the per-``n`` medians.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import linregress

from .approximation import approx_error_witness
from .distributions import (
    QUAD_TOL,
    SyntheticDistribution,
    excess_hinge_risk,
    excess_risk,
    integrate_marginal,
    sample,
)
from .kernel import GaussianKernel, KernelExpansion
from .noise import margin_mass
from .solver import SolverError, SvmProblem, norm_bound_check, train

__all__ = [
    "RateSchedule",
    "RowResult",
    "ExperimentReport",
    "RateFit",
    "VarianceCheck",
    "beta",
    "make_schedule",
    "schedule",
    "row_seed",
    "run_experiment",
    "fit_rate",
    "pointwise_variance_slack",
    "lorentz_norm",
    "variance_bound_check",
    "regularized_variance_check",
]


def beta(q: float, alpha: float) -> float:
    """Rate exponent for Tsybakov exponent ``q`` in [0, inf] and geometric exponent ``alpha`` > 0.

    ``alpha / (2 alpha + 1)`` when ``alpha <= (q + 2) / (2q)`` (always for
    ``q = 0``), else ``2 alpha (q + 1) / (2 alpha (q + 2) + 3q + 4)``. For
    ``q = inf`` the threshold is 1/2 and the second branch is
    ``2 alpha / (2 alpha + 3)``. ``alpha = inf`` gives the limits of these
    expressions.
    """
    if not alpha > 0:
        raise ValueError(f"alpha must be positive, got {alpha!r}")
    if q < 0:
        raise ValueError(f"q must be nonnegative, got {q!r}")
    if q == 0:
        return 0.5 if math.isinf(alpha) else alpha / (2.0 * alpha + 1.0)
    threshold = 0.5 if math.isinf(q) else (q + 2.0) / (2.0 * q)
    if alpha <= threshold:
        return alpha / (2.0 * alpha + 1.0)
    if math.isinf(q):
        return 1.0 if math.isinf(alpha) else 2.0 * alpha / (2.0 * alpha + 3.0)
    if math.isinf(alpha):
        return (q + 1.0) / (q + 2.0)
    return 2.0 * alpha * (q + 1.0) / (2.0 * alpha * (q + 2.0) + 3.0 * q + 4.0)


@dataclass(frozen=True)
class RateSchedule:
    """Parameter schedule ``n -> (lam_n, sigma_n)``.

    ``lambda_exponent`` and ``sigma_exponent`` override the derived exponents
    (``lam_n = n^(-lambda_exponent)``, ``sigma_n = n^sigma_exponent``) for
    user-supplied schedules. In the infinite-``alpha`` mode ``sigma`` is the
    constant ``fixed_sigma``.
    """

    q: float
    alpha: float
    d: int
    beta: float
    fixed_sigma: float | None = None
    lambda_exponent: float | None = None
    sigma_exponent: float | None = None

    def lam_exponent(self) -> float:
        if self.lambda_exponent is not None:
            return self.lambda_exponent
        if math.isinf(self.alpha):
            return self.beta
        return self.beta * (self.alpha + 1.0) / self.alpha

    def sig_exponent(self) -> float:
        if self.sigma_exponent is not None:
            return self.sigma_exponent
        if self.fixed_sigma is not None:
            return 0.0
        return self.beta / (self.alpha * self.d)

    def lambda_of_n(self, n: int) -> float:
        return float(n) ** (-self.lam_exponent())

    def sigma_of_n(self, n: int) -> float:
        if self.fixed_sigma is not None and self.sigma_exponent is None:
            return self.fixed_sigma
        return float(n) ** self.sig_exponent()


def make_schedule(
    q: float,
    alpha: float,
    d: int,
    fixed_sigma: float | None = None,
    lambda_exponent: float | None = None,
    sigma_exponent: float | None = None,
) -> RateSchedule:
    """Schedule for the given exponents; ``alpha = inf`` uses a constant ``sigma > 2 sqrt(d)``."""
    b = beta(q, alpha)
    if math.isinf(alpha):
        floor = 2.0 * math.sqrt(d)
        fixed_sigma = floor + 1.0 if fixed_sigma is None else float(fixed_sigma)
        if not fixed_sigma > floor:
            raise ValueError(f"constant sigma must exceed 2 sqrt(d) = {floor:.6g}, got {fixed_sigma!r}")
    elif fixed_sigma is not None:
        raise ValueError("a constant sigma is only used when alpha is infinite")
    return RateSchedule(q, alpha, d, b, fixed_sigma, lambda_exponent, sigma_exponent)


def schedule(n: int, q: float, alpha: float, d: int) -> tuple[float, float]:
    """``(lam_n, sigma_n)`` of :func:`make_schedule`."""
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    s = make_schedule(q, alpha, d)
    return s.lambda_of_n(n), s.sigma_of_n(n)


# ---------------------------------------------------------------------------
# experiments


def row_seed(base_seed: int, n: int, trial: int) -> int:
    """64-bit seed for one ``(n, trial)`` row, hashed by ``numpy.random.SeedSequence``."""
    state = np.random.SeedSequence([int(base_seed), int(n), int(trial)]).generate_state(2, np.uint32)
    return int(state[0]) << 32 | int(state[1])


@dataclass(frozen=True)
class RowResult:
    n: int
    trial: int
    seed: int
    excess_risk: float
    excess_risk_err: float
    excess_hinge: float
    rkhs_norm: float
    lam: float
    sigma: float
    offset: float
    certificate: float
    norm_slack: float
    status: str = "ok"
    wall_time: float = field(default=0.0, compare=False)


DATA_COLUMNS = (
    "n",
    "trial",
    "seed",
    "excess_risk",
    "excess_risk_err",
    "excess_hinge",
    "rkhs_norm",
    "lam",
    "sigma",
    "offset",
    "certificate",
    "norm_slack",
    "status",
)


@dataclass(frozen=True, eq=False)
class ExperimentReport:
    family: str
    params: dict
    schedule: RateSchedule
    with_offset: bool
    base_seed: int
    rows: tuple[RowResult, ...]

    def ok_rows(self) -> list[RowResult]:
        return [r for r in self.rows if r.status == "ok"]

    def n_values(self) -> list[int]:
        return sorted({r.n for r in self.rows})

    def medians(self) -> dict[int, float]:
        out = {}
        for n in self.n_values():
            vals = [r.excess_risk for r in self.ok_rows() if r.n == n]
            out[n] = float(np.median(vals)) if vals else math.nan
        return out

    def data_rows(self):
        for r in self.rows:
            d = asdict(r)
            yield tuple(d[c] for c in DATA_COLUMNS)


def _run_row(args) -> RowResult:
    dist, sched, n, trial, base_seed, with_offset, tol_opt = args
    seed = row_seed(base_seed, n, trial)
    lam = sched.lambda_of_n(n)
    sigma = sched.sigma_of_n(n)
    t0 = time.perf_counter()
    ts = sample(dist, n, seed)
    try:
        sol = train(SvmProblem(ts, lam, GaussianKernel(sigma), with_offset), tol_opt)
    except SolverError as exc:
        nan = math.nan
        return RowResult(n, trial, seed, nan, nan, nan, nan, lam, sigma, nan, exc.certificate, nan,
                         f"solver_failure: {exc}", time.perf_counter() - t0)
    f = sol.expansion
    ex = excess_risk(dist, f)
    exh = excess_hinge_risk(dist, f)
    return RowResult(
        n=n,
        trial=trial,
        seed=seed,
        excess_risk=ex.value,
        excess_risk_err=ex.error,
        excess_hinge=exh.value,
        rkhs_norm=sol.rkhs_norm(),
        lam=lam,
        sigma=sigma,
        offset=f.offset,
        certificate=sol.certificate,
        norm_slack=norm_bound_check(sol).slack,
        wall_time=time.perf_counter() - t0,
    )


def run_experiment(
    dist: SyntheticDistribution,
    sched: RateSchedule,
    n_grid,
    trials: int,
    base_seed: int,
    with_offset: bool = False,
    jobs: int = 1,
    tol_opt: float | None = None,
) -> ExperimentReport:
    """Train and evaluate one SVM per ``(n, trial)``; rows are returned sorted by ``(n, trial)``.

    A solver failure is recorded in the row's ``status`` and does not stop
    the run. With ``jobs > 1`` rows run in worker processes; the result does
    not depend on ``jobs``.
    """
    n_grid = [int(n) for n in n_grid]
    if any(b <= a for a, b in zip(n_grid, n_grid[1:])):
        raise ValueError("n grid must be strictly increasing")
    if trials < 5:
        raise ValueError(f"need at least 5 trials, got {trials}")
    tasks = [(dist, sched, n, t, base_seed, with_offset, tol_opt) for n in n_grid for t in range(trials)]
    # largest problems first keeps the worker pool busy until the end
    tasks.sort(key=lambda a: -a[2])
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_run_row, tasks))
    else:
        rows = [_run_row(t) for t in tasks]
    rows.sort(key=lambda r: (r.n, r.trial))
    return ExperimentReport(dist.name, dict(dist.params), sched, with_offset, int(base_seed), tuple(rows))


@dataclass(frozen=True)
class RateFit:
    beta_hat: float
    ci_low: float
    ci_high: float
    exact_learning: bool
    n_used: tuple[int, ...]
    medians: tuple[float, ...]


def _slope(ns, meds) -> float:
    return -float(linregress(np.log(ns), np.log(meds)).slope)


def fit_rate(report_or_rows, n_boot: int = 2000, seed: int = 0, level: float = 0.95) -> RateFit:
    """Negated log-log slope of median excess risk against ``n``, with a bootstrap interval.

    Accepts an :class:`ExperimentReport` or an iterable of ``(n, excess)``
    pairs. All-zero excess is reported as exact learning without a slope.
    """
    if isinstance(report_or_rows, ExperimentReport):
        pairs = [(r.n, r.excess_risk) for r in report_or_rows.ok_rows()]
    else:
        pairs = [(int(n), float(e)) for n, e in report_or_rows]
    by_n: dict[int, list[float]] = {}
    for n, e in pairs:
        by_n.setdefault(n, []).append(max(e, 0.0))
    ns = np.array(sorted(by_n))
    groups = [np.array(by_n[n]) for n in ns]
    meds = np.array([np.median(g) for g in groups])
    if np.all(np.concatenate(groups) == 0.0):
        return RateFit(math.nan, math.nan, math.nan, True, tuple(int(n) for n in ns), tuple(meds))
    pos = meds > 0
    if pos.sum() < 4:
        raise ValueError(f"need at least 4 sample sizes with positive median excess risk, got {int(pos.sum())}")
    beta_hat = _slope(ns[pos], meds[pos])
    rng = np.random.default_rng(seed)
    boots = []
    for _ in range(n_boot):
        bm = np.array([np.median(rng.choice(g, size=g.size, replace=True)) for g in groups])
        ok = bm > 0
        if ok.sum() >= 2:
            boots.append(_slope(ns[ok], bm[ok]))
    lo, hi = np.quantile(boots, [(1 - level) / 2, (1 + level) / 2]) if boots else (math.nan, math.nan)
    return RateFit(beta_hat, float(lo), float(hi), False, tuple(int(n) for n in ns[pos]), tuple(meds[pos]))


# ---------------------------------------------------------------------------
# variance bounds


def _hinge(y, t):
    return np.maximum(0.0, 1.0 - y * t)


def pointwise_variance_slack(p: float, t: float) -> float:
    """``(|t| + 2/|2p - 1|) m(p, t) - v(p, t)`` for the hinge loss.

    ``m`` and ``v`` are the conditional mean and second moment of
    ``l(y, t) - l(y, s)`` given ``P(y = 1) = p``, where ``s = sign(2p - 1)``
    minimises the conditional hinge risk.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p!r}")
    if p == 0.5:
        raise ValueError("p = 1/2 is excluded")
    s = 1.0 if p > 0.5 else -1.0
    g_pos = _hinge(1.0, t) - _hinge(1.0, s)
    g_neg = _hinge(-1.0, t) - _hinge(-1.0, s)
    v = p * g_pos**2 + (1.0 - p) * g_neg**2
    m = p * g_pos + (1.0 - p) * g_neg
    return float((abs(t) + 2.0 / abs(2.0 * p - 1.0)) * m - v)


def lorentz_norm(dist: SyntheticDistribution, q: float | None = None, t_grid=None) -> float:
    """Weak-L_q quasi-norm ``sup_{s >= 1} s * P_X(|2 eta - 1| <= 1/s)^(1/q)`` of ``1 / |2 eta - 1|``.

    Power-margin families with unit Tsybakov constant have the closed form
    1; otherwise the supremum is taken over ``t_grid`` (default ``s`` in
    ``[1, 1e4]``). For ``q = inf`` the value is the essential supremum of
    ``1 / |2 eta - 1|``.
    """
    known = dist.known_exponents
    q = known.q if q is None else q
    if known is not None and q == known.q and known.gamma is not None and known.tsybakov_constant == 1.0:
        return 1.0
    if math.isinf(q):
        s = np.logspace(0, 4, 81) if t_grid is None else np.asarray(t_grid, dtype=float)
        masses = np.array([margin_mass(dist, 1.0 / si).value for si in s])
        # largest s whose level set still carries mass
        return float(s[masses > 0].max()) if np.any(masses > 0) else 1.0
    s = np.logspace(0, 4, 81) if t_grid is None else np.asarray(t_grid, dtype=float)
    vals = [si * margin_mass(dist, 1.0 / si).value ** (1.0 / q) for si in s]
    return float(max(vals))


@dataclass(frozen=True)
class VarianceCheck:
    lhs: float
    rhs: float
    constant: float

    @property
    def margin(self) -> float:
        return self.rhs - self.lhs


def _sup_abs(f, d: int, m: int = 4001) -> float:
    if d == 1:
        x = np.linspace(-1.0, 1.0, m).reshape(-1, 1)
    else:
        rng = np.random.default_rng(11)
        z = rng.standard_normal((m, d))
        x = z / np.linalg.norm(z, axis=1, keepdims=True) * rng.random((m, 1)) ** (1.0 / d)
    return float(np.max(np.abs(f(x))))


def _power_terms(q: float):
    if math.isinf(q):
        return 1.0, 1.0
    return (q + 2.0) / (q + 1.0), q / (q + 1.0)


def variance_bound_check(
    dist: SyntheticDistribution,
    f,
    q: float | None = None,
    sup_norm: float | None = None,
    tol: float = QUAD_TOL,
) -> VarianceCheck:
    """Second moment of the hinge excess loss against its bound in terms of the first moment.

    ``lhs = E (l(y, f) - l(y, s))^2`` and
    ``rhs = C (||f||_inf + 1)^((q+2)/(q+1)) (E (l(y, f) - l(y, s)))^(q/(q+1))``
    with ``s = sign(2 eta - 1)``, ``C = lorentz_norm + 2`` (``C = 1`` for
    ``q = 0``). ``||f||_inf`` defaults to a grid maximum.
    """
    q = dist.known_exponents.q if q is None else q
    sup = _sup_abs(f, dist.d) if sup_norm is None else sup_norm
    constant = 1.0 if q == 0 else lorentz_norm(dist, q) + 2.0

    def pieces(x):
        e = dist.eta(x)
        s = dist.bayes_decision(x)
        fx = f(x)
        gp = _hinge(1.0, fx) - _hinge(1.0, s)
        gn = _hinge(-1.0, fx) - _hinge(-1.0, s)
        return e, gp, gn

    second = integrate_marginal(dist, lambda x: (lambda e, gp, gn: e * gp**2 + (1 - e) * gn**2)(*pieces(x)), tol=tol)
    first = integrate_marginal(dist, lambda x: (lambda e, gp, gn: e * gp + (1 - e) * gn)(*pieces(x)), tol=tol)
    a, b = _power_terms(q)
    rhs = constant * (sup + 1.0) ** a * max(first.value, 0.0) ** b
    return VarianceCheck(second.value, rhs, constant)


def regularized_variance_check(
    dist: SyntheticDistribution,
    f: KernelExpansion,
    f_reg: KernelExpansion,
    lam: float,
    radius: float,
    approx_error: float | None = None,
    q: float | None = None,
    tol: float = QUAD_TOL,
) -> VarianceCheck:
    """Variance bound for the regularised loss ``lam ||f||^2 + l(y, f(x))``.

    Compares ``E (L(f) - L(f_reg))^2`` with
    ``C c (E (L(f) - L(f_reg)))^(q/(q+1)) + 2 C c a^(q/(q+1))``, where
    ``c = (radius + 1)^((q+2)/(q+1))``, ``C = 16 + 8 lorentz_norm`` (8 for
    ``q = 0``) and ``a`` is an upper bound on the approximation error at
    ``lam`` (the witness value by default). ``f`` and ``f_reg`` must lie in
    the RKHS ball of the given ``radius <= lam^(-1/2)``.
    """
    if radius > lam**-0.5 * (1 + 1e-12):
        raise ValueError("radius must not exceed lam^(-1/2)")
    for g in (f, f_reg):
        if g.rkhs_norm() > radius * (1 + 1e-12):
            raise ValueError("function outside the ball of the given radius")
    q = dist.known_exponents.q if q is None else q
    constant = 8.0 if q == 0 else 16.0 + 8.0 * lorentz_norm(dist, q)
    if approx_error is None:
        approx_error = approx_error_witness(dist, f_reg.sigma, lam)
    shift = lam * (f.rkhs_norm_sq() - f_reg.rkhs_norm_sq())

    def diffs(x):
        e = dist.eta(x)
        fx, gx = f(x), f_reg(x)
        dp = shift + _hinge(1.0, fx) - _hinge(1.0, gx)
        dn = shift + _hinge(-1.0, fx) - _hinge(-1.0, gx)
        return e, dp, dn

    second = integrate_marginal(dist, lambda x: (lambda e, dp, dn: e * dp**2 + (1 - e) * dn**2)(*diffs(x)), tol=tol)
    first = integrate_marginal(dist, lambda x: (lambda e, dp, dn: e * dp + (1 - e) * dn)(*diffs(x)), tol=tol)
    a, b = _power_terms(q)
    c_hat = (radius + 1.0) ** a
    rhs = constant * c_hat * max(first.value, 0.0) ** b + 2.0 * constant * c_hat * max(approx_error, 0.0) ** b
    return VarianceCheck(second.value, rhs, constant)
