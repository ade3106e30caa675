"""Hinge-loss SVMs with Gaussian kernels, solved to a certified duality gap.

The problem solved is

    min_f  lam * ||f||_H^2 + (1/n) sum_i max(0, 1 - y_i (f(x_i) + b))

with ``b = 0`` (no offset) or ``b`` free (with offset). Writing the solution
in representer form ``f = sum_i c_i k(x_i, .)`` with ``c_i = a_i y_i``, this
is the usual soft-margin SVM with cost ``C = 1 / (2 lam n)``. Its dual is

    max_a  2 lam sum(a) - lam a^T Q a,   0 <= a <= C  (and y^T a = 0),

with ``Q_ij = y_i y_j k(x_i, x_j)``, scaled so that primal and dual values are
on the same scale as the objective above. The gap between the two is the
optimality certificate.

Without offset the dual is solved by coordinate ascent (greedy choice of one
variable at a time, exact line search). With offset the equality constraint is handled by
SMO with second-order working-set selection. Both inner loops are compiled
with numba.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .distributions import TrainingSet, as_points
from .kernel import GaussianKernel, KernelExpansion, gram

__all__ = [
    "SvmProblem",
    "SvmSolution",
    "BoundCheck",
    "SolverError",
    "objective",
    "train",
    "optimal_offset",
    "norm_bound_check",
    "offset_bound_check",
]

MAX_PASSES = 1_000_000


class SolverError(RuntimeError):
    """The solver stopped without reaching the requested duality gap."""

    def __init__(self, message: str, certificate: float, iterations: int):
        super().__init__(f"{message} (best certificate {certificate!r} after {iterations} iterations)")
        self.certificate = certificate
        self.iterations = iterations


@dataclass(frozen=True, eq=False)
class SvmProblem:
    training_set: TrainingSet
    lam: float
    kernel: GaussianKernel
    with_offset: bool = False

    def __post_init__(self):
        if not self.lam > 0:
            raise ValueError(f"lambda must be positive, got {self.lam!r}")
        if self.training_set.n < 1:
            raise ValueError("training set is empty")

    @property
    def n(self) -> int:
        return self.training_set.n

    @property
    def cost(self) -> float:
        """Soft-margin cost parameter ``C = 1 / (2 lam n)``."""
        return 1.0 / (2.0 * self.lam * self.n)


@dataclass(frozen=True, eq=False)
class SvmSolution:
    expansion: KernelExpansion
    objective: float
    certificate: float
    iterations: int
    lam: float
    with_offset: bool
    route: str = "dual"
    dual: np.ndarray | None = field(default=None, repr=False)

    @property
    def offset(self) -> float:
        return self.expansion.offset

    def rkhs_norm(self) -> float:
        return self.expansion.rkhs_norm()


@dataclass(frozen=True)
class BoundCheck:
    holds: bool
    slack: float

    def __bool__(self) -> bool:
        return self.holds


# ---------------------------------------------------------------------------
# objective and offset


def _hinge_mean(margins: np.ndarray) -> float:
    return float(np.mean(np.maximum(0.0, 1.0 - margins)))


def objective(problem: SvmProblem, expansion: KernelExpansion) -> float:
    """``lam * c^T K c + mean hinge`` of ``expansion`` on the training set."""
    if not math.isclose(expansion.kernel.sigma, problem.kernel.sigma, rel_tol=1e-15, abs_tol=0.0):
        raise ValueError(
            f"kernel mismatch: expansion sigma {expansion.kernel.sigma!r}, problem sigma {problem.kernel.sigma!r}"
        )
    if not problem.with_offset and expansion.offset != 0.0:
        raise ValueError("the offset-free problem requires an expansion with zero offset")
    ts = problem.training_set
    fx = expansion(ts.x)
    return problem.lam * expansion.rkhs_norm_sq() + _hinge_mean(ts.y * fx)


def optimal_offset(f_values: np.ndarray, y: np.ndarray) -> float:
    """Offset minimising the mean hinge loss of ``f + b`` for fixed ``f``.

    The loss is piecewise linear in ``b`` with kinks at ``y_i - f_i``; the set
    of minimisers is an interval located from exact integer slope counts, and
    the point of the interval closest to 0 is returned.
    """
    f_values = np.asarray(f_values, dtype=float)
    y = np.asarray(y)
    pos = np.sort(1.0 - f_values[y > 0])
    neg = np.sort(-1.0 - f_values[y < 0])
    if pos.size == 0 or neg.size == 0:
        raise ValueError("optimal offset needs both labels")
    kinks = np.unique(np.concatenate([pos, neg]))
    # slope right of b: #{neg <= b} - #{pos > b}; slope left of b: #{neg < b} - #{pos >= b}
    right = np.searchsorted(neg, kinks, side="right") - (pos.size - np.searchsorted(pos, kinks, side="right"))
    left = np.searchsorted(neg, kinks, side="left") - (pos.size - np.searchsorted(pos, kinks, side="left"))
    lo = kinks[np.argmax(right >= 0)]
    hi = kinks[len(kinks) - 1 - np.argmax((left <= 0)[::-1])]
    return float(min(max(0.0, lo), hi))


# ---------------------------------------------------------------------------
# compiled inner loops


@njit(cache=True)
def _cd_greedy(K, y, alpha, grad, cost, order, eps, max_iter):
    """Dual coordinate ascent without equality constraint.

    Each step updates the coordinate with the largest projected-gradient
    violation (ties broken by position in ``order``) by an exact clipped
    Newton step. ``grad`` holds ``(Q alpha)_i - 1`` and is updated in place.
    Stops once the largest violation is below ``eps``.
    """
    n = alpha.shape[0]
    it = 0
    while it < max_iter:
        viol = 0.0
        i = -1
        for k in range(n):
            t = order[k]
            g = grad[t]
            if alpha[t] <= 0.0:
                pg = min(g, 0.0)
            elif alpha[t] >= cost:
                pg = max(g, 0.0)
            else:
                pg = g
            if abs(pg) > viol:
                viol = abs(pg)
                i = t
        if viol < eps:
            break
        it += 1
        old = alpha[i]
        new = old - grad[i] / K[i, i]
        if new < 0.0:
            new = 0.0
        elif new > cost:
            new = cost
        step = new - old
        alpha[i] = new
        yi = y[i]
        for t in range(n):
            grad[t] += step * yi * y[t] * K[t, i]
    return it


@njit(cache=True)
def _smo(K, y, alpha, grad, cost, eps, max_iter):
    """SMO with second-order working-set selection for ``y^T alpha = 0``."""
    n = alpha.shape[0]
    tau = 1e-12
    it = 0
    while it < max_iter:
        # i: maximal violating index in I_up
        gmax = -np.inf
        i = -1
        for t in range(n):
            if (y[t] > 0 and alpha[t] < cost) or (y[t] < 0 and alpha[t] > 0.0):
                v = -y[t] * grad[t]
                if v >= gmax:
                    gmax = v
                    i = t
        gmin = np.inf
        j = -1
        best = np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] > 0.0) or (y[t] < 0 and alpha[t] < cost):
                v = -y[t] * grad[t]
                if v < gmin:
                    gmin = v
                if i >= 0:
                    b = gmax - v
                    if b > 0.0:
                        a = K[i, i] + K[t, t] - 2.0 * K[i, t]
                        if a <= 0.0:
                            a = tau
                        score = -(b * b) / a
                        if score <= best:
                            best = score
                            j = t
        if i < 0 or j < 0 or gmax - gmin < eps:
            break
        it += 1
        yi = y[i]
        yj = y[j]
        qij = yi * yj * K[i, j]
        oi = alpha[i]
        oj = alpha[j]
        if yi != yj:
            quad = K[i, i] + K[j, j] + 2.0 * qij
            if quad <= 0.0:
                quad = tau
            delta = (-grad[i] - grad[j]) / quad
            diff = oi - oj
            ai = oi + delta
            aj = oj + delta
            if diff > 0.0:
                if aj < 0.0:
                    aj = 0.0
                    ai = diff
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = -diff
            if diff > 0.0:
                if ai > cost:
                    ai = cost
                    aj = cost - diff
            else:
                if aj > cost:
                    aj = cost
                    ai = cost + diff
        else:
            quad = K[i, i] + K[j, j] - 2.0 * qij
            if quad <= 0.0:
                quad = tau
            delta = (grad[i] - grad[j]) / quad
            s = oi + oj
            ai = oi - delta
            aj = oj + delta
            if s > cost:
                if ai > cost:
                    ai = cost
                    aj = s - cost
            else:
                if aj < 0.0:
                    aj = 0.0
                    ai = s
            if s > cost:
                if aj > cost:
                    aj = cost
                    ai = s - cost
            else:
                if ai < 0.0:
                    ai = 0.0
                    aj = s
        di = ai - oi
        dj = aj - oj
        alpha[i] = ai
        alpha[j] = aj
        for t in range(n):
            grad[t] += y[t] * (yi * K[t, i] * di + yj * K[t, j] * dj)
    return it


# ---------------------------------------------------------------------------
# certificates


def _primal_dual(K, y, alpha, lam, with_offset):
    """Exact primal value, dual value and offset for a dual-feasible ``alpha``."""
    c = alpha * y
    f = K @ c
    quad = float(c @ f)
    b = optimal_offset(f, y) if with_offset else 0.0
    primal = lam * quad + _hinge_mean(y * (f + b))
    dual = 2.0 * lam * float(np.sum(alpha)) - lam * quad
    return primal, dual, b


def _degenerate(problem: SvmProblem) -> SvmSolution:
    ts = problem.training_set
    y_star = float(ts.y[0])
    exp = KernelExpansion(problem.kernel, ts.x, np.zeros(ts.n), y_star)
    return SvmSolution(exp, 0.0, 0.0, 0, problem.lam, True, "closed_form", np.zeros(ts.n))


def _train_dual(problem: SvmProblem, tol_opt: float, max_passes: int, order_seed: int | None) -> SvmSolution:
    ts = problem.training_set
    n = ts.n
    y = ts.y.astype(np.float64)
    K = gram(problem.kernel, ts.x)
    cost = problem.cost
    alpha = np.zeros(n)
    grad = -np.ones(n)
    order = np.arange(n, dtype=np.int64)
    if order_seed is not None:
        order = np.random.default_rng(order_seed).permutation(n).astype(np.int64)
    eps = 1e-3
    used = 0
    gap = math.inf
    while True:
        budget = max_passes - used
        if budget <= 0:
            raise SolverError("iteration budget exhausted", gap, used)
        # iterations are counted in passes, i.e. units of n single updates
        if problem.with_offset:
            its = _smo(K, y, alpha, grad, cost, eps, budget * n)
        else:
            its = _cd_greedy(K, y, alpha, grad, cost, order, eps, budget * n)
        used += max(1, -(-its // n))
        np.clip(alpha, 0.0, cost, out=alpha)
        # refresh the gradient to remove accumulated rounding before certifying
        grad = y * (K @ (alpha * y)) - 1.0
        primal, dual, b = _primal_dual(K, y, alpha, problem.lam, problem.with_offset)
        gap = primal - dual
        if gap <= tol_opt:
            break
        if eps < 1e-15:
            raise SolverError("duality gap stalled above tolerance", gap, used)
        eps *= 0.1
    exp = KernelExpansion(problem.kernel, ts.x, alpha * y, b)
    return SvmSolution(exp, primal, max(gap, 0.0), used, problem.lam, problem.with_offset, "dual", alpha)


def _train_primal(problem: SvmProblem, tol_opt: float) -> SvmSolution:
    """Interior-point solve of the primal in the eigenbasis of the Gram matrix."""
    from cvxopt import matrix, solvers

    ts = problem.training_set
    n = ts.n
    y = ts.y.astype(np.float64)
    K = gram(problem.kernel, ts.x)
    mu, V = np.linalg.eigh(K)
    keep = mu > 1e-12 * max(mu.max(), 1.0)
    L = V[:, keep] * np.sqrt(mu[keep])
    r = L.shape[1]
    nb = 1 if problem.with_offset else 0
    nv = r + nb + n
    P = np.zeros((nv, nv))
    P[:r, :r] = 2.0 * problem.lam * np.eye(r)
    q = np.zeros(nv)
    q[r + nb :] = 1.0 / n
    # -y_i (L w + b)_i - xi_i <= -1  and  -xi <= 0
    G = np.zeros((2 * n, nv))
    G[:n, :r] = -y[:, None] * L
    if nb:
        G[:n, r] = -y
    G[:n, r + nb :] = -np.eye(n)
    G[n:, r + nb :] = -np.eye(n)
    h = np.concatenate([-np.ones(n), np.zeros(n)])
    opts = {"show_progress": False, "abstol": min(tol_opt, 1e-10), "reltol": 1e-12, "feastol": 1e-12, "maxiters": 200}
    sol = solvers.qp(matrix(P), matrix(q), matrix(G), matrix(h), options=opts)
    x = np.array(sol["x"]).ravel()
    w = x[:r]
    b = float(x[r]) if nb else 0.0
    coef = V[:, keep] @ (w / np.sqrt(mu[keep]))
    f = L @ w
    if nb:
        b = optimal_offset(f, y)
    primal = problem.lam * float(w @ w) + _hinge_mean(y * (f + b))
    gap = abs(float(sol["gap"]))
    if sol["status"] != "optimal" and gap > tol_opt:
        raise SolverError(f"interior-point solver status {sol['status']!r}", gap, int(sol["iterations"]))
    exp = KernelExpansion(problem.kernel, ts.x, coef, b)
    return SvmSolution(exp, primal, gap, int(sol["iterations"]), problem.lam, problem.with_offset, "primal")


def train(
    problem: SvmProblem,
    tol_opt: float | None = None,
    route: str = "dual",
    max_passes: int = MAX_PASSES,
    order_seed: int | None = None,
) -> SvmSolution:
    """Solve ``problem`` to within ``tol_opt`` (default ``1e-8 * n``) of the optimum.

    Parameters
    ----------
    route
        ``"dual"`` (coordinate ascent or SMO, certified by the exact duality
        gap) or ``"primal"`` (interior point on the primal QP, certified by
        the solver's own gap).
    order_seed
        Permutes the coordinate sweep order; used to confirm that the decision
        function does not depend on the internal ordering.

    Raises
    ------
    SolverError
        When the gap cannot be brought below ``tol_opt`` within the budget.
    """
    if tol_opt is None:
        tol_opt = 1e-8 * problem.n
    if not tol_opt > 0:
        raise ValueError(f"tol_opt must be positive, got {tol_opt!r}")
    ts = problem.training_set
    if problem.with_offset and np.all(ts.y == ts.y[0]):
        return _degenerate(problem)
    if route == "dual":
        return _train_dual(problem, tol_opt, max_passes, order_seed)
    if route == "primal":
        return _train_primal(problem, tol_opt)
    raise ValueError(f"unknown route {route!r}")


# ---------------------------------------------------------------------------
# bound checks


def norm_bound_check(solution: SvmSolution, lam: float | None = None, tol: float = 1e-9) -> BoundCheck:
    """``||f||_H <= lam^(-1/2)``, which follows by comparing with ``f = 0``."""
    lam = solution.lam if lam is None else lam
    slack = lam**-0.5 + tol - solution.rkhs_norm()
    return BoundCheck(slack >= 0.0, float(slack))


def _sup_grid(d: int, m: int = 2001, seed: int = 7) -> np.ndarray:
    if d == 1:
        return np.linspace(-1.0, 1.0, m).reshape(-1, 1)
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((m, d))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    return z * rng.random((m, 1)) ** (1.0 / d)


def offset_bound_check(solution: SvmSolution, grid=None, tol: float = 1e-6) -> BoundCheck:
    """``|b| <= sup |f| + 1`` with the sup taken over the centers and a grid."""
    exp = solution.expansion
    pts = exp.centers if grid is None else np.vstack([exp.centers, as_points(grid, exp.d)])
    if grid is None:
        pts = np.vstack([pts, _sup_grid(exp.d)])
    sup = float(np.max(np.abs(exp.without_offset()(pts)))) if exp.coefficients.size else 0.0
    slack = sup + 1.0 + tol - abs(exp.offset)
    return BoundCheck(slack >= 0.0, float(slack))
