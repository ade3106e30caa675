"""Numerical integration helpers shared by the risk, noise and approximation code.

One-dimensional integrals use adaptive panel Gauss-Legendre quadrature that is
vectorised over panels: every refinement level evaluates the integrand once on
all active panels. Integrals over subsets of R^d (d >= 2) use stratified Monte
Carlo on the cube [-1, 1]^d with two draws per cell, which gives an unbiased
variance estimate and hence a standard error.
"""

from __future__ import annotations

from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "Estimate",
    "QuadratureError",
    "integrate",
    "crossings",
    "stratified_mc",
]


@dataclass(frozen=True)
class Estimate:
    """A numerical value together with its error bar.

    For quadrature ``error`` is the achieved absolute error estimate, for
    Monte Carlo it is the standard error.
    """

    value: float
    error: float
    method: str = "quadrature"

    def __float__(self) -> float:
        return float(self.value)


class QuadratureError(RuntimeError):
    """Raised when adaptive quadrature does not reach its tolerance."""

    def __init__(self, message: str, value: float, error: float):
        super().__init__(f"{message} (value={value!r}, achieved error={error!r})")
        self.value = value
        self.error = error


_GL_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


def _gauss_legendre(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _GL_CACHE:
        _GL_CACHE[order] = np.polynomial.legendre.leggauss(order)
    return _GL_CACHE[order]


def _panel_sums(func, lo, hi, nodes, weights):
    mid = 0.5 * (lo + hi)
    half = 0.5 * (hi - lo)
    x = mid[:, None] + half[:, None] * nodes[None, :]
    fx = np.asarray(func(x.ravel()), dtype=float).reshape(x.shape)
    return half * (fx @ weights)


def integrate(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    breakpoints: Sequence[float] = (),
    atol: float = 1e-8,
    rtol: float = 0.0,
    order: int = 10,
    max_depth: int = 60,
) -> Estimate:
    """Integrate a vectorised function over ``[a, b]``.

    Parameters
    ----------
    func
        Maps a 1-d array of abscissae to an array of integrand values.
    breakpoints
        Points where the integrand is known to be non-smooth. The initial
        panels are split there so that no Gauss-Legendre rule straddles a
        discontinuity.
    atol, rtol
        A panel is accepted once the difference between its one-panel and
        two-half-panel rules is below ``max(atol * width / (b - a),
        rtol * |panel integral|)``. The total error estimate is the sum of
        these differences.

    Raises
    ------
    QuadratureError
        If some panel is still unresolved after ``max_depth`` bisections.
    """
    if not b > a:
        if a == b:
            return Estimate(0.0, 0.0)
        raise ValueError(f"integration interval must satisfy a <= b, got [{a}, {b}]")
    nodes, weights = _gauss_legendre(order)
    cuts = sorted({float(a), float(b), *(float(p) for p in breakpoints if a < p < b)})
    lo = np.array(cuts[:-1])
    hi = np.array(cuts[1:])
    total_width = b - a
    whole = _panel_sums(func, lo, hi, nodes, weights)
    value = 0.0
    error = 0.0
    for _ in range(max_depth):
        mid = 0.5 * (lo + hi)
        halves = _panel_sums(func, np.concatenate([lo, mid]), np.concatenate([mid, hi]), nodes, weights)
        left, right = halves[: lo.size], halves[lo.size :]
        refined = left + right
        diff = np.abs(refined - whole)
        allowed = np.maximum(atol * (hi - lo) / total_width, rtol * np.abs(refined))
        done = diff <= allowed
        value += float(np.sum(refined[done]))
        error += float(np.sum(diff[done]))
        if done.all():
            return Estimate(value, error)
        keep = ~done
        lo, mid, hi = lo[keep], mid[keep], hi[keep]
        whole = np.concatenate([left[keep], right[keep]])
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
    pending = float(np.sum(np.abs(whole)))
    raise QuadratureError(
        f"adaptive quadrature did not converge on [{a}, {b}] within {max_depth} bisections",
        value + float(np.sum(whole)),
        error + pending,
    )


def crossings(
    func: Callable[[np.ndarray], np.ndarray],
    a: float,
    b: float,
    level: float = 0.0,
    n_grid: int = 4097,
    xtol: float = 1e-14,
) -> np.ndarray:
    """Locate the points in ``(a, b)`` where ``func`` crosses ``level``.

    Sign changes are bracketed on a uniform grid and refined with Brent's
    method. Pairs of crossings closer than the grid spacing can be missed;
    callers pick ``n_grid`` well below the length scale of ``func``.
    """
    grid = np.linspace(a, b, n_grid)
    vals = np.asarray(func(grid), dtype=float) - level
    roots = list(grid[1:-1][vals[1:-1] == 0.0])
    s = np.sign(vals)
    idx = np.nonzero(s[:-1] * s[1:] < 0)[0]

    def scalar(t: float) -> float:
        return float(np.asarray(func(np.array([t])), dtype=float)[0]) - level

    for i in idx:
        roots.append(brentq(scalar, grid[i], grid[i + 1], xtol=xtol))
    return np.array(sorted(roots))


def stratified_mc(
    func: Callable[[np.ndarray], np.ndarray],
    d: int,
    cells_per_axis: int,
    rng: np.random.Generator,
    half_width: float = 1.0,
) -> Estimate:
    """Stratified Monte Carlo estimate of ``∫ func`` over ``[-h, h]^d``.

    The cube is cut into ``cells_per_axis ** d`` equal cells and two uniform
    points are drawn in each. ``func`` maps an ``(m, d)`` array to ``m``
    values and must already include any density factor (zero off-support).
    """
    m = cells_per_axis
    n_cells = m**d
    side = 2.0 * half_width / m
    idx = np.indices((m,) * d).reshape(d, -1).T
    corner = -half_width + side * idx
    pts = corner[None, :, :] + side * rng.random((2, n_cells, d))
    vals = np.asarray(func(pts.reshape(-1, d)), dtype=float).reshape(2, n_cells)
    cell_vol = side**d
    value = cell_vol * float(np.sum(vals.mean(axis=0)))
    # per-cell variance of the two-point mean is (v1 - v2)^2 / 4
    var = cell_vol**2 * float(np.sum((vals[0] - vals[1]) ** 2)) / 4.0
    return Estimate(value, float(np.sqrt(var)), method="monte_carlo")
